#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "reldepth/error.hpp"
#include "reldepth/synth.hpp"
#include "reldepth/train.hpp"

using namespace reldepth;

namespace {

TrainData tiny_data() {
  RandomClipOptions o;
  o.size = {8, 8};
  o.focal_px = 10.0;
  o.frames = 4;
  TrainData d;
  for (std::uint64_t s = 0; s < 3; ++s) {
    ClipSample c = random_clip(s, o);
    d.supervised.push_back({c.frames[0], c.disparity[0]});
    d.unlabeled.push_back(c.frames[1]);
    d.clips.push_back(std::move(c));
  }
  const ClipSample v = random_clip(99, o);
  d.validation.push_back({v.frames[0], v.disparity[0]});
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 2;
  c.batches_per_epoch = 2;
  c.max_epochs = 3;
  c.lr = 0.01;
  c.enabled_losses = {LossKind::augmentation, LossKind::supervised, LossKind::temporal};
  return c;
}

std::vector<Tensor> grads_with_norm(std::initializer_list<double> values) {
  Tensor t = Tensor::zeros({values.size()}, true);
  std::size_t i = 0;
  for (double v : values) t.mutable_grad()[i++] = v;
  return {t};
}

}  // namespace

TEST_CASE("loss names round trip") {
  for (LossKind k : {LossKind::supervised, LossKind::temporal, LossKind::augmentation})
    CHECK(parse_loss_name(loss_name(k)) == k);
  CHECK_FALSE(parse_loss_name("l1"));
}

TEST_CASE("config text round trip and schedule order") {
  TrainConfig c = tiny_config();
  c.lr = 0.1 + 0.2;
  c.seed = 12345678901234ULL;
  c.mask.epsilon_px = 1.5;
  const TrainConfig back = parse_train_config(format_train_config(c));
  CHECK(back.lr == c.lr);
  CHECK(back.seed == c.seed);
  CHECK(back.mask.epsilon_px == 1.5);
  CHECK(back.batches_per_epoch == 2);
  CHECK(back.loss_schedule() ==
        std::vector<LossKind>{LossKind::supervised, LossKind::temporal, LossKind::augmentation});
  const TrainConfig dup = parse_train_config("enabled_losses = temp, sup, temp\n");
  CHECK(dup.loss_schedule() == std::vector<LossKind>{LossKind::supervised, LossKind::temporal});
}

TEST_CASE("config parsing errors") {
  CHECK(parse_train_config("# only a comment\n\n  lr = 0.5 # trailing\n").lr == 0.5);
  CHECK_THROWS_AS(parse_train_config("nonsense = 1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("lr 0.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("batch_size = -1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("batch_size = 2.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("lr = nan"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("enabled_losses = sup,l2"), std::invalid_argument);
  const std::string text = format_train_config(TrainConfig{});
  for (const std::string& k : train_config_keys()) CHECK(text.find(k + " = ") != std::string::npos);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_NOTHROW(TrainConfig{}.validate());
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lr = -1; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.clip_norm = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.ema_decay = 1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.enabled_losses.clear(); }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.patience_epochs = 0; }).validate(), std::invalid_argument);
}

TEST_CASE("early stopping counts epochs since the last strict improvement") {
  EarlyStopping s(2);
  CHECK(s.update(1, 0.5));
  CHECK_FALSE(s.should_stop(1));
  CHECK_FALSE(s.update(2, 0.5));
  CHECK_FALSE(s.should_stop(2));
  CHECK(s.update(3, 0.4));
  CHECK_FALSE(s.update(4, 0.45));
  CHECK(s.should_stop(5));
  CHECK(s.best_epoch() == 3);
  CHECK(s.best_value() == 0.4);
}

TEST_CASE("gradient clipping and SGD") {
  auto g = grads_with_norm({3.0, 4.0});
  CHECK(gradient_norm(g) == 5.0);
  CHECK(clip_gradients(g, 1.0) == 5.0);
  CHECK(g[0].grad()[0] == doctest::Approx(0.6));
  CHECK(gradient_norm(g) == doctest::Approx(1.0));

  auto same = grads_with_norm({3.0, 4.0});
  clip_gradients(same, 5.0);
  CHECK(same[0].grad()[1] == 4.0);

  auto step = grads_with_norm({3.0, 4.0});
  CHECK(sgd_step(step, 0.5, 100.0) == 5.0);
  CHECK(step[0][0] == -1.5);
  CHECK(step[0][1] == -2.0);

  auto bad = grads_with_norm({1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(clip_gradients(bad, 1.0), NumericalError);
}

TEST_CASE("training logs every step in canonical order and is reproducible") {
  const TrainData data = tiny_data();
  TrainConfig cfg = tiny_config();
  std::size_t step_calls = 0, epoch_calls = 0;
  TrainCallbacks cb{[&](const StepRecord&) { ++step_calls; }, [&](const EpochRecord&) { ++epoch_calls; }};
  const TrainResult a = train(ModelPair::create(1), data, cfg, cb);
  const TrainResult b = train(ModelPair::create(1), data, cfg);
  CHECK(a.log.steps.size() == 3 * 2 * 3);
  CHECK(step_calls == a.log.steps.size());
  CHECK(epoch_calls == 3);
  CHECK(a.log.steps[0].loss == LossKind::supervised);
  CHECK(a.log.steps[1].loss == LossKind::temporal);
  CHECK(a.log.steps[2].loss == LossKind::augmentation);
  CHECK(a.log.steps[7].epoch == 2);
  CHECK(a.log.optimizer_steps == a.log.ema_updates);
  CHECK(a.model.fast.flat_parameters() == b.model.fast.flat_parameters());
  std::ostringstream ca, cb2;
  a.log.write_csv(ca);
  b.log.write_csv(cb2);
  CHECK(ca.str() == cb2.str());
  CHECK(ca.str().rfind("kind,step,epoch,loss,value,grad_norm,skipped\nstep,0,1,sup,", 0) == 0);

  cfg.seed = 2;
  const TrainResult c = train(ModelPair::create(1), data, cfg);
  CHECK(c.model.fast.flat_parameters() != a.model.fast.flat_parameters());
}

TEST_CASE("the returned model is the best validation epoch") {
  const TrainData data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.max_epochs = 4;
  cfg.lr = 0.05;
  const TrainResult r = train(ModelPair::create(3), data, cfg);
  double best = INFINITY;
  std::size_t best_epoch = 0;
  for (const EpochRecord& e : r.log.epochs)
    if (e.validation_ssimae < best) {
      best = e.validation_ssimae;
      best_epoch = e.epoch;
    }
  CHECK(r.log.best_epoch == best_epoch);
  CHECK(r.log.best_validation == best);
  CHECK(validation_ssimae(r.model.fast, data.validation) == best);
}

TEST_CASE("early stopping ends an unbounded run") {
  const TrainData data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.max_epochs = 0;
  cfg.patience_epochs = 1;
  cfg.lr = 0.0;
  const TrainResult r = train(ModelPair::create(1), data, cfg);
  CHECK(r.log.epochs.size() == 2);
  CHECK(r.log.best_epoch == 1);
}

TEST_CASE("steps where every sample is skipped do not update the model") {
  TrainData data = tiny_data();
  for (SupervisedSample& s : data.supervised) s.gt = DepthMap(s.gt.size, 1.0);
  TrainConfig cfg = tiny_config();
  cfg.enabled_losses = {LossKind::supervised};
  cfg.max_epochs = 1;
  const ModelPair start = ModelPair::create(4);
  const TrainResult r = train(start, data, cfg);
  for (const StepRecord& s : r.log.steps) {
    CHECK_FALSE(s.applied);
    CHECK(s.skipped == cfg.batch_size);
    CHECK(std::isnan(s.value));
  }
  CHECK(r.log.optimizer_steps == 0);
  CHECK(r.log.ema_updates == 0);
  CHECK(r.model.fast.flat_parameters() == start.fast.flat_parameters());
}

TEST_CASE("missing data sources are reported before training") {
  TrainData data = tiny_data();
  TrainConfig cfg = tiny_config();
  TrainData no_val = data;
  no_val.validation.clear();
  CHECK_THROWS_AS(train(ModelPair::create(1), no_val, cfg), std::invalid_argument);
  TrainData no_unlabeled = data;
  no_unlabeled.unlabeled.clear();
  CHECK_THROWS_AS(train(ModelPair::create(1), no_unlabeled, cfg), std::invalid_argument);
  cfg.max_pair_dt = 0.01;
  CHECK_THROWS_AS(train(ModelPair::create(1), data, cfg), std::invalid_argument);
}

TEST_CASE("non-finite losses abort with NumericalError") {
  TrainData data = tiny_data();
  data.supervised[0].image.data()[0] = std::numeric_limits<double>::quiet_NaN();
  data.supervised.resize(1);
  TrainConfig cfg = tiny_config();
  cfg.enabled_losses = {LossKind::supervised};
  CHECK_THROWS_AS(train(ModelPair::create(1), data, cfg), NumericalError);
}
