#include "reldepth/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "reldepth/align.hpp"
#include "reldepth/error.hpp"

namespace reldepth {

void TrainLog::write_csv(std::ostream& os) const {
  os << "kind,step,epoch,loss,value,grad_norm,skipped\n";
  char buf[128];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", s.value, s.grad_norm);
    os << "step," << s.step << ',' << s.epoch << ',' << loss_name(s.loss) << ',' << buf << ','
       << s.skipped << '\n';
  }
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%.17g", e.validation_ssimae);
    os << "epoch,," << e.epoch << ",val_ssimae," << buf << ",,\n";
  }
  std::snprintf(buf, sizeof buf, "%.17g", best_validation);
  os << "best,," << best_epoch << ",val_ssimae," << buf << ",,\n";
}

bool EarlyStopping::update(std::size_t epoch, double value) {
  if (!has_best_ || value < best_value_) {
    has_best_ = true;
    best_value_ = value;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

double gradient_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_gradients(std::span<Tensor> params, double clip_norm) {
  const double norm = gradient_norm(params);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  if (norm > clip_norm) {
    const double f = clip_norm / norm;
    for (auto& p : params)
      for (double& g : p.mutable_grad()) g *= f;
  }
  return norm;
}

double sgd_step(std::span<Tensor> params, double lr, double clip_norm) {
  const double norm = clip_gradients(params, clip_norm);
  for (auto& p : params) {
    const auto g = p.grad();
    if (g.empty()) continue;
    auto v = p.mutable_data();
    if (g.size() != v.size()) throw ShapeError("sgd_step: gradient size mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
  return norm;
}

double validation_ssimae(const DepthNet& net, std::span<const SupervisedSample> samples) {
  if (samples.empty()) throw std::invalid_argument("validation set is empty");
  double total = 0.0;
  for (const auto& s : samples) {
    const Mask valid = s.gt.valid;
    total += ssimae(net.predict(s.image), s.gt, &valid);
  }
  return total / static_cast<double>(samples.size());
}

namespace {

struct Sources {
  std::vector<const ClipSample*> temporal_clips;
};

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Sources check_sources(const TrainData& data, const TrainConfig& cfg) {
  Sources src;
  if (data.validation.empty()) throw std::invalid_argument("train: validation set is empty");
  for (LossKind k : cfg.loss_schedule()) {
    switch (k) {
      case LossKind::supervised:
        if (data.supervised.empty()) throw std::invalid_argument("train: sup enabled without supervised samples");
        break;
      case LossKind::temporal:
        for (const auto& c : data.clips)
          if (!eligible_frame_pairs(c, cfg.max_pair_dt).empty()) src.temporal_clips.push_back(&c);
        if (src.temporal_clips.empty())
          throw std::invalid_argument("train: temp enabled without clips holding eligible frame pairs");
        break;
      case LossKind::augmentation:
        if (data.unlabeled.empty()) throw std::invalid_argument("train: aug enabled without unlabeled images");
        break;
    }
  }
  return src;
}

std::optional<Tensor> sample_loss(LossKind kind, const ModelPair& pair, const TrainData& data,
                                  const Sources& src, const TrainConfig& cfg, Rng& rng) {
  switch (kind) {
    case LossKind::supervised: {
      const auto& s = data.supervised[pick(rng, data.supervised.size())];
      try {
        return supervised_loss(pair, s.image, s.gt);
      } catch (const DegenerateError&) {
        return std::nullopt;
      }
    }
    case LossKind::temporal: {
      const auto& clip = *src.temporal_clips[pick(rng, src.temporal_clips.size())];
      const FramePair fp = sample_frame_pair(clip, rng, cfg.max_pair_dt);
      return temporal_consistency_loss(pair, fp, cfg.mask);
    }
    case LossKind::augmentation: {
      const Image& img = data.unlabeled[pick(rng, data.unlabeled.size())];
      const AugmentParams aug = AugmentParams::sample(rng, img.size(), cfg.augment);
      return augmentation_consistency_loss(pair, img, aug);
    }
  }
  return std::nullopt;
}

}  // namespace

TrainResult train(ModelPair pair, const TrainData& data, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  const Sources src = check_sources(data, cfg);
  const auto schedule = cfg.loss_schedule();

  pair.ema_decay = cfg.ema_decay;
  pair.fast.set_requires_grad(true);
  pair.slow.set_requires_grad(false);

  Rng rng(cfg.seed);
  TrainLog log;
  EarlyStopping stopper(cfg.patience_epochs);
  ModelPair best = pair;
  std::size_t step = 0;

  for (std::size_t epoch = 1;; ++epoch) {
    for (std::size_t cycle = 0; cycle < cfg.batches_per_epoch; ++cycle) {
      for (LossKind kind : schedule) {
        StepRecord rec;
        rec.step = step++;
        rec.epoch = epoch;
        rec.loss = kind;
        pair.fast.zero_grad();
        double total = 0.0;
        std::size_t used = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
          const auto loss = sample_loss(kind, pair, data, src, cfg, rng);
          if (!loss) {
            ++rec.skipped;
            continue;
          }
          const double v = loss->item();
          if (!std::isfinite(v))
            throw NumericalError("training collapsed: " + std::string(loss_name(kind)) +
                                 " loss is non-finite at step " + std::to_string(rec.step));
          backward(*loss);
          total += v;
          ++used;
        }
        if (used == 0) {
          rec.value = std::numeric_limits<double>::quiet_NaN();
        } else {
          const double inv = 1.0 / static_cast<double>(used);
          for (auto& p : pair.fast.parameters())
            for (double& g : p.mutable_grad()) g *= inv;
          rec.value = total * inv;
          rec.grad_norm = sgd_step(pair.fast.parameters(), cfg.lr, cfg.clip_norm);
          rec.applied = true;
          pair.ema_update();
          ++log.optimizer_steps;
          ++log.ema_updates;
        }
        log.steps.push_back(rec);
        if (callbacks.on_step) callbacks.on_step(rec);
      }
    }

    const EpochRecord er{epoch, validation_ssimae(pair.fast, data.validation)};
    log.epochs.push_back(er);
    if (callbacks.on_epoch) callbacks.on_epoch(er);
    if (!std::isfinite(er.validation_ssimae))
      throw NumericalError("validation SSIMAE is non-finite at epoch " + std::to_string(epoch));
    if (stopper.update(epoch, er.validation_ssimae)) best = pair;
    if (stopper.should_stop(epoch) || (cfg.max_epochs != 0 && epoch >= cfg.max_epochs)) break;
  }

  log.best_epoch = stopper.best_epoch();
  log.best_validation = stopper.best_value();
  pair.fast.zero_grad();
  best.fast.zero_grad();
  return {std::move(best), std::move(log)};
}

}  // namespace reldepth
