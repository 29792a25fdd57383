#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reldepth/clip.hpp"
#include "reldepth/flow.hpp"
#include "reldepth/losses.hpp"
#include "reldepth/model.hpp"

namespace reldepth {

enum class LossKind { supervised, temporal, augmentation };

std::string_view loss_name(LossKind kind);  // "sup", "temp", "aug"
std::optional<LossKind> parse_loss_name(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 15;
  // Toy-scale default; large pretrained backbones use 1e-6.
  double lr = 1e-3;
  double clip_norm = 10.0;
  // One batch cycle steps every enabled loss once.
  std::size_t batches_per_epoch = 100;
  std::size_t patience_epochs = 50;
  // 0 runs until early stopping.
  std::size_t max_epochs = 0;
  // Stepped in the fixed order sup, temp, aug regardless of listing order.
  std::vector<LossKind> enabled_losses{LossKind::supervised};
  std::uint64_t seed = 0;
  double ema_decay = 0.999;
  MaskConfig mask;
  double max_pair_dt = kMaxPairDt;
  AugmentRanges augment;

  void validate() const;
  // enabled_losses deduplicated in canonical order.
  std::vector<LossKind> loss_schedule() const;
};

// Keys accepted by the plain-text config format ("key = value", '#'
// comments). enabled_losses takes a comma-separated list.
std::vector<std::string> train_config_keys();
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
std::string format_train_config(const TrainConfig& cfg);

struct TrainData {
  std::vector<SupervisedSample> supervised;
  std::vector<ClipSample> clips;
  std::vector<Image> unlabeled;
  std::vector<SupervisedSample> validation;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossKind loss = LossKind::supervised;
  double value = 0.0;      // mean loss over non-skipped samples, NaN if none
  double grad_norm = 0.0;  // before clipping
  std::size_t skipped = 0;
  bool applied = false;    // false when every sample was skipped
};

struct EpochRecord {
  std::size_t epoch = 0;
  double validation_ssimae = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation = 0.0;
  std::size_t optimizer_steps = 0;
  std::size_t ema_updates = 0;

  // kind,step,epoch,loss,value,grad_norm,skipped
  void write_csv(std::ostream& os) const;
};

// Patience counted in epochs since the last strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records an epoch result; true if it is a new best.
  bool update(std::size_t epoch, double value);
  bool should_stop(std::size_t epoch) const { return epoch >= best_epoch_ + patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_value_ = 0.0;
  bool has_best_ = false;
};

// L2 norm over the concatenated gradients of every parameter.
double gradient_norm(std::span<const Tensor> params);
// Scales gradients by min(1, clip_norm / norm); returns the pre-clip norm.
// Throws NumericalError on non-finite gradients.
double clip_gradients(std::span<Tensor> params, double clip_norm);
// Clips, then p <- p - lr * g. Returns the pre-clip norm.
double sgd_step(std::span<Tensor> params, double lr, double clip_norm);

double validation_ssimae(const DepthNet& net, std::span<const SupervisedSample> samples);

struct TrainResult {
  ModelPair model;  // parameters from the best validation epoch
  TrainLog log;
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Interleaved multi-loss SGD with EMA teacher updates and early stopping.
// Throws NumericalError if a loss becomes NaN.
TrainResult train(ModelPair pair, const TrainData& data, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

}  // namespace reldepth
