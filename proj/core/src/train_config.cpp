#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "reldepth/train.hpp"

namespace reldepth {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument("config: invalid value '" + std::string(value) + "' for " +
                              std::string(key));
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (used != s.size() || !std::isfinite(out)) bad_value(key, v);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::supervised: return "sup";
    case LossKind::temporal: return "temp";
    case LossKind::augmentation: return "aug";
  }
  return "?";
}

std::optional<LossKind> parse_loss_name(std::string_view name) {
  if (name == "sup") return LossKind::supervised;
  if (name == "temp") return LossKind::temporal;
  if (name == "aug") return LossKind::augmentation;
  return std::nullopt;
}

std::vector<LossKind> TrainConfig::loss_schedule() const {
  std::vector<LossKind> out;
  for (LossKind k : {LossKind::supervised, LossKind::temporal, LossKind::augmentation})
    if (std::find(enabled_losses.begin(), enabled_losses.end(), k) != enabled_losses.end())
      out.push_back(k);
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
  if (!(lr >= 0.0)) throw std::invalid_argument("config: lr must be non-negative");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("config: clip_norm must be positive");
  if (batches_per_epoch == 0) throw std::invalid_argument("config: batches_per_epoch must be positive");
  if (patience_epochs == 0) throw std::invalid_argument("config: patience_epochs must be positive");
  if (enabled_losses.empty()) throw std::invalid_argument("config: enabled_losses must not be empty");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0))
    throw std::invalid_argument("config: ema_decay must lie in [0, 1)");
  if (!(max_pair_dt > 0.0)) throw std::invalid_argument("config: max_pair_dt must be positive");
  mask.validate();
}

std::vector<std::string> train_config_keys() {
  return {"batch_size", "lr",        "clip_norm",  "batches_per_epoch", "patience_epochs",
          "max_epochs", "enabled_losses", "seed", "ema_decay",         "epsilon_px",
          "max_pair_dt"};
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string value = trim(raw);
  if (key == "batch_size") cfg.batch_size = to_size(key, value);
  else if (key == "lr") cfg.lr = to_double(key, value);
  else if (key == "clip_norm") cfg.clip_norm = to_double(key, value);
  else if (key == "batches_per_epoch") cfg.batches_per_epoch = to_size(key, value);
  else if (key == "patience_epochs") cfg.patience_epochs = to_size(key, value);
  else if (key == "max_epochs") cfg.max_epochs = to_size(key, value);
  else if (key == "seed") cfg.seed = to_size(key, value);
  else if (key == "ema_decay") cfg.ema_decay = to_double(key, value);
  else if (key == "epsilon_px") cfg.mask.epsilon_px = to_double(key, value);
  else if (key == "max_pair_dt") cfg.max_pair_dt = to_double(key, value);
  else if (key == "enabled_losses") {
    std::vector<LossKind> losses;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto kind = parse_loss_name(trim(item));
      if (!kind) bad_value(key, value);
      losses.push_back(*kind);
    }
    if (losses.empty()) bad_value(key, value);
    cfg.enabled_losses = std::move(losses);
  } else {
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  }
}

TrainConfig parse_train_config(std::string_view text, TrainConfig cfg) {
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "batch_size = " << cfg.batch_size << '\n'
     << "lr = " << fmt(cfg.lr) << '\n'
     << "clip_norm = " << fmt(cfg.clip_norm) << '\n'
     << "batches_per_epoch = " << cfg.batches_per_epoch << '\n'
     << "patience_epochs = " << cfg.patience_epochs << '\n'
     << "max_epochs = " << cfg.max_epochs << '\n'
     << "enabled_losses = ";
  const auto schedule = cfg.loss_schedule();
  for (std::size_t i = 0; i < schedule.size(); ++i) os << (i ? "," : "") << loss_name(schedule[i]);
  os << '\n'
     << "seed = " << cfg.seed << '\n'
     << "ema_decay = " << fmt(cfg.ema_decay) << '\n'
     << "epsilon_px = " << fmt(cfg.mask.epsilon_px) << '\n'
     << "max_pair_dt = " << fmt(cfg.max_pair_dt) << '\n';
  return os.str();
}

}  // namespace reldepth
