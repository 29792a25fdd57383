#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "cli.hpp"
#include "reldepth/error.hpp"
#include "reldepth/gradcheck.hpp"
#include "reldepth/manifest.hpp"
#include "reldepth/train.hpp"

namespace reldepth::cli {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string manifest, config, out, log, init;
  std::optional<std::uint64_t> model_seed;
  bool quiet = false;
  std::map<std::string, std::string> overrides;
};

struct GradcheckArgs {
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  std::size_t size = 8;
  GradcheckOptions opts;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void add_train(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<TrainArgs>();
  CLI::App* sub = root.add_subcommand("train", "Train the fast/slow model pair on a manifest");
  sub->add_option("--manifest", a->manifest, "Dataset manifest")->required();
  sub->add_option("--config", a->config, "key = value config file");
  sub->add_option("--out", a->out, "Checkpoint to write")->required();
  sub->add_option("--log", a->log, "Training log CSV");
  sub->add_option("--init", a->init, "Start from this checkpoint (teacher reset to the student)");
  sub->add_option("--model-seed", a->model_seed, "Initialization seed (default: --seed)");
  sub->add_flag("--quiet", a->quiet, "No per-epoch progress");
  for (const std::string& key : train_config_keys())
    sub->add_option_function<std::string>(
        "--" + dashed(key), [a, key](const std::string& v) { a->overrides[key] = v; },
        "Override config key " + key);

  cmds.push_back({sub, [a](std::ostream& out, std::ostream&) {
                    TrainConfig cfg;
                    if (!a->config.empty()) cfg = parse_train_config(read_text(a->config));
                    for (const std::string& key : train_config_keys())
                      if (const auto it = a->overrides.find(key); it != a->overrides.end())
                        set_config_value(cfg, key, it->second);
                    cfg.validate();

                    const Manifest m = read_manifest(a->manifest);
                    TrainData data;
                    data.supervised = load_supervised(m, Split::train);
                    data.validation = load_supervised(m, Split::val);
                    for (const ClipRecord* c : m.split(Split::train)) {
                      data.clips.push_back(load_clip(m, *c));
                      for (const Image& f : data.clips.back().frames) data.unlabeled.push_back(f);
                    }

                    ModelPair pair = a->init.empty()
                                         ? ModelPair::create(a->model_seed.value_or(cfg.seed), cfg.ema_decay)
                                         : load_checkpoint(a->init);
                    if (!a->init.empty()) pair.sync_slow();

                    TrainCallbacks cb;
                    if (!a->quiet)
                      cb.on_epoch = [&out](const EpochRecord& e) {
                        out << "epoch " << e.epoch << " val_ssimae " << fmt(e.validation_ssimae) << '\n';
                      };
                    const TrainResult r = train(std::move(pair), data, cfg, cb);

                    ensure_parent(a->out);
                    save_checkpoint(a->out, r.model);
                    if (!a->log.empty()) {
                      ensure_parent(a->log);
                      std::ofstream f(a->log);
                      if (!f) throw FormatError(a->log + ": cannot write");
                      r.log.write_csv(f);
                    }
                    const std::size_t skipped = std::count_if(r.log.steps.begin(), r.log.steps.end(),
                                                              [](const StepRecord& s) { return s.skipped > 0; });
                    out << "best_epoch " << r.log.best_epoch << " val_ssimae " << fmt(r.log.best_validation)
                        << " steps " << r.log.steps.size() << " steps_with_skips " << skipped << '\n';
                    return kOk;
                  }});
}

void add_gradcheck(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<GradcheckArgs>();
  CLI::App* sub = root.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  sub->add_option("--seeds", a->seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--first-seed", a->first_seed, "First seed")->capture_default_str();
  sub->add_option("--size", a->size, "Oracle image side length")->capture_default_str()->check(CLI::Range(2, 256));
  sub->add_option("--step", a->opts.step, "Central difference step")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--tolerance", a->opts.tolerance, "Largest accepted error")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--floor", a->opts.denominator_floor, "Relative error denominator floor")
      ->capture_default_str()->check(CLI::PositiveNumber);

  cmds.push_back({sub, [a](std::ostream& out, std::ostream&) {
                    out << "seed,loss,params,max_error,analytic,numeric,reduced_step,at_kink,passed\n";
                    double worst = 0.0;
                    bool ok = true;
                    for (std::size_t i = 0; i < a->seeds; ++i) {
                      const std::uint64_t seed = a->first_seed + i;
                      for (const auto& r : gradcheck_losses(seed, {a->size, a->size}, a->opts)) {
                        out << seed << ',' << r.name << ',' << r.n_params << ',' << fmt(r.max_error) << ','
                            << fmt(r.analytic_at_worst) << ',' << fmt(r.numeric_at_worst) << ',' << r.n_reduced_step
                            << ',' << r.n_at_kink << ',' << (r.passed ? "yes" : "no") << '\n';
                        worst = std::max(worst, r.max_error);
                        ok = ok && r.passed;
                      }
                    }
                    out << "max_error," << fmt(worst) << '\n' << (ok ? "PASS" : "FAIL") << '\n';
                    return ok ? kOk : kNumerical;
                  }});
}

}  // namespace reldepth::cli
