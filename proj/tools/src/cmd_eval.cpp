#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>

#include "cli.hpp"
#include "reldepth/align.hpp"
#include "reldepth/error.hpp"
#include "reldepth/io.hpp"
#include "reldepth/manifest.hpp"
#include "reldepth/model.hpp"
#include "reldepth/temporal_eval.hpp"

namespace reldepth::cli {

namespace fs = std::filesystem;

namespace {

struct SsimaeArgs {
  std::vector<std::string> pred, gt;
  std::string manifest, checkpoint, split = "test", out;
};

struct TemporalArgs {
  std::string manifest, checkpoint, split = "test", out;
  bool oracle = false;
  std::size_t min_frames = 10;
  double min_tracked = 0.5;
  double epsilon = 2.0;
};

Split parse_split_or_throw(const std::string& s) {
  const auto split = parse_split(s);
  if (!split) throw std::invalid_argument("unknown split '" + s + "' (train, val, test)");
  return *split;
}

template <class F>
void with_output(const std::string& path, std::ostream& out, F&& body) {
  if (path.empty()) {
    body(out);
    return;
  }
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw FormatError(path + ": cannot write");
  body(f);
}

}  // namespace

void add_eval_ssimae(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<SsimaeArgs>();
  CLI::App* sub = root.add_subcommand("eval-ssimae", "Per-image and mean scale-and-shift-invariant MAE");
  auto* pred = sub->add_option("--pred", a->pred, "Predicted maps (.pfm)");
  auto* gt = sub->add_option("--gt", a->gt, "Ground-truth maps (.pfm), one per prediction");
  auto* man = sub->add_option("--manifest", a->manifest, "Evaluate a checkpoint on a manifest split");
  auto* ck = sub->add_option("--checkpoint", a->checkpoint, "Model checkpoint");
  sub->add_option("--split", a->split, "Manifest split")->capture_default_str();
  sub->add_option("--out", a->out, "CSV path (default: stdout)");
  pred->needs(gt)->excludes(man);
  gt->needs(pred);
  man->needs(ck);
  ck->needs(man);

  cmds.push_back({sub, [a](std::ostream& out_s, std::ostream&) {
                    struct Row {
                      std::string id;
                      std::size_t pixels;
                      double value;
                    };
                    std::vector<Row> rows;
                    if (!a->pred.empty()) {
                      if (a->pred.size() != a->gt.size())
                        throw std::invalid_argument("eval-ssimae: --pred and --gt counts differ");
                      for (std::size_t i = 0; i < a->pred.size(); ++i) {
                        const DepthMap p = read_pfm(a->pred[i]);
                        const DepthMap g = read_pfm(a->gt[i]);
                        require_same_size(p.size, g.size, "eval-ssimae");
                        const Mask m = p.valid & g.valid;
                        rows.push_back({a->pred[i], m.count(), ssimae(p, g, &m)});
                      }
                    } else if (!a->manifest.empty()) {
                      const Manifest m = read_manifest(a->manifest);
                      const DepthNet net = load_checkpoint(a->checkpoint).fast;
                      for (const ClipRecord* c : m.split(parse_split_or_throw(a->split)))
                        for (const auto& f : c->frames) {
                          if (f.disparity.empty()) continue;
                          const DepthMap g = read_pfm(m.resolve(f.disparity));
                          rows.push_back({f.image, g.valid.count(), ssimae(net.predict(read_png(m.resolve(f.image))), g)});
                        }
                    } else {
                      throw std::invalid_argument("eval-ssimae: give --pred/--gt or --manifest/--checkpoint");
                    }
                    if (rows.empty()) throw std::invalid_argument("eval-ssimae: nothing to evaluate");
                    double total = 0.0;
                    std::size_t pixels = 0;
                    for (const auto& r : rows) {
                      total += r.value;
                      pixels += r.pixels;
                    }
                    with_output(a->out, out_s, [&](std::ostream& csv) {
                      csv << "id,pixels,ssimae\n";
                      for (const auto& r : rows) csv << r.id << ',' << r.pixels << ',' << fmt(r.value) << '\n';
                      csv << "mean," << pixels << ',' << fmt(total / static_cast<double>(rows.size())) << '\n';
                    });
                    return kOk;
                  }});
}

void add_eval_temporal(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<TemporalArgs>();
  CLI::App* sub = root.add_subcommand("eval-temporal", "Temporal inconsistency along tracked clip sections");
  sub->add_option("--manifest", a->manifest, "Dataset manifest")->required();
  auto* ck = sub->add_option("--checkpoint", a->checkpoint, "Model checkpoint");
  auto* oracle = sub->add_flag("--oracle", a->oracle, "Use ground-truth disparity as the prediction");
  sub->add_option("--split", a->split, "Manifest split")->capture_default_str();
  sub->add_option("--out", a->out, "CSV path (default: stdout)");
  sub->add_option("--min-frames", a->min_frames, "Shortest tracked section")->capture_default_str()->check(CLI::Range(2, 1000000));
  sub->add_option("--min-tracked", a->min_tracked, "Tracked start-pixel fraction to keep a section going")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--epsilon", a->epsilon, "Loop closure threshold, pixels")->capture_default_str()->check(CLI::PositiveNumber);
  ck->excludes(oracle);

  cmds.push_back({sub, [a](std::ostream& out_s, std::ostream&) {
                    if (a->checkpoint.empty() && !a->oracle)
                      throw std::invalid_argument("eval-temporal: give --checkpoint or --oracle");
                    TrackConfig cfg;
                    cfg.mask.epsilon_px = a->epsilon;
                    cfg.min_frames = a->min_frames;
                    cfg.min_tracked_fraction = a->min_tracked;
                    cfg.validate();
                    const Manifest m = read_manifest(a->manifest);
                    std::vector<ClipSample> clips;
                    for (const ClipRecord* c : m.split(parse_split_or_throw(a->split))) {
                      clips.push_back(load_clip(m, *c));
                      if (!clips.back().has_disparity())
                        throw std::invalid_argument("eval-temporal: clip " + c->id + " lacks per-frame disparity");
                    }
                    if (clips.empty()) throw std::invalid_argument("eval-temporal: split has no clips");

                    DepthPredictor predictor;
                    std::optional<DepthNet> net;
                    if (a->oracle) {
                      predictor = [](const ClipSample& c, std::size_t k) { return c.disparity[k]; };
                    } else {
                      net = load_checkpoint(a->checkpoint).fast;
                      predictor = [&net](const ClipSample& c, std::size_t k) { return net->predict(c.frames[k]); };
                    }
                    const TemporalReport rep = evaluate_temporal(clips, predictor, cfg);
                    if (rep.n_tracked == 0) throw DegenerateError("eval-temporal: no tracked pixels in any clip");
                    with_output(a->out, out_s, [&](std::ostream& csv) {
                      csv << "clip,start,frames,tracked,inconsistency\n";
                      for (const auto& s : rep.sections)
                        csv << s.clip_id << ',' << s.start << ',' << s.n_frames << ',' << s.n_tracked << ','
                            << fmt(s.inconsistency) << '\n';
                      csv << "all,,," << rep.n_tracked << ',' << fmt(rep.inconsistency) << '\n';
                    });
                    return kOk;
                  }});
}

}  // namespace reldepth::cli
