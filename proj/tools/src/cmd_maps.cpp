#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>

#include "cli.hpp"
#include "reldepth/error.hpp"
#include "reldepth/flow.hpp"
#include "reldepth/io.hpp"
#include "reldepth/manifest.hpp"

namespace reldepth::cli {

namespace fs = std::filesystem;

namespace {

bool has_ext(const std::string& path, const char* ext) { return fs::path(path).extension() == ext; }

// Writes to the file when a path is given, otherwise to out.
template <class F>
void with_csv(const std::string& path, std::ostream& out, F&& body) {
  if (path.empty()) {
    body(out);
    return;
  }
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw FormatError(path + ": cannot write");
  body(f);
}

std::optional<double> disparity_mae(const DepthMap& est, const DepthMap& gt) {
  require_same_size(est.size, gt.size, "disparity_mae");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < est.values.size(); ++i)
    if (est.valid[i] && gt.valid[i]) {
      sum += std::abs(est.values[i] - gt.values[i]);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct MaskArgs {
  std::string flow_ab, flow_ba, out, manifest, out_dir, csv;
  double epsilon = 2.0;
};

struct DisparityArgs {
  std::string flow_lr, flow_rl, out, gt, manifest, out_dir, csv;
  double epsilon = 2.0;
  double vertical_gate = 2.0;
};

struct WarpArgs {
  std::string flow, input, out, valid_out;
};

}  // namespace

void add_mask(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<MaskArgs>();
  CLI::App* sub = root.add_subcommand("mask", "Forward-backward correspondence masks from flow pairs");
  auto* ab = sub->add_option("--flow-ab", a->flow_ab, "Flow a->b (.flo)");
  auto* ba = sub->add_option("--flow-ba", a->flow_ba, "Flow b->a (.flo)");
  auto* out = sub->add_option("--out", a->out, "Mask PNG (0/255)");
  auto* man = sub->add_option("--manifest", a->manifest, "Compute masks for every flow pair in a manifest");
  auto* dir = sub->add_option("--out-dir", a->out_dir, "Output directory in manifest mode");
  sub->add_option("--csv", a->csv, "Summary CSV (default: stdout)");
  sub->add_option("--epsilon", a->epsilon, "Loop closure threshold, pixels")->capture_default_str()->check(CLI::PositiveNumber);
  ab->needs(ba, out)->excludes(man);
  man->needs(dir);
  dir->needs(man);

  cmds.push_back({sub, [a](std::ostream& out_s, std::ostream&) {
                    MaskConfig cfg;
                    cfg.epsilon_px = a->epsilon;
                    cfg.validate();
                    if (a->manifest.empty() && a->flow_ab.empty())
                      throw std::invalid_argument("mask: give --flow-ab/--flow-ba/--out or --manifest/--out-dir");
                    with_csv(a->csv, out_s, [&](std::ostream& csv) {
                      csv << "clip,from,to,pixels,valid_fraction\n";
                      auto one = [&](const std::string& clip, std::size_t i, std::size_t j, const fs::path& fab,
                                     const fs::path& fba, const fs::path& dst) {
                        const FlowField f_ab = read_flo(fab);
                        const FlowField f_ba = read_flo(fba);
                        const Mask m = correspondence_mask(f_ab, f_ba, cfg);
                        ensure_parent(dst);
                        write_mask_png(dst, m, f_ab.size);
                        csv << clip << ',' << i << ',' << j << ',' << m.size() << ',' << fmt(m.fraction()) << '\n';
                      };
                      if (a->manifest.empty()) {
                        one("-", 0, 1, a->flow_ab, a->flow_ba, a->out);
                        return;
                      }
                      const Manifest m = read_manifest(a->manifest);
                      for (const auto& c : m.clips)
                        for (const auto& fl : c.flows)
                          for (const auto& back : c.flows)
                            if (back.from == fl.to && back.to == fl.from) {
                              char name[96];
                              std::snprintf(name, sizeof name, "mask_%03zu_%03zu.png", fl.from, fl.to);
                              one(c.id, fl.from, fl.to, m.resolve(fl.path), m.resolve(back.path),
                                  fs::path(a->out_dir) / c.id / name);
                            }
                    });
                    return kOk;
                  }});
}

void add_disparity(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<DisparityArgs>();
  CLI::App* sub = root.add_subcommand("disparity", "Disparity pseudo ground truth from rectified stereo flow");
  auto* lr = sub->add_option("--flow-lr", a->flow_lr, "Flow left->right (.flo)");
  auto* rl = sub->add_option("--flow-rl", a->flow_rl, "Flow right->left (.flo)");
  auto* out = sub->add_option("--out", a->out, "Disparity PFM");
  sub->add_option("--gt", a->gt, "Reference disparity PFM for the MAE column");
  auto* man = sub->add_option("--manifest", a->manifest, "Process every stereo record of a manifest");
  auto* dir = sub->add_option("--out-dir", a->out_dir, "Output directory in manifest mode");
  sub->add_option("--csv", a->csv, "Summary CSV (default: stdout)");
  sub->add_option("--epsilon", a->epsilon, "Loop closure threshold, pixels")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--vertical-gate", a->vertical_gate, "Largest accepted |vertical flow|, pixels")
      ->capture_default_str()->check(CLI::PositiveNumber);
  lr->needs(rl, out)->excludes(man);
  man->needs(dir);
  dir->needs(man);

  cmds.push_back({sub, [a](std::ostream& out_s, std::ostream&) {
                    MaskConfig cfg;
                    cfg.epsilon_px = a->epsilon;
                    cfg.vertical_gate_px = a->vertical_gate;
                    cfg.validate();
                    if (a->manifest.empty() && a->flow_lr.empty())
                      throw std::invalid_argument("disparity: give --flow-lr/--flow-rl/--out or --manifest/--out-dir");
                    with_csv(a->csv, out_s, [&](std::ostream& csv) {
                      csv << "clip,index,pixels,masked_fraction,mae_px\n";
                      auto one = [&](const std::string& clip, std::size_t index, const fs::path& flr,
                                     const fs::path& frl, const fs::path& dst, const fs::path& gt) {
                        const DisparityResult r = disparity_from_rectified_flow(read_flo(flr), read_flo(frl), cfg);
                        ensure_parent(dst);
                        write_pfm(dst, r.disparity);
                        csv << clip << ',' << index << ',' << r.disparity.values.size() << ','
                            << fmt(r.masked_fraction) << ',';
                        if (!gt.empty())
                          if (const auto mae = disparity_mae(r.disparity, read_pfm(gt))) csv << fmt(*mae);
                        csv << '\n';
                      };
                      if (a->manifest.empty()) {
                        one("-", 0, a->flow_lr, a->flow_rl, a->out, a->gt);
                        return;
                      }
                      const Manifest m = read_manifest(a->manifest);
                      for (const auto& c : m.clips)
                        for (const auto& st : c.stereo) {
                          char name[64];
                          std::snprintf(name, sizeof name, "disparity_%03zu.pfm", st.index);
                          const auto& gt = c.frames[st.index].disparity;
                          one(c.id, st.index, m.resolve(st.flow_lr), m.resolve(st.flow_rl),
                              fs::path(a->out_dir) / c.id / name, gt.empty() ? fs::path() : m.resolve(gt));
                        }
                    });
                    return kOk;
                  }});
}

void add_warp(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<WarpArgs>();
  CLI::App* sub = root.add_subcommand("warp", "Resample an image (.png) or map (.pfm) along a flow field");
  sub->add_option("--flow", a->flow, "Flow from output frame to input frame (.flo)")->required();
  sub->add_option("--input", a->input, "Image (.png) or map (.pfm) in the flow's target frame")->required();
  sub->add_option("--out", a->out, "Warped output, same format as input")->required();
  sub->add_option("--valid-out", a->valid_out, "Validity mask PNG");

  cmds.push_back({sub, [a](std::ostream& out_s, std::ostream&) {
                    const FlowField flow = read_flo(a->flow);
                    Mask valid;
                    ensure_parent(a->out);
                    if (has_ext(a->input, ".pfm")) {
                      const DepthMap w = warp(flow, read_pfm(a->input));
                      write_pfm(a->out, w);
                      valid = w.valid;
                    } else if (has_ext(a->input, ".png")) {
                      const WarpedImage w = warp(flow, read_png(a->input));
                      write_png(a->out, w.image);
                      valid = w.valid;
                    } else {
                      throw FormatError(a->input + ": expected a .png or .pfm input");
                    }
                    if (!a->valid_out.empty()) {
                      ensure_parent(a->valid_out);
                      write_mask_png(a->valid_out, valid, flow.size);
                    }
                    out_s << "valid_fraction," << fmt(valid.fraction()) << '\n';
                    return kOk;
                  }});
}

}  // namespace reldepth::cli
