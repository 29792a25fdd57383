#include <CLI11.hpp>

#include <cstdio>
#include <ostream>

#include "cli.hpp"
#include "reldepth/io.hpp"
#include "reldepth/losses.hpp"
#include "reldepth/manifest.hpp"
#include "reldepth/synth.hpp"

namespace reldepth::cli {

namespace fs = std::filesystem;

namespace {

struct SynthArgs {
  std::string out;
  std::size_t train_clips = 20;
  std::size_t val_clips = 4;
  std::size_t test_clips = 5;
  std::size_t frames = 12;
  std::size_t test_frames = 16;
  std::size_t height = 32;
  std::size_t width = 32;
  double focal = 40.0;
  double fps = 30.0;
  std::uint64_t seed = 0;
  double pixel_noise = 0.02;
  double brightness_jitter = 0.0;
  double headlight = 0.8;
  double texture_contrast = 0.5;
  std::size_t label_every = 1;
  bool stereo = false;
  double max_pair_dt = kMaxPairDt;
};

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

std::string pair_name(std::size_t a, std::size_t b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "flow_%03zu_%03zu.flo", a, b);
  return buf;
}

ClipRecord write_clip(const SynthArgs& a, const fs::path& root, const std::string& id, Split split,
                      std::uint64_t clip_seed, std::size_t frames) {
  RandomClipOptions o;
  o.size = {a.height, a.width};
  o.focal_px = a.focal;
  o.frames = frames;
  o.fps = a.fps;
  o.headlight = a.headlight;
  o.texture_contrast = a.texture_contrast;
  o.trajectory.pixel_noise = a.pixel_noise;
  o.trajectory.brightness_jitter = a.brightness_jitter;
  const ClipSample clip = random_clip(clip_seed, o);

  fs::create_directories(root / id);
  ClipRecord rec;
  rec.id = id;
  rec.split = split;
  rec.size = o.size;
  for (std::size_t k = 0; k < clip.size(); ++k) {
    FrameRecord f;
    f.index = k;
    f.timestamp = clip.timestamps[k];
    f.image = id + "/" + indexed("frame", k, ".png");
    write_png(root / f.image, clip.frames[k]);
    const bool labeled = split != Split::train || k % a.label_every == 0;
    if (labeled) {
      f.disparity = id + "/" + indexed("disp", k, ".pfm");
      write_pfm(root / f.disparity, clip.disparity[k]);
    }
    rec.frames.push_back(std::move(f));
  }
  // Test clips get every ordered pair so long-range tracking is possible;
  // other splits only the pairs usable by the temporal loss.
  for (std::size_t i = 0; i < clip.size(); ++i)
    for (std::size_t j = 0; j < clip.size(); ++j) {
      if (i == j) continue;
      if (split != Split::test && std::abs(clip.timestamps[j] - clip.timestamps[i]) > a.max_pair_dt + 1e-9)
        continue;
      FlowRecord fl{i, j, id + "/" + pair_name(i, j)};
      write_flo(root / fl.path, clip.flow(i, j));
      rec.flows.push_back(std::move(fl));
    }
  if (a.stereo) {
    const auto* src = dynamic_cast<const AnalyticFlowSource*>(clip.flows.get());
    for (std::size_t k = 0; k < clip.size(); ++k) {
      const StereoPair sp = stereo_pair(src->scene(), src->poses()[k].camera, 0.1, o.size);
      StereoRecord st;
      st.index = k;
      st.right_image = id + "/" + indexed("right", k, ".png");
      st.flow_lr = id + "/" + indexed("stereo_lr", k, ".flo");
      st.flow_rl = id + "/" + indexed("stereo_rl", k, ".flo");
      write_png(root / st.right_image, sp.right.image);
      write_flo(root / st.flow_lr, analytic_flow(src->scene(), sp.left_camera, sp.right_camera, o.size).flow);
      write_flo(root / st.flow_rl, analytic_flow(src->scene(), sp.right_camera, sp.left_camera, o.size).flow);
      rec.stereo.push_back(std::move(st));
    }
  }
  return rec;
}

}  // namespace

void add_synth(CLI::App& root, std::vector<Command>& cmds) {
  auto a = std::make_shared<SynthArgs>();
  CLI::App* sub = root.add_subcommand("synth", "Render a synthetic dataset with exact disparity and flow");
  sub->add_option("--out", a->out, "Dataset directory")->required();
  sub->add_option("--train-clips", a->train_clips, "Training clips")->capture_default_str();
  sub->add_option("--val-clips", a->val_clips, "Validation clips")->capture_default_str();
  sub->add_option("--test-clips", a->test_clips, "Test clips")->capture_default_str();
  sub->add_option("--frames", a->frames, "Frames per train/val clip")->capture_default_str()->check(CLI::Range(2, 10000));
  sub->add_option("--test-frames", a->test_frames, "Frames per test clip")->capture_default_str()->check(CLI::Range(2, 10000));
  sub->add_option("--height", a->height, "Image height")->capture_default_str()->check(CLI::Range(2, 4096));
  sub->add_option("--width", a->width, "Image width")->capture_default_str()->check(CLI::Range(2, 4096));
  sub->add_option("--focal", a->focal, "Focal length in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--fps", a->fps, "Frame rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", a->seed, "Base seed")->capture_default_str();
  sub->add_option("--pixel-noise", a->pixel_noise, "Per-pixel noise std")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--brightness-jitter", a->brightness_jitter, "Per-frame gain std")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--headlight", a->headlight, "Share of camera-mounted light")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--texture-contrast", a->texture_contrast, "Albedo contrast")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--label-every", a->label_every, "Keep disparity on every n-th training frame")
      ->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_flag("--stereo", a->stereo, "Also write right views and stereo flows");
  sub->add_option("--max-pair-dt", a->max_pair_dt, "Longest frame gap with stored flow (train/val)")
      ->capture_default_str()->check(CLI::PositiveNumber);

  cmds.push_back({sub, [a](std::ostream& out, std::ostream&) {
                    const fs::path root(a->out);
                    fs::create_directories(root);
                    Manifest m;
                    m.root = root;
                    std::uint64_t k = 0;
                    auto emit = [&](const char* prefix, Split split, std::size_t n, std::size_t frames) {
                      for (std::size_t i = 0; i < n; ++i, ++k) {
                        char id[64];
                        std::snprintf(id, sizeof id, "%s%03zu", prefix, i);
                        m.clips.push_back(write_clip(*a, root, id, split, a->seed * 1000003ULL + k, frames));
                      }
                    };
                    emit("train", Split::train, a->train_clips, a->frames);
                    emit("val", Split::val, a->val_clips, a->frames);
                    emit("test", Split::test, a->test_clips, a->test_frames);
                    write_manifest(root / "manifest.txt", m);
                    out << "wrote " << m.clips.size() << " clips to " << (root / "manifest.txt").string() << '\n';
                    return kOk;
                  }});
}

}  // namespace reldepth::cli
