#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "reldepth/io.hpp"
#include "reldepth/manifest.hpp"
#include "reldepth/model.hpp"
#include "reldepth/synth.hpp"

using namespace reldepth;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

// Small dataset shared by several cases; rendered once.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = oracle::temp_dir("cli_data");
    const Result r = run({"synth", "--out", d.string(), "--train-clips", "2", "--val-clips", "1", "--test-clips", "1",
                          "--frames", "4", "--test-frames", "12", "--height", "12", "--width", "12", "--focal", "15",
                          "--seed", "3", "--stereo"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({}).code == cli::kInvalid);
  CHECK(run({"nonsense"}).code == cli::kInvalid);
  CHECK(run({"synth"}).code == cli::kInvalid);
  CHECK(run({"synth", "--out", "x", "--frames", "1"}).code == cli::kInvalid);
  const Result r = run({"eval-temporal", "--manifest", "/nonexistent/manifest.txt", "--oracle"});
  CHECK(r.code == cli::kInvalid);
  CHECK(r.err.find("/nonexistent/manifest.txt") != std::string::npos);
}

TEST_CASE("synth writes a readable manifest with every split") {
  const Manifest m = read_manifest(dataset() / "manifest.txt");
  CHECK(m.split(Split::train).size() == 2);
  CHECK(m.split(Split::val).size() == 1);
  REQUIRE(m.split(Split::test).size() == 1);
  const ClipRecord& test = *m.split(Split::test)[0];
  CHECK(test.frames.size() == 12);
  CHECK(test.stereo.size() == 12);
  CHECK(test.flows.size() == 12 * 11);
  const ClipSample clip = load_clip(m, test);
  CHECK(clip.has_disparity());
}

TEST_CASE("mask in manifest and single-pair mode") {
  const fs::path out = oracle::temp_dir("cli_mask");
  Result r = run({"mask", "--manifest", (dataset() / "manifest.txt").string(), "--out-dir", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  CHECK(rows[0] == "clip,from,to,pixels,valid_fraction");
  CHECK(rows.size() > 10);

  const Manifest m = read_manifest(dataset() / "manifest.txt");
  const ClipRecord& c = *m.split(Split::train)[0];
  r = run({"mask", "--flow-ab", m.resolve(c.flows[0].path).string(), "--flow-ba",
           m.resolve(c.flows[1].path).string(), "--out", (out / "one.png").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  Size2 size;
  const Mask mask = read_mask_png(out / "one.png", &size);
  CHECK(size == Size2{12, 12});
  CHECK(mask.count() > 0);
  CHECK(run({"mask", "--flow-ab", "a.flo"}).code == cli::kInvalid);
}

TEST_CASE("disparity of a wide oracle pair masks at most 1% of pixels") {
  const fs::path dir = oracle::temp_dir("cli_disp");
  const Size2 size{8, 512};
  const Scene plane = Scene::plane(2.0);
  const StereoPair sp = stereo_pair(plane, Camera::centered(100.0, size), 0.1, size);
  write_flo(dir / "lr.flo", analytic_flow(plane, sp.left_camera, sp.right_camera, size).flow);
  write_flo(dir / "rl.flo", analytic_flow(plane, sp.right_camera, sp.left_camera, size).flow);
  write_pfm(dir / "gt.pfm", sp.disparity);
  const Result r = run({"disparity", "--flow-lr", (dir / "lr.flo").string(), "--flow-rl", (dir / "rl.flo").string(),
                        "--out", (dir / "d.pfm").string(), "--gt", (dir / "gt.pfm").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "clip,index,pixels,masked_fraction,mae_px");
  std::vector<std::string> cols;
  std::stringstream ss(rows[1]);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  REQUIRE(cols.size() == 5);
  CHECK(std::stod(cols[3]) <= 0.01);
  CHECK(std::stod(cols[4]) < 1e-5);
  const DepthMap d = read_pfm(dir / "d.pfm");
  CHECK(d.at(4, 256) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("disparity over manifest stereo records") {
  const fs::path out = oracle::temp_dir("cli_disp_manifest");
  const Result r = run({"disparity", "--manifest", (dataset() / "manifest.txt").string(), "--out-dir", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(lines(r.out).size() >= 2);
}

TEST_CASE("warp resamples PNG and PFM inputs") {
  const fs::path dir = oracle::temp_dir("cli_warp");
  const Size2 size{6, 6};
  write_flo(dir / "f.flo", FlowField(size, 1.0, 0.0));
  DepthMap d(size);
  for (std::size_t i = 0; i < 36; ++i) d.values[i] = static_cast<double>(i);
  write_pfm(dir / "d.pfm", d);
  Result r = run({"warp", "--flow", (dir / "f.flo").string(), "--input", (dir / "d.pfm").string(), "--out",
                  (dir / "w.pfm").string(), "--valid-out", (dir / "v.png").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const DepthMap w = read_pfm(dir / "w.pfm");
  CHECK(w.at(2, 3) == d.at(2, 4));
  CHECK_FALSE(w.is_valid(2, 5));
  CHECK(read_mask_png(dir / "v.png").count() == 30);

  write_png(dir / "i.png", Image(3, size, 0.5));
  r = run({"warp", "--flow", (dir / "f.flo").string(), "--input", (dir / "i.png").string(), "--out",
           (dir / "w.png").string()});
  CHECK(r.code == 0);
  CHECK(run({"warp", "--flow", (dir / "f.flo").string(), "--input", (dir / "i.bmp").string(), "--out",
             (dir / "w.bmp").string()})
            .code == cli::kInvalid);
}

TEST_CASE("train, evaluate and reproduce") {
  const fs::path dir = oracle::temp_dir("cli_train");
  const std::string manifest = (dataset() / "manifest.txt").string();
  std::ofstream(dir / "cfg.txt") << "batch_size = 2\nbatches_per_epoch = 2\nmax_epochs = 2\nenabled_losses = sup,temp\n";
  const std::vector<std::string> args{"train", "--manifest", manifest, "--config", (dir / "cfg.txt").string(),
                                      "--out", (dir / "m.ckpt").string(), "--log", (dir / "log.csv").string(),
                                      "--seed", "5"};
  Result r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("epoch 1 val_ssimae", 0) == 0);
  const auto log = lines(slurp(dir / "log.csv"));
  CHECK(log[0] == "kind,step,epoch,loss,value,grad_norm,skipped");
  CHECK(log.size() == 1 + 2 * 2 * 2 + 2 + 1);
  CHECK(log.back().rfind("best,,", 0) == 0);
  const std::string ckpt = slurp(dir / "m.ckpt");
  CHECK_NOTHROW(load_checkpoint(dir / "m.ckpt"));

  r = run({"eval-ssimae", "--manifest", manifest, "--checkpoint", (dir / "m.ckpt").string(), "--split", "test"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(lines(r.out)[0] == "id,pixels,ssimae");
  CHECK(lines(r.out).back().rfind("mean,", 0) == 0);

  r = run({"eval-temporal", "--manifest", manifest, "--checkpoint", (dir / "m.ckpt").string(), "--split", "test"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(lines(r.out)[0] == "clip,start,frames,tracked,inconsistency");

  r = run({"eval-temporal", "--manifest", manifest, "--oracle", "--split", "test"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string all = lines(r.out).back();
  CHECK(all.rfind("all,", 0) == 0);
  CHECK(std::stod(all.substr(all.rfind(',') + 1)) < 1e-9);

  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "m.ckpt") == ckpt);

  r = run({"train", "--manifest", manifest, "--out", (dir / "f.ckpt").string(), "--init", (dir / "m.ckpt").string(),
           "--max-epochs", "1", "--batches-per-epoch", "1", "--batch-size", "1", "--quiet"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  REQUIRE(lines(r.out).size() == 1);
  CHECK(lines(r.out)[0].rfind("best_epoch 1 ", 0) == 0);
  const ModelPair fine = load_checkpoint(dir / "f.ckpt");
  CHECK(fine.fast.flat_parameters() != load_checkpoint(dir / "m.ckpt").fast.flat_parameters());
}

TEST_CASE("eval-ssimae on explicit file lists") {
  const fs::path dir = oracle::temp_dir("cli_ssimae");
  DepthMap gt({4, 4});
  for (std::size_t i = 0; i < 16; ++i) gt.values[i] = 1.0 + 0.1 * static_cast<double>(i);
  DepthMap pred = gt;
  for (double& v : pred.values) v = 3.0 * v - 1.0;
  write_pfm(dir / "gt.pfm", gt);
  write_pfm(dir / "pred.pfm", pred);
  Result r = run({"eval-ssimae", "--pred", (dir / "pred.pfm").string(), "--gt", (dir / "gt.pfm").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string mean = lines(r.out).back();
  CHECK(std::stod(mean.substr(mean.rfind(',') + 1)) < 1e-6);

  write_pfm(dir / "flat.pfm", DepthMap({4, 4}, 2.0));
  r = run({"eval-ssimae", "--pred", (dir / "pred.pfm").string(), "--gt", (dir / "flat.pfm").string()});
  CHECK(r.code == cli::kNumerical);
  r = run({"eval-ssimae", "--pred", (dir / "pred.pfm").string(), "--gt", (dir / "gt.pfm").string(),
           (dir / "gt.pfm").string()});
  CHECK(r.code == cli::kInvalid);
}

TEST_CASE("gradcheck subcommand") {
  const Result r = run({"gradcheck", "--seeds", "1", "--size", "4"});
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(lines(r.out).back() == "PASS");
}
