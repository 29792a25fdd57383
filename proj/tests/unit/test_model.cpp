#include <cmath>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "reldepth/error.hpp"
#include "reldepth/model.hpp"

using namespace reldepth;

namespace {

Image test_image(Size2 size) {
  Image im(3, size);
  for (std::size_t i = 0; i < im.data().size(); ++i) im.data()[i] = 0.5 + 0.4 * std::sin(0.37 * static_cast<double>(i));
  return im;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("toy network has the expected layout") {
  const DepthNet net(1);
  CHECK(net.parameters().size() == 8);
  CHECK(net.parameter_count() == 3 * 16 * 9 + 16 + 2 * (16 * 16 * 9 + 16) + 16 * 9 + 1);
  CHECK(DepthNet::parameter_shapes()[6] == Shape{1, 16, 3, 3});
  for (const Tensor& p : net.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("forward equals the direct-loop conv stack") {
  const Size2 size{5, 6};
  const DepthNet net(2, 1.0);
  const Image im = test_image(size);
  std::vector<double> x = im.data();
  std::size_t channels = 3;
  for (std::size_t l = 0; l < DepthNet::kLayers; ++l) {
    const Tensor& w = net.parameters()[2 * l];
    x = oracle::conv2d(x, channels, size.height, size.width, values(w), w.shape()[0], 3,
                       values(net.parameters()[2 * l + 1]));
    channels = w.shape()[0];
    if (l + 1 < DepthNet::kLayers)
      for (double& v : x) v = std::max(v, 0.0);
  }
  const Tensor out = net.forward(im);
  CHECK(out.shape() == Shape{5, 6});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-12));
  const DepthMap d = net.predict(im);
  CHECK(d.valid.count() == size.area());
  CHECK(d.values[7] == out[7]);
}

TEST_CASE("init is seeded; final layer gain scales the last layer") {
  const DepthNet a(3), b(3), c(4), wide(3, 1.0);
  CHECK(a.flat_parameters() == b.flat_parameters());
  CHECK(a.flat_parameters() != c.flat_parameters());
  const double small = values(a.parameters()[6])[0], big = values(wide.parameters()[6])[0];
  CHECK(small == doctest::Approx(0.01 * big));
  CHECK(values(a.parameters()[0]) == values(wide.parameters()[0]));
}

TEST_CASE("copies are deep") {
  DepthNet a(5);
  DepthNet b = a;
  b.parameters()[0].mutable_data()[0] += 1.0;
  CHECK(a.parameters()[0][0] != b.parameters()[0][0]);
  const DepthNet c = a.clone(false);
  CHECK_FALSE(c.parameters()[2].requires_grad());
  CHECK(c.flat_parameters() == a.flat_parameters());
}

TEST_CASE("flat parameter round trip and size check") {
  DepthNet a(6);
  auto flat = a.flat_parameters();
  for (double& v : flat) v *= -2.0;
  a.set_flat_parameters(flat);
  CHECK(a.flat_parameters() == flat);
  flat.pop_back();
  CHECK_THROWS_AS(a.set_flat_parameters(flat), ShapeError);
}

TEST_CASE("non-RGB input is rejected") {
  CHECK_THROWS_AS(DepthNet(1).forward(Image(1, {4, 4})), ShapeError);
}

TEST_CASE("EMA update follows the decay formula") {
  ModelPair pair = ModelPair::create(7, 0.9);
  CHECK(pair.slow.flat_parameters() == pair.fast.flat_parameters());
  CHECK_FALSE(pair.slow.parameters()[0].requires_grad());
  auto f = pair.fast.flat_parameters();
  const auto s0 = pair.slow.flat_parameters();
  for (double& v : f) v += 1.0;
  pair.fast.set_flat_parameters(f);
  pair.ema_update();
  const auto s1 = pair.slow.flat_parameters();
  for (std::size_t i = 0; i < s1.size(); i += 97) CHECK(s1[i] == doctest::Approx(0.9 * s0[i] + 0.1 * f[i]));
  pair.sync_slow();
  CHECK(pair.slow.flat_parameters() == f);
  CHECK_THROWS_AS(ModelPair::create(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModelPair::create(1, -0.1), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto dir = oracle::temp_dir("ckpt");
  ModelPair pair = ModelPair::create(8, 0.95);
  auto f = pair.fast.flat_parameters();
  f[0] = 1.0 / 3.0;
  pair.fast.set_flat_parameters(f);
  save_checkpoint(dir / "m.ckpt", pair);
  const ModelPair back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.fast.flat_parameters() == pair.fast.flat_parameters());
  CHECK(back.slow.flat_parameters() == pair.slow.flat_parameters());
  CHECK(back.ema_decay == 0.95);
}

TEST_CASE("corrupt checkpoints raise FormatError") {
  const auto dir = oracle::temp_dir("ckpt_bad");
  save_checkpoint(dir / "m.ckpt", ModelPair::create(9));
  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return dir / name;
  };
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(write("magic.ckpt", bad_magic)), FormatError);
  std::string bad_hash = bytes;
  bad_hash[12] ^= 0x55;
  CHECK_THROWS_AS(load_checkpoint(write("hash.ckpt", bad_hash)), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 8))), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write("long.ckpt", bytes + "x")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write("head.ckpt", bytes.substr(0, 10))), FormatError);
}
