#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "reldepth/error.hpp"
#include "reldepth/tensor.hpp"

using namespace reldepth;

namespace {

std::vector<double> randu(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<double> grad_of(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("elementwise ops compute values and broadcast scalars") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({2, 2}, {4, 3, 2, 1});
  const Tensor s = Tensor::scalar(2.0);
  CHECK((a + b)[3] == 5.0);
  CHECK((a - b)[0] == -3.0);
  CHECK((a * b)[1] == 6.0);
  CHECK((a / b)[2] == 1.5);
  CHECK((a * s)[3] == 8.0);
  CHECK((s - a)[0] == 1.0);
  CHECK(abs(Tensor::from({3}, {-2, 0, 3}))[0] == 2.0);
  CHECK(relu(Tensor::from({3}, {-2, 0, 3}))[2] == 3.0);
  CHECK(relu(Tensor::from({3}, {-2, 0, 3}))[0] == 0.0);
}

TEST_CASE("mismatched shapes throw ShapeError") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(a + b, ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(reshape(a, {4}), ShapeError);
  CHECK_THROWS_AS(a.item(), ShapeError);
}

TEST_CASE("masked reductions skip masked elements") {
  const Tensor a = Tensor::from({4}, {1, 2, 3, 10});
  const Mask m({4}, std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(sum(a, &m).item() == 6.0);
  CHECK(mean(a, &m).item() == 2.0);
  CHECK(mean(a).item() == 4.0);
  const Mask none({4}, false);
  CHECK_THROWS_AS(mean(a, &none), DegenerateError);
}

TEST_CASE("backward matches finite differences on a composite expression") {
  const std::vector<double> x0 = randu(6, 1, 0.5, 2.0);
  const std::vector<double> y0 = randu(6, 2, 0.5, 2.0);
  const Mask m({6}, std::vector<std::uint8_t>{1, 0, 1, 1, 1, 0});
  auto expr = [&](const Tensor& x, const Tensor& y) {
    return mean(abs((x * y - relu(x - 1.0)) / (y + 0.5)) * 3.0 + x, &m);
  };
  Tensor x = Tensor::from({6}, x0, true), y = Tensor::from({6}, y0, true);
  backward(expr(x, y));
  auto fx = [&](const std::vector<double>& v) { return expr(Tensor::from({6}, v), Tensor::from({6}, y0)).item(); };
  auto fy = [&](const std::vector<double>& v) { return expr(Tensor::from({6}, x0), Tensor::from({6}, v)).item(); };
  check_close(grad_of(x), oracle::numeric_gradient(fx, x0, 1e-6), 1e-6);
  check_close(grad_of(y), oracle::numeric_gradient(fy, y0, 1e-6), 1e-6);
}

TEST_CASE("gradients accumulate across backward calls and reset with zero_grad") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  backward(sum(x * 3.0));
  backward(sum(x * 3.0));
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("reused subexpressions sum their gradient contributions") {
  Tensor x = Tensor::from({1}, {3.0}, true);
  const Tensor y = x * x;
  backward(sum(y + y * x));
  CHECK(x.grad()[0] == doctest::Approx(2 * 3.0 + 3 * 9.0));
}

TEST_CASE("NoGradGuard records no history") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_mode_enabled());
    y = x * 2.0;
  }
  CHECK(grad_mode_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("leaf-only mutation and detach") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y = x * 2.0;
  CHECK_THROWS_AS(y.mutable_data(), std::logic_error);
  CHECK_THROWS_AS(y.set_requires_grad(false), std::logic_error);
  Tensor d = y.detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(d[1] == 4.0);
  x.mutable_data()[0] = 5.0;
  CHECK(x[0] == 5.0);
}

TEST_CASE("conv2d forward matches a direct-loop oracle") {
  for (std::size_t k : {1u, 3u, 5u}) {
    const std::size_t c = 3, o = 4, h = 7, w = 9;
    const auto in = randu(c * h * w, 10 + k), wt = randu(o * c * k * k, 20 + k), b = randu(o, 30 + k);
    const Tensor out = conv2d(Tensor::from({c, h, w}, in), Tensor::from({o, c, k, k}, wt), Tensor::from({o}, b));
    CHECK(out.shape() == Shape{o, h, w});
    const auto ref = oracle::conv2d(in, c, h, w, wt, o, k, b);
    std::vector<double> got(out.data().begin(), out.data().end());
    check_close(got, ref, 1e-12);
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  const std::size_t c = 2, o = 3, k = 3, h = 5, w = 4;
  const auto in = randu(c * h * w, 1), wt = randu(o * c * k * k, 2), b = randu(o, 3), probe = randu(o * h * w, 4);
  auto loss = [&](const Tensor& i, const Tensor& ww, const Tensor& bb) {
    return sum(conv2d(i, ww, bb) * Tensor::from({o, h, w}, probe));
  };
  Tensor ti = Tensor::from({c, h, w}, in, true), tw = Tensor::from({o, c, k, k}, wt, true),
         tb = Tensor::from({o}, b, true);
  backward(loss(ti, tw, tb));
  auto f_in = [&](const std::vector<double>& v) {
    return loss(Tensor::from({c, h, w}, v), Tensor::from({o, c, k, k}, wt), Tensor::from({o}, b)).item();
  };
  auto f_w = [&](const std::vector<double>& v) {
    return loss(Tensor::from({c, h, w}, in), Tensor::from({o, c, k, k}, v), Tensor::from({o}, b)).item();
  };
  auto f_b = [&](const std::vector<double>& v) {
    return loss(Tensor::from({c, h, w}, in), Tensor::from({o, c, k, k}, wt), Tensor::from({o}, v)).item();
  };
  check_close(grad_of(ti), oracle::numeric_gradient(f_in, in, 1e-6), 1e-7);
  check_close(grad_of(tw), oracle::numeric_gradient(f_w, wt, 1e-6), 1e-7);
  check_close(grad_of(tb), oracle::numeric_gradient(f_b, b, 1e-6), 1e-7);
}

TEST_CASE("conv2d rejects malformed operands") {
  const Tensor in = Tensor::zeros({2, 4, 4});
  CHECK_THROWS_AS(conv2d(in, Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(in, Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(in, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({4, 4}), Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1})), ShapeError);
}

TEST_CASE("tape orders parents before children") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  const Tensor y = relu(x * 2.0);
  const Tensor l = sum(y);
  const Tape tape = Tape::record(l);
  REQUIRE(tape.nodes().size() >= 3);
  CHECK(tape.nodes().front() == x.node());
  CHECK(tape.nodes().back() == l.node());
}

TEST_CASE("KinkRecorder captures relu and abs branches") {
  const Tensor a = Tensor::from({3}, {-1.0, 0.0, 2.0});
  std::vector<std::uint8_t> at_zero, shifted;
  {
    KinkRecorder rec;
    CHECK(active_kink_recorder() == &rec);
    relu(a);
    abs(a);
    at_zero = rec.pattern();
  }
  CHECK(active_kink_recorder() == nullptr);
  CHECK(at_zero.size() == 6);
  {
    KinkRecorder rec;
    relu(a + 1e-9);
    abs(a + 1e-9);
    shifted = rec.pattern();
  }
  CHECK(at_zero != shifted);
}
