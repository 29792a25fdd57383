#include "reldepth/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>

#include "reldepth/error.hpp"

namespace reldepth {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

thread_local bool g_grad_enabled = true;
thread_local KinkRecorder* g_kink_recorder = nullptr;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

void ensure_grad(TensorNode& n) {
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
}

}  // namespace

struct TensorAccess {
  static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }
  static const std::shared_ptr<TensorNode>& ptr(const Tensor& t) { return t.node_; }
};

namespace {

const std::shared_ptr<TensorNode>& node_of(const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("undefined tensor");
  return TensorAccess::ptr(t);
}

// Creates the output node of an operation. History is kept only if some
// parent requires grad and recording is enabled.
std::shared_ptr<TensorNode> make_output(
    Shape shape, std::vector<double> data,
    std::initializer_list<std::shared_ptr<TensorNode>> parents) {
  auto out = std::make_shared<TensorNode>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p->requires_grad) {
        out->requires_grad = true;
        break;
      }
    }
    if (out->requires_grad) out->parents.assign(parents.begin(), parents.end());
  }
  return out;
}

enum class Broadcast { same, a_scalar, b_scalar };

Broadcast check_broadcast(const TensorNode& a, const TensorNode& b, const char* op) {
  if (a.shape == b.shape) return Broadcast::same;
  if (b.data.size() == 1) return Broadcast::b_scalar;
  if (a.data.size() == 1) return Broadcast::a_scalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                   " vs " + shape_str(b.shape));
}

// Shared driver for binary elementwise ops with scalar broadcast.
// fwd(x, y) -> value; da(x, y) and db(x, y) are the local partials.
template <class Fwd, class Da, class Db>
Tensor binary(const Tensor& ta, const Tensor& tb, const char* name, Fwd fwd, Da da,
              Db db) {
  const auto& a = node_of(ta);
  const auto& b = node_of(tb);
  const Broadcast bc = check_broadcast(*a, *b, name);
  const Shape& shape = bc == Broadcast::a_scalar ? b->shape : a->shape;
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a->data[bc == Broadcast::a_scalar ? 0 : i];
    const double y = b->data[bc == Broadcast::b_scalar ? 0 : i];
    out[i] = fwd(x, y);
  }
  auto node = make_output(shape, std::move(out), {a, b});
  if (node->requires_grad) {
    node->backward_fn = [bc, da, db](TensorNode& self) {
      TensorNode& pa = *self.parents[0];
      TensorNode& pb = *self.parents[1];
      const std::size_t n = self.data.size();
      if (pa.requires_grad) ensure_grad(pa);
      if (pb.requires_grad) ensure_grad(pb);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ia = bc == Broadcast::a_scalar ? 0 : i;
        const std::size_t ib = bc == Broadcast::b_scalar ? 0 : i;
        const double g = self.grad[i];
        if (pa.requires_grad) pa.grad[ia] += g * da(pa.data[ia], pb.data[ib]);
        if (pb.requires_grad) pb.grad[ib] += g * db(pa.data[ia], pb.data[ib]);
      }
    };
  }
  return TensorAccess::wrap(std::move(node));
}

template <class Fwd, class D>
Tensor unary(const Tensor& ta, Fwd fwd, D d) {
  const auto& a = node_of(ta);
  std::vector<double> out(a->data.size());
  std::transform(a->data.begin(), a->data.end(), out.begin(), fwd);
  auto node = make_output(a->shape, std::move(out), {a});
  if (node->requires_grad) {
    node->backward_fn = [d](TensorNode& self) {
      TensorNode& p = *self.parents[0];
      ensure_grad(p);
      for (std::size_t i = 0; i < self.data.size(); ++i)
        p.grad[i] += self.grad[i] * d(p.data[i]);
    };
  }
  return TensorAccess::wrap(std::move(node));
}

void check_mask(const TensorNode& a, const Mask* mask, const char* op) {
  if (mask && mask->size() != a.data.size())
    throw ShapeError(std::string(op) + ": mask has " + std::to_string(mask->size()) +
                     " elements, tensor has " + std::to_string(a.data.size()));
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::numel() const { return node_of(*this)->data.size(); }
std::span<const double> Tensor::data() const { return node_of(*this)->data; }

double Tensor::item() const {
  const auto& n = node_of(*this);
  if (n->data.size() != 1)
    throw ShapeError("item() on tensor with shape " + shape_str(n->shape));
  return n->data[0];
}

std::span<double> Tensor::mutable_data() {
  const auto& n = node_of(*this);
  if (!n->parents.empty())
    throw std::logic_error("mutable_data() on a tensor with recorded history");
  return n->data;
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  const auto& n = node_of(*this);
  if (!n->parents.empty())
    throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  n->requires_grad = value;
  if (!value) n->grad.clear();
}

bool Tensor::has_grad() const { return !node_of(*this)->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_of(*this)->grad; }

std::span<double> Tensor::mutable_grad() {
  auto& n = *node_of(*this);
  ensure_grad(n);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = *node_of(*this);
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = node_of(*this);
  return from(n->shape, n->data, false);
}

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = node_of(*this);
  return from(n->shape, n->data, requires_grad);
}

bool Tensor::is_leaf() const { return node_of(*this)->parents.empty(); }

// ---- grad mode -------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, double b) {
  return unary(a, [b](double x) { return x + b; }, [](double) { return 1.0; });
}

Tensor mul(const Tensor& a, double b) {
  return unary(a, [b](double x) { return x * b; }, [b](double) { return b; });
}

Tensor scale(const Tensor& a, double factor) { return mul(a, factor); }

KinkRecorder::KinkRecorder() : previous_(g_kink_recorder) { g_kink_recorder = this; }
KinkRecorder::~KinkRecorder() { g_kink_recorder = previous_; }
KinkRecorder* active_kink_recorder() { return g_kink_recorder; }

namespace {

void record_branches(const Tensor& a, bool three_way) {
  KinkRecorder* rec = g_kink_recorder;
  if (!rec) return;
  for (double x : a.data())
    rec->record(static_cast<std::uint8_t>(x > 0.0 ? 1 : (three_way && x < 0.0 ? 2 : 0)));
}

}  // namespace

Tensor abs(const Tensor& a) {
  record_branches(a, true);
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  record_branches(a, false);
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

namespace {

Tensor reduce(const Tensor& ta, const Mask* mask, bool average, const char* name) {
  const auto& a = node_of(ta);
  check_mask(*a, mask, name);
  const std::size_t n = a->data.size();
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    total += a->data[i];
    ++count;
  }
  if (count == 0) throw DegenerateError(std::string(name) + ": every element is masked");
  const double factor = average ? 1.0 / static_cast<double>(count) : 1.0;
  auto node = make_output({}, {total * factor}, {a});
  if (node->requires_grad) {
    std::vector<std::uint8_t> bits;
    if (mask) bits.assign(mask->bits().begin(), mask->bits().end());
    node->backward_fn = [bits = std::move(bits), factor](TensorNode& self) {
      TensorNode& p = *self.parents[0];
      ensure_grad(p);
      const double g = self.grad[0] * factor;
      for (std::size_t i = 0; i < p.data.size(); ++i)
        if (bits.empty() || bits[i]) p.grad[i] += g;
    };
  }
  return TensorAccess::wrap(std::move(node));
}

}  // namespace

Tensor sum(const Tensor& a, const Mask* mask) { return reduce(a, mask, false, "sum"); }
Tensor mean(const Tensor& a, const Mask* mask) { return reduce(a, mask, true, "mean"); }

Tensor reshape(const Tensor& ta, Shape shape) {
  const auto& a = node_of(ta);
  if (shape_numel(shape) != a->data.size())
    throw ShapeError("reshape: " + shape_str(a->shape) + " -> " + shape_str(shape));
  auto node = make_output(std::move(shape), a->data, {a});
  if (node->requires_grad) {
    node->backward_fn = [](TensorNode& self) {
      TensorNode& p = *self.parents[0];
      ensure_grad(p);
      for (std::size_t i = 0; i < self.data.size(); ++i) p.grad[i] += self.grad[i];
    };
  }
  return TensorAccess::wrap(std::move(node));
}

// ---- conv2d ----------------------------------------------------------------

namespace {

// Convolution runs as a matrix product over zero-padded planes laid out
// with row stride width + 2r. Output pixel (y, x) sits at y * stride + x, so
// each kernel tap is a contiguous window of the padded input (one row of
// the column matrix); the 2r extra columns per row are computed and
// discarded.
struct PaddedGeometry {
  std::size_t in_channels, out_channels, height, width, kernel;
  std::size_t radius, stride, padded_plane, span;

  PaddedGeometry(std::size_t c, std::size_t o, std::size_t h, std::size_t w, std::size_t k)
      : in_channels(c), out_channels(o), height(h), width(w), kernel(k), radius(k / 2),
        stride(w + 2 * (k / 2)), padded_plane((h + 2 * (k / 2)) * stride + 2 * (k / 2)),
        span(h * stride) {}

  std::size_t taps() const { return in_channels * kernel * kernel; }
  std::size_t offset(std::size_t ky, std::size_t kx) const { return ky * stride + kx; }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

// {C*K*K, span} column matrix of the padded input.
RowMatrix im2col(const PaddedGeometry& g, const std::vector<double>& src) {
  std::vector<double> padded(g.in_channels * g.padded_plane, 0.0);
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t y = 0; y < g.height; ++y) {
      const double* s = src.data() + (c * g.height + y) * g.width;
      std::copy(s, s + g.width, padded.data() + c * g.padded_plane + (y + g.radius) * g.stride + g.radius);
    }
  RowMatrix cols(g.taps(), g.span);
  for (std::size_t c = 0; c < g.in_channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* s = padded.data() + c * g.padded_plane + g.offset(ky, kx);
        std::copy(s, s + g.span, cols.row(static_cast<Eigen::Index>((c * g.kernel + ky) * g.kernel + kx)).data());
      }
  return cols;
}

}  // namespace

Tensor conv2d(const Tensor& tin, const Tensor& tw, const Tensor& tb) {
  const auto& in = node_of(tin);
  const auto& w = node_of(tw);
  const auto& b = node_of(tb);
  if (in->shape.size() != 3) throw ShapeError("conv2d: input must be {C,H,W}, got " + shape_str(in->shape));
  if (w->shape.size() != 4 || w->shape[2] != w->shape[3] || w->shape[2] % 2 == 0)
    throw ShapeError("conv2d: weights must be {O,C,K,K} with odd K, got " + shape_str(w->shape));
  if (w->shape[1] != in->shape[0])
    throw ShapeError("conv2d: weights expect " + std::to_string(w->shape[1]) +
                     " input channels, input has " + std::to_string(in->shape[0]));
  if (b->shape != Shape{w->shape[0]})
    throw ShapeError("conv2d: bias must be {O}, got " + shape_str(b->shape));

  const PaddedGeometry g(in->shape[0], w->shape[0], in->shape[1], in->shape[2], w->shape[2]);
  const auto rows = static_cast<Eigen::Index>(g.out_channels);
  const auto taps = static_cast<Eigen::Index>(g.taps());
  const std::size_t plane = g.height * g.width;

  const RowMatrix cols = im2col(g, in->data);
  RowMatrix acc = ConstMap(w->data.data(), rows, taps) * cols;
  std::vector<double> out(g.out_channels * plane);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const double bias = b->data[o];
    const double* a = acc.row(static_cast<Eigen::Index>(o)).data();
    for (std::size_t y = 0; y < g.height; ++y) {
      double* d = out.data() + o * plane + y * g.width;
      for (std::size_t x = 0; x < g.width; ++x) d[x] = a[y * g.stride + x] + bias;
    }
  }

  auto node = make_output({g.out_channels, g.height, g.width}, std::move(out), {in, w, b});
  if (node->requires_grad) {
    node->backward_fn = [g, plane, rows, taps](TensorNode& self) {
      TensorNode& pin = *self.parents[0];
      TensorNode& pw = *self.parents[1];
      TensorNode& pb = *self.parents[2];
      // Output gradient in strided layout, zero in the discarded columns.
      RowMatrix gout = RowMatrix::Zero(rows, static_cast<Eigen::Index>(g.span));
      for (std::size_t o = 0; o < g.out_channels; ++o)
        for (std::size_t y = 0; y < g.height; ++y) {
          const double* s = self.grad.data() + o * plane + y * g.width;
          std::copy(s, s + g.width, gout.row(static_cast<Eigen::Index>(o)).data() + y * g.stride);
        }
      if (pb.requires_grad) {
        ensure_grad(pb);
        for (std::size_t o = 0; o < g.out_channels; ++o) {
          double s = 0.0;
          const double* src = self.grad.data() + o * plane;
          for (std::size_t i = 0; i < plane; ++i) s += src[i];
          pb.grad[o] += s;
        }
      }
      if (pw.requires_grad) {
        ensure_grad(pw);
        const RowMatrix dw = gout * im2col(g, pin.data).transpose();
        for (std::size_t i = 0; i < pw.grad.size(); ++i) pw.grad[i] += dw.data()[i];
      }
      if (pin.requires_grad) {
        ensure_grad(pin);
        const RowMatrix dcols = ConstMap(pw.data.data(), rows, taps).transpose() * gout;
        // Scatter each tap row back onto the padded input, then keep the
        // interior.
        std::vector<double> gin(g.in_channels * g.padded_plane, 0.0);
        for (std::size_t c = 0; c < g.in_channels; ++c)
          for (std::size_t ky = 0; ky < g.kernel; ++ky)
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const double* s = dcols.row(static_cast<Eigen::Index>((c * g.kernel + ky) * g.kernel + kx)).data();
              double* d = gin.data() + c * g.padded_plane + g.offset(ky, kx);
              for (std::size_t i = 0; i < g.span; ++i) d[i] += s[i];
            }
        for (std::size_t c = 0; c < g.in_channels; ++c)
          for (std::size_t y = 0; y < g.height; ++y) {
            const double* s = gin.data() + c * g.padded_plane + (y + g.radius) * g.stride + g.radius;
            double* d = pin.grad.data() + (c * g.height + y) * g.width;
            for (std::size_t x = 0; x < g.width; ++x) d[x] += s[x];
          }
      }
    };
  }
  return TensorAccess::wrap(std::move(node));
}

// ---- backward --------------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  tape.root_ = node_of(root);
  if (!tape.root_->requires_grad) return tape;

  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_set<const TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(tape.root_.get(), 0);
  visited.insert(tape.root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::backward(std::span<const double> seed) {
  if (nodes_.empty()) return;
  if (seed.size() != root_->data.size())
    throw ShapeError("backward: seed size does not match root");
  // Interior gradients are rebuilt on every pass; leaves accumulate.
  for (TensorNode* n : nodes_)
    if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);
  ensure_grad(*root_);
  for (std::size_t i = 0; i < seed.size(); ++i) root_->grad[i] += seed[i];
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  Tape tape = Tape::record(loss);
  const double one = 1.0;
  tape.backward(std::span<const double>(&one, 1));
}

}  // namespace reldepth
