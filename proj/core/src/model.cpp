#include "reldepth/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

namespace {

constexpr char kMagic[8] = {'R', 'D', 'E', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::size_t layer_in(std::size_t layer) {
  return layer == 0 ? DepthNet::kInputChannels : DepthNet::kHidden;
}
std::size_t layer_out(std::size_t layer) {
  return layer + 1 == DepthNet::kLayers ? 1 : DepthNet::kHidden;
}

}  // namespace

std::vector<Shape> DepthNet::parameter_shapes() {
  std::vector<Shape> shapes;
  for (std::size_t l = 0; l < kLayers; ++l) {
    shapes.push_back({layer_out(l), layer_in(l), kKernel, kKernel});
    shapes.push_back({layer_out(l)});
  }
  return shapes;
}

std::uint64_t DepthNet::architecture_hash() {
  // FNV-1a over the layer shapes and the activation layout.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const Shape& s : parameter_shapes()) {
    feed(s.size());
    for (std::size_t d : s) feed(d);
  }
  feed(0x72656c75);  // relu between layers, none after the last
  return h;
}

DepthNet::DepthNet(std::uint64_t seed, double final_layer_gain) {
  std::mt19937_64 rng(seed);
  const auto shapes = parameter_shapes();
  for (std::size_t l = 0; l < kLayers; ++l) {
    const double fan_in = static_cast<double>(layer_in(l) * kKernel * kKernel);
    double bound = std::sqrt(6.0 / fan_in);
    if (l + 1 == kLayers) bound *= final_layer_gain;
    std::uniform_real_distribution<double> dist(-bound, bound);
    const Shape& ws = shapes[2 * l];
    std::vector<double> w(shape_numel(ws));
    for (double& v : w) v = dist(rng);
    params_.push_back(Tensor::from(ws, std::move(w), true));
    params_.push_back(Tensor::zeros(shapes[2 * l + 1], true));
  }
}

DepthNet::DepthNet(const DepthNet& other) {
  for (const Tensor& p : other.params_) params_.push_back(p.clone(p.requires_grad()));
}

DepthNet& DepthNet::operator=(const DepthNet& other) {
  if (this != &other) {
    DepthNet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::size_t DepthNet::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.numel();
  return n;
}

Tensor DepthNet::forward(const Image& image) const {
  if (image.channels() != kInputChannels)
    throw ShapeError("DepthNet: expected a 3-channel image, got " + std::to_string(image.channels()));
  Tensor x = image.to_tensor();
  for (std::size_t l = 0; l < kLayers; ++l) {
    x = conv2d(x, params_[2 * l], params_[2 * l + 1]);
    if (l + 1 < kLayers) x = relu(x);
  }
  return reshape(x, {image.height(), image.width()});
}

DepthMap DepthNet::predict(const Image& image) const {
  NoGradGuard guard;
  return DepthMap::from_tensor(forward(image), image.size());
}

void DepthNet::set_requires_grad(bool value) {
  for (Tensor& p : params_) p.set_requires_grad(value);
}

void DepthNet::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

DepthNet DepthNet::clone(bool requires_grad) const {
  DepthNet out;
  for (const Tensor& p : params_) out.params_.push_back(p.clone(requires_grad));
  return out;
}

void DepthNet::zero_final_layer() {
  for (std::size_t i = params_.size() - 2; i < params_.size(); ++i) {
    auto d = params_[i].mutable_data();
    std::fill(d.begin(), d.end(), 0.0);
  }
}

std::vector<double> DepthNet::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const Tensor& p : params_) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

void DepthNet::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count())
    throw ShapeError("DepthNet: expected " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(values.size()));
  std::size_t offset = 0;
  for (Tensor& p : params_) {
    auto d = p.mutable_data();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), d.size(), d.begin());
    offset += d.size();
  }
}

// ---- ModelPair -------------------------------------------------------------

ModelPair ModelPair::create(std::uint64_t seed, double ema_decay) {
  if (!(ema_decay >= 0.0 && ema_decay < 1.0))
    throw std::invalid_argument("ModelPair: ema_decay must lie in [0, 1)");
  DepthNet fast(seed);
  DepthNet slow = fast.clone(false);
  return ModelPair{std::move(fast), std::move(slow), ema_decay};
}

void ModelPair::ema_update() {
  auto& fp = fast.parameters();
  auto& sp = slow.parameters();
  for (std::size_t i = 0; i < fp.size(); ++i) {
    auto s = sp[i].mutable_data();
    auto f = fp[i].data();
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = ema_decay * s[j] + (1.0 - ema_decay) * f[j];
  }
}

void ModelPair::sync_slow() { slow = fast.clone(false); }

// ---- checkpoints -----------------------------------------------------------

namespace {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw FormatError("checkpoint " + path.string() + ": truncated header");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelPair& pair) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, DepthNet::architecture_hash());
  put<std::uint32_t>(os, 2);
  put<double>(os, pair.ema_decay);
  put<std::uint64_t>(os, pair.fast.parameter_count());
  for (const DepthNet* net : {&pair.fast, &pair.slow}) {
    const auto flat = net->flat_parameters();
    os.write(reinterpret_cast<const char*>(flat.data()),
             static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

ModelPair load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  const auto hash = get<std::uint64_t>(is, path);
  if (hash != DepthNet::architecture_hash())
    throw FormatError("checkpoint " + path.string() + ": architecture hash mismatch");
  const auto sets = get<std::uint32_t>(is, path);
  if (sets != 1 && sets != 2)
    throw FormatError("checkpoint " + path.string() + ": invalid parameter set count");
  const auto decay = get<double>(is, path);
  const auto count = get<std::uint64_t>(is, path);
  if (!(decay >= 0.0 && decay < 1.0))
    throw FormatError("checkpoint " + path.string() + ": ema decay outside [0, 1)");

  ModelPair pair = ModelPair::create(0, decay);
  if (count != pair.fast.parameter_count())
    throw FormatError("checkpoint " + path.string() + ": parameter count mismatch");
  std::vector<double> flat(count);
  for (std::uint32_t s = 0; s < sets; ++s) {
    if (!is.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double))))
      throw FormatError("checkpoint " + path.string() + ": truncated parameter blob");
    (s == 0 ? pair.fast : pair.slow).set_flat_parameters(flat);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("checkpoint " + path.string() + ": trailing data");
  if (sets == 1) pair.sync_slow();
  return pair;
}

}  // namespace reldepth
