#include "reldepth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

// ---- small linear algebra --------------------------------------------------

double Vec3::norm() const { return std::sqrt(dot(*this)); }

Vec3 Vec3::normalized() const {
  const double n = norm();
  return {x / n, y / n, z / n};
}

Mat3 Mat3::rotation_x(double r) {
  const double c = std::cos(r), s = std::sin(r);
  return {{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 Mat3::rotation_y(double r) {
  const double c = std::cos(r), s = std::sin(r);
  return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 Mat3::rotation_z(double r) {
  const double c = std::cos(r), s = std::sin(r);
  return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

Vec3 Mat3::operator*(Vec3 v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::operator*(const Mat3& b) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m[static_cast<std::size_t>(i * 3 + k)] * b.m[static_cast<std::size_t>(k * 3 + j)];
      r.m[static_cast<std::size_t>(i * 3 + j)] = acc;
    }
  return r;
}

Mat3 Mat3::transposed() const {
  return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
}

// ---- camera ----------------------------------------------------------------

Camera Camera::centered(double focal_px, Size2 size, Vec3 position, Mat3 rotation) {
  Camera c;
  c.focal_px = focal_px;
  c.cx = (static_cast<double>(size.width) - 1.0) / 2.0;
  c.cy = (static_cast<double>(size.height) - 1.0) / 2.0;
  c.rotation = rotation;
  c.translation = position;
  return c;
}

void Camera::validate() const {
  if (!(focal_px > 0.0)) throw std::invalid_argument("Camera: focal_px must be > 0");
  const Mat3 rtr = rotation.transposed() * rotation;
  for (int i = 0; i < 9; ++i) {
    const double expect = (i % 4 == 0) ? 1.0 : 0.0;
    if (std::abs(rtr.m[static_cast<std::size_t>(i)] - expect) > 1e-12)
      throw std::invalid_argument("Camera: rotation is not orthonormal");
  }
}

Vec3 Camera::ray(double u, double v) const {
  return rotation * Vec3{(u - cx) / focal_px, (v - cy) / focal_px, 1.0};
}

Vec3 Camera::to_camera(Vec3 world) const {
  return rotation.transposed() * (world - translation);
}

std::optional<std::array<double, 2>> Camera::project(Vec3 world) const {
  const Vec3 p = to_camera(world);
  if (!(p.z > 0.0)) return std::nullopt;
  return std::array<double, 2>{focal_px * p.x / p.z + cx, focal_px * p.y / p.z + cy};
}

// ---- texture ---------------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t salt) {
  std::uint64_t h = mix64(salt);
  h = mix64(h ^ static_cast<std::uint64_t>(ix));
  h = mix64(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace

double ValueNoise::operator()(double x, double y, std::uint64_t channel) const {
  double total = 0.0, norm = 0.0, amp = 1.0, freq = base_frequency;
  for (int o = 0; o < octaves; ++o) {
    const std::uint64_t salt = mix64(seed) ^ mix64(channel * 131 + static_cast<std::uint64_t>(o));
    const double px = x * freq, py = y * freq;
    const double fx = std::floor(px), fy = std::floor(py);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const double tx = fade(px - fx), ty = fade(py - fy);
    const double v00 = lattice(ix, iy, salt), v10 = lattice(ix + 1, iy, salt);
    const double v01 = lattice(ix, iy + 1, salt), v11 = lattice(ix + 1, iy + 1, salt);
    const double top = v00 + (v10 - v00) * tx;
    const double bottom = v01 + (v11 - v01) * tx;
    total += amp * (top + (bottom - top) * ty);
    norm += amp;
    amp *= persistence;
    freq *= 2.0;
  }
  return total / norm;
}

// ---- height field ----------------------------------------------------------

double HeightField::height(double x, double y) const {
  double z = base_z;
  for (const Wave& w : waves) z += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  return z;
}

std::array<double, 2> HeightField::gradient(double x, double y) const {
  std::array<double, 2> g{0.0, 0.0};
  for (const Wave& w : waves) {
    const double c = w.amplitude * std::cos(w.kx * x + w.ky * y + w.phase);
    g[0] += c * w.kx;
    g[1] += c * w.ky;
  }
  return g;
}

double HeightField::relief() const {
  double r = 0.0;
  for (const Wave& w : waves) r += std::abs(w.amplitude);
  return r;
}

Scene Scene::plane(double z, std::uint64_t texture_seed) {
  Scene s;
  s.surface.base_z = z;
  s.texture.seed = texture_seed;
  return s;
}

Scene Scene::random(std::uint64_t seed, double mean_depth, double relief_fraction) {
  if (relief_fraction > 0.2)
    throw std::invalid_argument("Scene::random: relief is capped at 20% of the mean depth");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene s;
  s.surface.base_z = mean_depth;
  s.texture.seed = mix64(seed);
  s.texture.base_frequency = 2.0 + 3.0 * unit(rng);
  const int n_waves = 3;
  std::vector<double> weights(n_waves);
  double total = 0.0;
  for (double& w : weights) total += (w = 0.5 + unit(rng));
  for (int i = 0; i < n_waves; ++i) {
    const double k = 1.5 + 2.5 * unit(rng);
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    s.surface.waves.push_back({relief_fraction * mean_depth * weights[static_cast<std::size_t>(i)] / total,
                               k * std::cos(theta), k * std::sin(theta),
                               2.0 * std::numbers::pi * unit(rng)});
  }
  s.tint = {0.8 + 0.2 * unit(rng), 0.55 + 0.3 * unit(rng), 0.45 + 0.3 * unit(rng)};
  return s;
}

// ---- ray casting -----------------------------------------------------------

namespace {

std::optional<Hit> intersect_surface(const HeightField& hf, Vec3 o, Vec3 d) {
  const double relief = hf.relief();
  if (relief == 0.0) {
    if (d.z == 0.0) return std::nullopt;
    const double t = (hf.base_z - o.z) / d.z;
    if (!(t > 0.0)) return std::nullopt;
    return Hit{o + t * d, Vec3{0.0, 0.0, -1.0}, t, false};
  }
  // Forward-looking rays from below the relief band only.
  if (!(d.z > 0.0) || o.z >= hf.base_z - relief) return std::nullopt;
  auto f = [&](double t) {
    const Vec3 p = o + t * d;
    return p.z - hf.height(p.x, p.y);
  };
  double lo = (hf.base_z - relief - o.z) / d.z;
  const double end = (hf.base_z + relief - o.z) / d.z;
  double f_lo = f(lo);
  if (f_lo >= 0.0) {
    const double t = lo;
    const Vec3 p = o + t * d;
    const auto g = hf.gradient(p.x, p.y);
    return Hit{p, Vec3{g[0], g[1], -1.0}.normalized(), t, false};
  }
  // March to the first sign change, then Illinois false position.
  constexpr int kSteps = 64;
  const double step = (end - lo) / kSteps;
  double hi = lo, f_hi = f_lo;
  for (int i = 1; i <= kSteps; ++i) {
    hi = lo + step;
    f_hi = (i == kSteps) ? f(end) : f(hi);
    if (i == kSteps) hi = end;
    if (f_hi >= 0.0) break;
    lo = hi;
    f_lo = f_hi;
  }
  if (f_hi < 0.0) return std::nullopt;
  int side = 0;
  double t = hi;
  for (int it = 0; it < 200; ++it) {
    t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const double ft = f(t);
    if (ft == 0.0) break;
    if (ft < 0.0) {
      lo = t;
      f_lo = ft;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = t;
      f_hi = ft;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      t = 0.5 * (lo + hi);
      break;
    }
  }
  const Vec3 p = o + t * d;
  const auto g = hf.gradient(p.x, p.y);
  return Hit{p, Vec3{g[0], g[1], -1.0}.normalized(), t, false};
}

std::optional<Hit> intersect_box(const Box& box, Vec3 o, Vec3 d) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int axis = -1;
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double los[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double his[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int i = 0; i < 3; ++i) {
    if (ds[i] == 0.0) {
      if (os[i] < los[i] || os[i] > his[i]) return std::nullopt;
      continue;
    }
    double t0 = (los[i] - os[i]) / ds[i];
    double t1 = (his[i] - os[i]) / ds[i];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      axis = i;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (axis < 0 || t_enter > t_exit || !(t_enter > 0.0)) return std::nullopt;
  Vec3 n{0.0, 0.0, 0.0};
  const double sign = ds[axis] > 0.0 ? -1.0 : 1.0;
  (axis == 0 ? n.x : axis == 1 ? n.y : n.z) = sign;
  return Hit{o + t_enter * d, n, t_enter, true};
}

}  // namespace

std::optional<Hit> intersect(const Scene& scene, Vec3 origin, Vec3 dir) {
  std::optional<Hit> best;
  if (scene.occluder) best = intersect_box(*scene.occluder, origin, dir);
  auto surface = intersect_surface(scene.surface, origin, dir);
  if (surface && (!best || surface->ray_t < best->ray_t)) best = surface;
  return best;
}

// ---- rendering -------------------------------------------------------------

namespace {

std::array<double, 3> shade(const Scene& scene, const Hit& hit, Vec3 dir) {
  Vec3 n = hit.normal;
  if (n.dot(dir) > 0.0) n = -1.0 * n;
  const double lambert = std::max(0.0, n.dot(scene.light_dir));
  double direct = lambert;
  if (scene.headlight > 0.0) {
    const double dist = hit.ray_t * dir.norm();
    const double facing = std::max(0.0, -n.dot(dir) / dir.norm());
    const double r = scene.headlight_reference / dist;
    direct = (1.0 - scene.headlight) * lambert + scene.headlight * facing * r * r;
  }
  const double light = scene.ambient + (1.0 - scene.ambient) * direct;
  const std::uint64_t base = hit.on_occluder ? 3 : 0;
  // Occluder faces are textured by whichever two coordinates span them.
  double u = hit.point.x, v = hit.point.y;
  if (hit.on_occluder && hit.normal.x != 0.0) u = hit.point.z;
  if (hit.on_occluder && hit.normal.y != 0.0) v = hit.point.z;
  std::array<double, 3> rgb{};
  const double shared = scene.texture(u, v, base + 10);
  for (std::size_t c = 0; c < 3; ++c) {
    const double own = scene.texture(u, v, base + c);
    const double albedo = scene.tint[c] * (1.0 - scene.texture_contrast * (1.0 - (0.6 * shared + 0.4 * own)));
    rgb[c] = albedo * light;
  }
  return rgb;
}

}  // namespace

RenderedFrame render(const Scene& scene, const Camera& camera, Size2 size, double timestamp_s,
                     double brightness) {
  camera.validate();
  RenderedFrame f{Image(3, size), DepthMap(size, 0.0, false), timestamp_s};
  for (std::size_t y = 0; y < size.height; ++y) {
    for (std::size_t x = 0; x < size.width; ++x) {
      const Vec3 dir = camera.ray(static_cast<double>(x), static_cast<double>(y));
      const auto hit = intersect(scene, camera.translation, dir);
      if (!hit) continue;
      const double z = camera.to_camera(hit->point).z;
      f.depth.at(y, x) = 1.0 / z;
      f.depth.valid.set(y * size.width + x, true);
      const auto rgb = shade(scene, *hit, dir);
      for (std::size_t c = 0; c < 3; ++c) f.image.at(c, y, x) = std::clamp(rgb[c] * brightness, 0.0, 1.0);
    }
  }
  return f;
}

// ---- flow ------------------------------------------------------------------

std::optional<std::array<double, 2>> flow_at(const Scene& scene, const Camera& a, const Camera& b,
                                             double u, double v) {
  const auto hit = intersect(scene, a.translation, a.ray(u, v));
  if (!hit) return std::nullopt;
  const auto q = b.project(hit->point);
  if (!q) return std::nullopt;
  return std::array<double, 2>{(*q)[0] - u, (*q)[1] - v};
}

OracleFlow analytic_flow(const Scene& scene, const Camera& a, const Camera& b, Size2 size) {
  a.validate();
  b.validate();
  OracleFlow out{FlowField(size, 0.0, 0.0, false), Mask::filled(size.height, size.width, true)};
  const double max_u = static_cast<double>(size.width) - 1.0;
  const double max_v = static_cast<double>(size.height) - 1.0;
  for (std::size_t y = 0; y < size.height; ++y) {
    for (std::size_t x = 0; x < size.width; ++x) {
      const std::size_t i = y * size.width + x;
      const double u = static_cast<double>(x), v = static_cast<double>(y);
      const auto hit = intersect(scene, a.translation, a.ray(u, v));
      if (!hit) continue;
      const auto q = b.project(hit->point);
      if (!q) continue;
      out.flow.dx[i] = (*q)[0] - u;
      out.flow.dy[i] = (*q)[1] - v;
      out.flow.valid.set(i, true);
      if ((*q)[0] < 0.0 || (*q)[0] > max_u || (*q)[1] < 0.0 || (*q)[1] > max_v) continue;
      const auto seen = intersect(scene, b.translation, b.ray((*q)[0], (*q)[1]));
      if (!seen) continue;
      const double dist = (hit->point - b.translation).norm();
      if ((seen->point - hit->point).norm() <= 1e-7 * dist) out.occluded.set(i, false);
    }
  }
  return out;
}

StereoPair stereo_pair(const Scene& scene, const Camera& camera, double baseline, Size2 size) {
  if (!(baseline > 0.0)) throw std::invalid_argument("stereo_pair: baseline must be > 0");
  StereoPair p;
  p.left_camera = camera;
  p.right_camera = camera;
  p.right_camera.translation = camera.translation + baseline * (camera.rotation * Vec3{1.0, 0.0, 0.0});
  p.left = render(scene, p.left_camera, size);
  p.right = render(scene, p.right_camera, size);
  p.disparity = p.left.depth;
  for (std::size_t i = 0; i < size.area(); ++i)
    if (p.disparity.valid[i]) p.disparity.values[i] *= camera.focal_px * baseline;
  return p;
}

std::vector<CameraPose> linear_path(const Camera& start, Vec3 velocity, double yaw_rate,
                                    std::size_t frames, double fps) {
  if (!(fps > 0.0)) throw std::invalid_argument("linear_path: fps must be > 0");
  std::vector<CameraPose> path;
  path.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / fps;
    CameraPose pose{start, t};
    pose.camera.translation = start.translation + t * velocity;
    pose.camera.rotation = start.rotation * Mat3::rotation_y(yaw_rate * t);
    path.push_back(pose);
  }
  return path;
}

// ---- clips -----------------------------------------------------------------

struct AnalyticFlowSource::Cache {
  std::mutex mutex;
  std::map<std::pair<std::size_t, std::size_t>, OracleFlow> entries;
};

AnalyticFlowSource::AnalyticFlowSource(Scene scene, std::vector<CameraPose> poses, Size2 size)
    : scene_(std::move(scene)), poses_(std::move(poses)), size_(size), cache_(std::make_unique<Cache>()) {}

AnalyticFlowSource::~AnalyticFlowSource() = default;

OracleFlow AnalyticFlowSource::oracle(std::size_t from, std::size_t to) const {
  if (from >= poses_.size() || to >= poses_.size())
    throw std::out_of_range("AnalyticFlowSource: frame index out of range");
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->entries.find({from, to});
    if (it != cache_->entries.end()) return it->second;
  }
  OracleFlow f = analytic_flow(scene_, poses_[from].camera, poses_[to].camera, size_);
  std::lock_guard lock(cache_->mutex);
  return cache_->entries.emplace(std::pair{from, to}, std::move(f)).first->second;
}

FlowField AnalyticFlowSource::flow(std::size_t from, std::size_t to) const {
  return oracle(from, to).flow;
}

ClipSample trajectory(const Scene& scene, const std::vector<CameraPose>& path, Size2 size,
                      const TrajectoryOptions& options) {
  if (path.size() < 2) throw std::invalid_argument("trajectory: need at least 2 poses");
  for (std::size_t k = 1; k < path.size(); ++k)
    if (!(path[k].timestamp_s > path[k - 1].timestamp_s))
      throw std::invalid_argument("trajectory: timestamps must be strictly increasing");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gain(0.0, 1.0);
  ClipSample clip;
  clip.id = "synthetic";
  for (const CameraPose& pose : path) {
    const double brightness =
        options.brightness_jitter > 0.0
            ? std::clamp(1.0 + options.brightness_jitter * gain(rng), 0.5, 1.5)
            : 1.0;
    RenderedFrame f = render(scene, pose.camera, size, pose.timestamp_s, brightness);
    if (options.pixel_noise > 0.0)
      for (double& v : f.image.data()) v = std::clamp(v + options.pixel_noise * gain(rng), 0.0, 1.0);
    DepthMap disparity = f.depth;
    for (std::size_t i = 0; i < size.area(); ++i)
      if (disparity.valid[i]) disparity.values[i] *= pose.camera.focal_px * options.stereo_baseline;
    clip.frames.push_back(std::move(f.image));
    clip.timestamps.push_back(pose.timestamp_s);
    clip.disparity.push_back(std::move(disparity));
  }
  clip.flows = std::make_shared<AnalyticFlowSource>(scene, path, size);
  return clip;
}

// ---- ClipSample ------------------------------------------------------------

FlowField ClipSample::flow(std::size_t from, std::size_t to) const {
  if (!flows) throw std::logic_error("ClipSample '" + id + "' has no flow source");
  return flows->flow(from, to);
}

void ClipSample::validate() const {
  if (frames.empty()) throw std::invalid_argument("clip '" + id + "' has no frames");
  if (timestamps.size() != frames.size())
    throw std::invalid_argument("clip '" + id + "': timestamp count differs from frame count");
  if (!disparity.empty() && disparity.size() != frames.size())
    throw std::invalid_argument("clip '" + id + "': disparity count differs from frame count");
  for (std::size_t k = 1; k < timestamps.size(); ++k)
    if (!(timestamps[k] > timestamps[k - 1]))
      throw std::invalid_argument("clip '" + id + "': timestamps must be strictly increasing");
  for (const Image& f : frames)
    require_same_size(f.size(), frames.front().size(), "clip frames");
}

// ---- random clips ----------------------------------------------------------

ClipSample random_clip(std::uint64_t seed, const RandomClipOptions& o) {
  std::mt19937_64 rng(mix64(seed ^ 0x5eedc11bULL));
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene = Scene::random(seed, 2.0, o.relief_fraction);
  scene.headlight = o.headlight;
  scene.texture_contrast = o.texture_contrast;
  if (unit(rng) < o.occluder_probability) {
    const double cx = 0.2 * sym(rng);
    const double cy = 0.2 * sym(rng);
    const double z = 1.2 + 0.1 * unit(rng);
    scene.occluder = Box{{cx - 0.2, cy - 0.3, z}, {cx + 0.2, cy + 0.3, z + 0.2}};
  }
  const Camera start = Camera::centered(o.focal_px, o.size, {0.5 * sym(rng), 0.5 * sym(rng), 0.0},
                                        Mat3::rotation_z(sym(rng)));
  const Vec3 velocity{o.max_speed * sym(rng), o.max_speed * sym(rng), 0.5 * o.max_speed * sym(rng)};
  const auto path = linear_path(start, velocity, o.max_yaw_rate * sym(rng), o.frames, o.fps);
  TrajectoryOptions t = o.trajectory;
  t.seed = mix64(seed);
  ClipSample clip = trajectory(scene, path, o.size, t);
  clip.id = "clip" + std::to_string(seed);
  return clip;
}

}  // namespace reldepth
