#pragma once

// Analytic synthetic scenes: a textured height field, optionally an
// axis-aligned box occluder, and pinhole cameras. Depth, flow, disparity
// and occlusion are computed by exact ray casting, so they serve as ground
// truth for the geometric operators.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "reldepth/clip.hpp"
#include "reldepth/maps.hpp"

namespace reldepth {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  double dot(Vec3 b) const { return x * b.x + y * b.y + z * b.z; }
  double norm() const;
  Vec3 normalized() const;
};

struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 rotation_x(double radians);
  static Mat3 rotation_y(double radians);
  static Mat3 rotation_z(double radians);

  Vec3 operator*(Vec3 v) const;
  Mat3 operator*(const Mat3& b) const;
  Mat3 transposed() const;
};

// Pinhole camera. rotation maps camera axes to world axes; translation is
// the camera centre in world coordinates. The camera looks along its +z.
struct Camera {
  double focal_px = 100.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation;
  Vec3 translation;

  // Principal point at the image centre.
  static Camera centered(double focal_px, Size2 size, Vec3 position = {},
                         Mat3 rotation = Mat3::identity());

  // Throws std::invalid_argument if focal_px <= 0 or rotation is not
  // orthonormal to 1e-12.
  void validate() const;

  // World-space ray direction (not normalized) through pixel position (u, v).
  Vec3 ray(double u, double v) const;
  Vec3 to_camera(Vec3 world) const;
  // Pixel position of a world point, nullopt when behind the camera.
  std::optional<std::array<double, 2>> project(Vec3 world) const;
};

// Deterministic multi-octave lattice value noise in [0, 1].
struct ValueNoise {
  std::uint64_t seed = 1;
  int octaves = 4;
  double base_frequency = 3.0;
  double persistence = 0.5;

  double operator()(double x, double y, std::uint64_t channel) const;
};

struct Wave {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

// z = base_z + sum of sinusoids over world (x, y).
struct HeightField {
  double base_z = 2.0;
  std::vector<Wave> waves;

  double height(double x, double y) const;
  std::array<double, 2> gradient(double x, double y) const;
  // Upper bound on |height - base_z|.
  double relief() const;
};

struct Box {
  Vec3 lo;
  Vec3 hi;
};

struct Scene {
  HeightField surface;
  ValueNoise texture;
  std::array<double, 3> tint{1.0, 0.85, 0.7};
  std::optional<Box> occluder;
  // Unit vector from the surface towards the light.
  Vec3 light_dir = Vec3{-0.3, -0.5, -1.0}.normalized();
  double ambient = 0.35;
  // Share of the direct light coming from a point source at the camera
  // centre, as in endoscopy. Its irradiance falls off with the squared
  // distance, normalized to 1 at headlight_reference.
  double headlight = 0.0;
  double headlight_reference = 2.0;
  // Albedo spans [1 - texture_contrast, 1] times the tint.
  double texture_contrast = 0.85;

  static Scene plane(double z, std::uint64_t texture_seed = 1);
  // Random rolling surface with relief at most relief_fraction * mean_depth.
  static Scene random(std::uint64_t seed, double mean_depth = 2.0, double relief_fraction = 0.1);
};

struct Hit {
  Vec3 point;
  Vec3 normal;
  double ray_t = 0.0;
  bool on_occluder = false;
};

// First intersection of origin + t * dir (t > 0) with the scene.
std::optional<Hit> intersect(const Scene& scene, Vec3 origin, Vec3 dir);

struct RenderedFrame {
  Image image;     // 3 x H x W in [0, 1]
  DepthMap depth;  // inverse depth 1 / z_cam, invalid where rays miss
  double timestamp_s = 0.0;
};

RenderedFrame render(const Scene& scene, const Camera& camera, Size2 size,
                     double timestamp_s = 0.0, double brightness = 1.0);

struct OracleFlow {
  FlowField flow;  // valid where the source ray hits the scene
  Mask occluded;   // hidden in b, behind b, or projected outside b's frame
};

OracleFlow analytic_flow(const Scene& scene, const Camera& a, const Camera& b, Size2 size);

// Flow of the scene point seen at continuous position (u, v) of camera a.
// nullopt when the ray misses or the point is behind b. Visibility in b is
// not checked.
std::optional<std::array<double, 2>> flow_at(const Scene& scene, const Camera& a,
                                             const Camera& b, double u, double v);

struct StereoPair {
  RenderedFrame left;
  RenderedFrame right;
  Camera left_camera;
  Camera right_camera;
  // focal_px * baseline * inverse depth of the left view.
  DepthMap disparity;
};

// Right camera is the left one translated by baseline along its own x axis.
StereoPair stereo_pair(const Scene& scene, const Camera& camera, double baseline, Size2 size);

struct CameraPose {
  Camera camera;
  double timestamp_s = 0.0;
};

// Camera translating at constant velocity (scene units per second) and
// yawing at yaw_rate (radians per second), sampled at fps.
std::vector<CameraPose> linear_path(const Camera& start, Vec3 velocity, double yaw_rate,
                                    std::size_t frames, double fps);

struct TrajectoryOptions {
  double stereo_baseline = 0.1;
  // Standard deviation of a per-frame multiplicative brightness gain.
  double brightness_jitter = 0.0;
  // Standard deviation of i.i.d. Gaussian noise per pixel and channel,
  // drawn independently for every frame; values are clamped to [0, 1].
  double pixel_noise = 0.0;
  std::uint64_t seed = 0;
};

// Flow source computing exact flow between poses, memoized.
class AnalyticFlowSource : public FlowSource {
 public:
  AnalyticFlowSource(Scene scene, std::vector<CameraPose> poses, Size2 size);
  ~AnalyticFlowSource() override;
  FlowField flow(std::size_t from, std::size_t to) const override;
  OracleFlow oracle(std::size_t from, std::size_t to) const;
  const Scene& scene() const { return scene_; }
  const std::vector<CameraPose>& poses() const { return poses_; }

 private:
  struct Cache;
  Scene scene_;
  std::vector<CameraPose> poses_;
  Size2 size_;
  std::unique_ptr<Cache> cache_;
};

// Renders every pose and attaches disparity ground truth and analytic flow.
// Throws std::invalid_argument for fewer than 2 poses or non-increasing
// timestamps.
ClipSample trajectory(const Scene& scene, const std::vector<CameraPose>& path, Size2 size,
                      const TrajectoryOptions& options = {});

struct RandomClipOptions {
  Size2 size{32, 32};
  double focal_px = 40.0;
  std::size_t frames = 12;
  double fps = 30.0;
  double headlight = 0.8;
  double texture_contrast = 0.5;
  double relief_fraction = 0.15;
  // Probability that the scene holds a box occluder in front of the surface.
  double occluder_probability = 0.5;
  double max_speed = 0.6;  // lateral, scene units per second
  double max_yaw_rate = 0.3;
  TrajectoryOptions trajectory;
};

// Random rolling scene viewed by a camera drifting at random constant
// velocity. Everything is derived from seed; trajectory.seed is ignored.
ClipSample random_clip(std::uint64_t seed, const RandomClipOptions& options = {});

}  // namespace reldepth
