#include "reldepth/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "reldepth/error.hpp"

namespace reldepth {

void MaskConfig::validate() const {
  if (!(epsilon_px > 0.0)) throw std::invalid_argument("MaskConfig: epsilon_px must be > 0");
  if (!(vertical_gate_px > 0.0))
    throw std::invalid_argument("MaskConfig: vertical_gate_px must be > 0");
}

std::optional<BilinearTaps> bilinear_taps(Size2 size, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y) || size.area() == 0) return std::nullopt;
  // Positions within kEdgeSlack of the border are snapped onto it, so flow
  // carrying round-off at the edge still samples the edge pixel.
  const double max_x = static_cast<double>(size.width) - 1.0;
  const double max_y = static_cast<double>(size.height) - 1.0;
  if (x < -kEdgeSlack || y < -kEdgeSlack || x > max_x + kEdgeSlack || y > max_y + kEdgeSlack)
    return std::nullopt;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const auto x0 = static_cast<std::size_t>(fx);
  const auto y0 = static_cast<std::size_t>(fy);

  BilinearTaps t;
  auto push = [&](std::size_t yy, std::size_t xx, double w) {
    t.index[static_cast<std::size_t>(t.count)] = yy * size.width + xx;
    t.weight[static_cast<std::size_t>(t.count)] = w;
    ++t.count;
  };
  push(y0, x0, (1.0 - ax) * (1.0 - ay));
  if (ax > 0.0) push(y0, x0 + 1, ax * (1.0 - ay));
  if (ay > 0.0) push(y0 + 1, x0, (1.0 - ax) * ay);
  if (ax > 0.0 && ay > 0.0) push(y0 + 1, x0 + 1, ax * ay);
  return t;
}

namespace {

bool taps_valid(const BilinearTaps& t, const Mask* valid) {
  if (!valid) return true;
  for (int k = 0; k < t.count; ++k)
    if (!(*valid)[t.index[static_cast<std::size_t>(k)]]) return false;
  return true;
}

double apply_taps(const BilinearTaps& t, const double* plane) {
  double v = 0.0;
  for (int k = 0; k < t.count; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    v += t.weight[kk] * plane[t.index[kk]];
  }
  return v;
}

// Taps for the lookup at pixel i displaced by the flow, honouring validity.
std::optional<BilinearTaps> flow_taps(const FlowField& flow, std::size_t i,
                                      const Mask* target_valid) {
  if (!flow.valid[i]) return std::nullopt;
  const double x = static_cast<double>(i % flow.size.width) + flow.dx[i];
  const double y = static_cast<double>(i / flow.size.width) + flow.dy[i];
  auto taps = bilinear_taps(flow.size, x, y);
  if (!taps || !taps_valid(*taps, target_valid)) return std::nullopt;
  return taps;
}

}  // namespace

std::optional<double> sample_bilinear(const DepthMap& map, double x, double y) {
  auto taps = bilinear_taps(map.size, x, y);
  if (!taps || !taps_valid(*taps, &map.valid)) return std::nullopt;
  return apply_taps(*taps, map.values.data());
}

WarpedImage warp(const FlowField& flow, const Image& target, const Mask* target_valid) {
  require_same_size(flow.size, target.size(), "warp");
  const std::size_t n = flow.size.area();
  WarpedImage out{Image(target.channels(), target.size()), Mask::filled(flow.size.height, flow.size.width, false)};
  for (std::size_t i = 0; i < n; ++i) {
    auto taps = flow_taps(flow, i, target_valid);
    if (!taps) continue;
    out.valid.set(i, true);
    for (std::size_t c = 0; c < target.channels(); ++c)
      out.image.data()[c * n + i] = apply_taps(*taps, target.data().data() + c * n);
  }
  return out;
}

DepthMap warp(const FlowField& flow, const DepthMap& target) {
  require_same_size(flow.size, target.size, "warp");
  DepthMap out(flow.size, 0.0, false);
  for (std::size_t i = 0; i < flow.size.area(); ++i) {
    auto taps = flow_taps(flow, i, &target.valid);
    if (!taps) continue;
    out.valid.set(i, true);
    out.values[i] = apply_taps(*taps, target.values.data());
  }
  return out;
}

FlowField warp(const FlowField& flow, const FlowField& target) {
  require_same_size(flow.size, target.size, "warp");
  FlowField out(flow.size, 0.0, 0.0, false);
  for (std::size_t i = 0; i < flow.size.area(); ++i) {
    auto taps = flow_taps(flow, i, &target.valid);
    if (!taps) continue;
    out.valid.set(i, true);
    out.dx[i] = apply_taps(*taps, target.dx.data());
    out.dy[i] = apply_taps(*taps, target.dy.data());
  }
  return out;
}

std::vector<double> loop_residual(const FlowField& f_ab, const FlowField& f_ba) {
  require_same_size(f_ab.size, f_ba.size, "loop_residual");
  const FlowField back = warp(f_ab, f_ba);
  std::vector<double> r(f_ab.size.area(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!back.valid[i]) continue;
    r[i] = std::hypot(f_ab.dx[i] + back.dx[i], f_ab.dy[i] + back.dy[i]);
  }
  return r;
}

Mask correspondence_mask(const FlowField& f_ab, const FlowField& f_ba, const MaskConfig& cfg) {
  cfg.validate();
  const std::vector<double> r = loop_residual(f_ab, f_ba);
  Mask m = Mask::filled(f_ab.size.height, f_ab.size.width, false);
  // NaN compares false, so invalid samples stay 0.
  for (std::size_t i = 0; i < r.size(); ++i) m.set(i, r[i] < cfg.epsilon_px);
  return m;
}

DisparityResult disparity_from_rectified_flow(const FlowField& f_lr, const FlowField& f_rl,
                                              const MaskConfig& cfg) {
  const Mask loop = correspondence_mask(f_lr, f_rl, cfg);
  DisparityResult out{DepthMap(f_lr.size, 0.0, false), 0.0};
  std::size_t kept = 0;
  for (std::size_t i = 0; i < f_lr.size.area(); ++i) {
    if (!loop[i] || !(std::abs(f_lr.dy[i]) < cfg.vertical_gate_px)) continue;
    out.disparity.values[i] = std::abs(f_lr.dx[i]);
    out.disparity.valid.set(i, true);
    ++kept;
  }
  const auto n = static_cast<double>(f_lr.size.area());
  out.masked_fraction = n > 0 ? 1.0 - static_cast<double>(kept) / n : 0.0;
  return out;
}

}  // namespace reldepth
