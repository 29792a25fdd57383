#include "reldepth/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

#include "reldepth/losses.hpp"
#include "reldepth/synth.hpp"

namespace reldepth {

double gradcheck_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(numeric));
}

namespace {

struct Evaluation {
  double value;
  std::vector<std::uint8_t> pattern;
};

Evaluation evaluate(const DepthNet& net, const ParameterLoss& loss) {
  KinkRecorder rec;
  const double v = loss(net).item();
  return {v, rec.pattern()};
}

}  // namespace

GradcheckReport gradcheck(DepthNet net, const ParameterLoss& loss, const GradcheckOptions& opts,
                          std::string name) {
  GradcheckReport rep;
  rep.name = std::move(name);
  net.set_requires_grad(true);
  net.zero_grad();
  backward(loss(net));

  NoGradGuard no_grad;
  const std::vector<std::uint8_t> centre = evaluate(net, loss).pattern;
  for (auto& p : net.parameters()) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i, ++rep.n_params) {
      const double saved = values[i];
      double h = opts.step;
      std::optional<double> numeric;
      for (int attempt = 0; attempt <= opts.max_shrinks && !numeric; ++attempt, h /= opts.step_shrink) {
        values[i] = saved + h;
        const Evaluation up = evaluate(net, loss);
        values[i] = saved - h;
        const Evaluation down = evaluate(net, loss);
        values[i] = saved;
        if (up.pattern == centre && down.pattern == centre) {
          numeric = (up.value - down.value) / (2.0 * h);
          if (attempt > 0) ++rep.n_reduced_step;
        }
      }
      if (!numeric) {
        ++rep.n_at_kink;
        continue;
      }
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = gradcheck_error(a, *numeric, opts.denominator_floor);
      if (!(err <= rep.max_error)) {
        rep.max_error = err;
        rep.worst_index = rep.n_params;
        rep.analytic_at_worst = a;
        rep.numeric_at_worst = *numeric;
      }
    }
  }
  rep.passed = std::isfinite(rep.max_error) && rep.max_error < opts.tolerance && rep.n_at_kink == 0;
  return rep;
}

DepthNet gradcheck_network(std::uint64_t seed) {
  DepthNet net(seed, 1.0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> bias(-0.1, 0.1);
  auto& params = net.parameters();
  for (std::size_t l = 1; l < params.size(); l += 2)
    for (double& b : params[l].mutable_data()) b = bias(rng);
  return net;
}

std::vector<GradcheckReport> gradcheck_losses(std::uint64_t seed, Size2 size, const GradcheckOptions& opts) {
  ModelPair pair{gradcheck_network(seed), gradcheck_network(seed + 0x51ed), 0.999};
  pair.slow.set_requires_grad(false);
  Scene scene = Scene::random(seed);
  scene.headlight = 0.5;
  const double focal = static_cast<double>(std::max(size.width, size.height));
  const Camera cam = Camera::centered(focal, size);
  const auto path = linear_path(cam, {0.3, 0.1, 0.0}, 0.0, 2, 30.0);
  const ClipSample clip = trajectory(scene, path, size);

  const Image& image = clip.frames[0];
  const DepthMap& gt = clip.disparity[0];

  Rng rng(seed);
  const AugmentParams aug = AugmentParams::sample(rng, size);
  const ConsistencyTarget aug_target = augmentation_target(pair, image, aug);

  const FramePair fp = make_frame_pair(clip, 0, 1);
  const DepthMap temp_target = temporal_target(pair, fp, MaskConfig{});
  if (temp_target.valid.count() == 0)
    throw std::runtime_error("gradcheck: empty correspondence mask on the oracle pair");

  std::vector<GradcheckReport> out;
  out.push_back(gradcheck(
      pair.fast, [&](const DepthNet& net) { return loss_against_target(net, image, gt); }, opts, "sup"));
  out.push_back(gradcheck(
      pair.fast,
      [&](const DepthNet& net) { return loss_against_target(net, aug_target.student_input, aug_target.target); },
      opts, "aug"));
  out.push_back(gradcheck(
      pair.fast, [&](const DepthNet& net) { return loss_against_target(net, fp.frame_a, temp_target); }, opts,
      "temp"));
  return out;
}

}  // namespace reldepth
