#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

std::vector<double> conv2d(std::span<const double> input, std::size_t c, std::size_t h, std::size_t w,
                           std::span<const double> weights, std::size_t o, std::size_t k,
                           std::span<const double> bias) {
  const long r = static_cast<long>(k / 2);
  std::vector<double> out(o * h * w, 0.0);
  for (std::size_t oc = 0; oc < o; ++oc)
    for (long y = 0; y < static_cast<long>(h); ++y)
      for (long x = 0; x < static_cast<long>(w); ++x) {
        double s = bias[oc];
        for (std::size_t ic = 0; ic < c; ++ic)
          for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx) {
              const long yy = y + dy, xx = x + dx;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              const double wv = weights[((oc * c + ic) * k + static_cast<std::size_t>(dy + r)) * k +
                                        static_cast<std::size_t>(dx + r)];
              s += wv * input[(ic * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)];
            }
        out[(oc * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] = s;
      }
  return out;
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double population_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double ssimae(const DepthMap& pred, const DepthMap& gt) {
  std::vector<double> p, g;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.valid[i] && pred.valid[i]) {
      p.push_back(pred.values[i]);
      g.push_back(gt.values[i]);
    }
  const double med = median(g), sd = population_std(g);
  for (double& v : g) v = (v - med) / sd;
  const double n = static_cast<double>(p.size());

  auto offset = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += g[i] - a * p[i];
    return s / n;
  };
  auto sse = [&](double a) {
    const double b = offset(a);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (a * p[i] + b - g[i]) * (a * p[i] + b - g[i]);
    return s;
  };
  const double pspread = population_std(p);
  const double span = 10.0 / std::max(pspread, 1e-6);
  double lo = -span, hi = span;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (sse(a) < sse(b))
      hi = b;
    else
      lo = a;
  }
  const double alpha = 0.5 * (lo + hi), beta = offset(alpha);
  double mae = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mae += std::abs(alpha * p[i] + beta - g[i]);
  return mae / n;
}

bool bilinear(const DepthMap& map, double x, double y, double* out) {
  const double W = static_cast<double>(map.size.width), H = static_cast<double>(map.size.height);
  if (!(x >= 0 && y >= 0 && x <= W - 1 && y <= H - 1)) return false;
  const double x0 = std::floor(x), y0 = std::floor(y);
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double wx = dx ? x - x0 : 1.0 - (x - x0);
      const double wy = dy ? y - y0 : 1.0 - (y - y0);
      if (wx * wy == 0.0) continue;
      const auto xi = static_cast<std::size_t>(x0) + static_cast<std::size_t>(dx);
      const auto yi = static_cast<std::size_t>(y0) + static_cast<std::size_t>(dy);
      if (!map.is_valid(yi, xi)) return false;
      acc += wx * wy * map.at(yi, xi);
    }
  *out = acc;
  return true;
}

double chi_square_uniform(const std::vector<std::size_t>& counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double e = total / static_cast<double>(counts.size());
  double s = 0.0;
  for (std::size_t c : counts) s += (static_cast<double>(c) - e) * (static_cast<double>(c) - e) / e;
  return s;
}

double chi_square_quantile_999(std::size_t dof) {
  const double k = static_cast<double>(dof);
  const double z = 3.090232306167813;  // standard normal 0.999 quantile
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("reldepth_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
