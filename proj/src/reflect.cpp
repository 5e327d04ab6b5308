#include "poclab/reflect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poclab {

ReflectedPair skorokhod_map(std::span<const double> t,
                            std::span<const double> y) {
  if (t.empty()) throw std::invalid_argument("skorokhod_map: empty grid");
  if (t.size() != y.size())
    throw std::invalid_argument("skorokhod_map: grid/path size mismatch");
  ReflectedPair out;
  out.t.assign(t.begin(), t.end());
  out.x.resize(y.size());
  out.z.resize(y.size());
  double running = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!std::isfinite(y[k]))
      throw std::invalid_argument("skorokhod_map: non-finite path value");
    if (k > 0 && t[k] < t[k - 1])
      throw std::invalid_argument("skorokhod_map: decreasing grid");
    running = std::max(running, -y[k]);
    out.z[k] = running;
    out.x[k] = y[k] + running;
  }
  return out;
}

std::pair<double, double> reflect_step(double x_prev, double increment) {
  const double proposed = x_prev + increment;
  if (proposed >= 0.0) return {proposed, 0.0};
  return {0.0, -proposed};
}

bool is_reflected_pair(std::span<const double> t, std::span<const double> y,
                       std::span<const double> x, std::span<const double> z,
                       double tol) {
  const std::size_t n = t.size();
  if (n == 0 || y.size() != n || x.size() != n || z.size() != n) return false;
  double scale = 1.0;
  for (std::size_t k = 0; k < n; ++k) scale = std::max(scale, std::abs(y[k]));
  double complementarity = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && t[k] < t[k - 1]) return false;
    if (x[k] < -tol * scale) return false;
    if (std::abs(x[k] - (y[k] + z[k])) > tol * scale) return false;
    const double dz = k == 0 ? z[0] - std::max(0.0, -y[0]) : z[k] - z[k - 1];
    if (k > 0 && dz < -tol * scale) return false;
    if (k == 0 && std::abs(dz) > tol * scale) return false;
    if (k > 0) complementarity += x[k] * std::max(dz, 0.0);
  }
  return complementarity <= tol * scale * scale;
}

}  // namespace poclab
