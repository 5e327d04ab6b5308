#include "poclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poclab {

SampleSet SampleSet::scalars(std::vector<double> v, std::string label) {
  SampleSet s;
  s.values.reserve(v.size());
  for (double x : v) s.values.push_back({x});
  s.label = std::move(label);
  return s;
}

std::size_t SampleSet::dim() const {
  return values.empty() ? 0 : values.front().size();
}

std::vector<double> SampleSet::as_scalars() const {
  if (dim() != 1)
    throw std::invalid_argument("SampleSet: expected scalar samples");
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v[0]);
  return out;
}

void SampleSet::validate() const {
  if (values.empty()) throw std::invalid_argument("SampleSet: empty");
  const std::size_t d = values.front().size();
  for (const auto& v : values) {
    if (v.size() != d)
      throw std::invalid_argument("SampleSet: inconsistent dimensions");
  }
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double inv_m = 1.0 / static_cast<double>(sa.size());
  const double inv_n = 1.0 / static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) * inv_m -
                             static_cast<double>(j) * inv_n));
  }
  return d;
}

double ks_statistic(const SampleSet& a, const SampleSet& b) {
  a.validate();
  b.validate();
  return ks_statistic(std::span<const double>(a.as_scalars()),
                      std::span<const double>(b.as_scalars()));
}

double ks_critical_5pct(std::size_t m1, std::size_t m2) {
  return 1.358 * std::sqrt(1.0 / static_cast<double>(m1) +
                           1.0 / static_cast<double>(m2));
}

std::vector<SampleSet> ranked_marginals(
    const std::vector<std::vector<double>>& terminals) {
  if (terminals.empty())
    throw std::invalid_argument("ranked_marginals: empty collection");
  const std::size_t N = terminals.front().size();
  std::vector<SampleSet> out(N);
  for (std::size_t r = 0; r < N; ++r) {
    out[r].label = "rank" + std::to_string(r + 1);
    out[r].values.reserve(terminals.size());
  }
  std::vector<double> sorted;
  for (const auto& v : terminals) {
    if (v.size() != N)
      throw std::invalid_argument("ranked_marginals: inconsistent dimensions");
    sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t r = 0; r < N; ++r) out[r].values.push_back({sorted[r]});
  }
  return out;
}

double idle_fraction(std::span<const double> max_terminal_lhat) {
  if (max_terminal_lhat.empty())
    throw std::invalid_argument("idle_fraction: empty collection");
  std::size_t idled = 0;
  for (double v : max_terminal_lhat) {
    if (v > 0.0) ++idled;
  }
  return static_cast<double>(idled) /
         static_cast<double>(max_terminal_lhat.size());
}

double modulus_of_continuity(std::span<const double> t,
                             std::span<const double> f, double delta) {
  if (t.size() != f.size() || t.empty())
    throw std::invalid_argument("modulus_of_continuity: bad input");
  if (!(delta > 0.0))
    throw std::invalid_argument("modulus_of_continuity: delta must be positive");
  double w = 0.0;
  std::size_t lo = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    while (t[k] - t[lo] > delta) ++lo;
    for (std::size_t j = lo; j < k; ++j)
      w = std::max(w, std::abs(f[k] - f[j]));
  }
  return w;
}

}  // namespace poclab
