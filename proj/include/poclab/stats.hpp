#pragma once

#include <span>
#include <string>
#include <vector>

namespace poclab {

// Per-replication terminal or functional statistics.
struct SampleSet {
  std::vector<std::vector<double>> values;
  std::string label;
  std::string meta;

  static SampleSet scalars(std::vector<double> v, std::string label = "");
  std::size_t dim() const;
  std::vector<double> as_scalars() const;  // throws unless dim() == 1
  void validate() const;
};

// Exact two-sample Kolmogorov-Smirnov statistic sup_x |F_a - F_b|.
double ks_statistic(const SampleSet& a, const SampleSet& b);
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Asymptotic two-sample critical value c(alpha) * sqrt(1/m1 + 1/m2);
// only the 5% constant 1.358 is needed here.
double ks_critical_5pct(std::size_t m1, std::size_t m2);

// Sorts every terminal vector ascending and groups by rank, giving a
// label-free view of the joint terminal distribution.
std::vector<SampleSet> ranked_marginals(
    const std::vector<std::vector<double>>& terminals);

// Fraction of replications whose maximal terminal local time is positive.
double idle_fraction(std::span<const double> max_terminal_lhat);

// w_t(f, delta) over grid pairs: sup{ |f(u)-f(s)| : |u-s| <= delta }.
double modulus_of_continuity(std::span<const double> t,
                             std::span<const double> f, double delta);

// One verdict of the harness, serializable to the JSON report.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string comparison = "<=";  // how value relates to threshold on pass
  std::vector<std::size_t> sample_sizes;
  std::vector<std::uint64_t> seeds;
};

}  // namespace poclab
