#include "poclab/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace poclab {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw std::invalid_argument(field + ": " + msg);
}

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(what, "non-finite entry");
  }
}

std::uint64_t ipow_u64(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::uint64_t binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;  // the running product can exceed 64 bits
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned __int128>(n - k + i) /
        static_cast<unsigned __int128>(i);
  }
  return static_cast<std::uint64_t>(c);
}

template <class T>
std::vector<int> rank_vector_impl(std::span<const T> x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return a < b;
  });
  std::vector<int> ranks(n);
  for (int k = 0; k < n; ++k) ranks[order[k]] = k + 1;
  return ranks;
}

}  // namespace

ServiceLaw ServiceLaw::erlang(int k) {
  if (k < 1) fail("service.k", "Erlang shape must be >= 1");
  ServiceLaw law;
  law.family = Family::erlang;
  law.shape = k;
  return law;
}

ServiceLaw ServiceLaw::hyperexp2(double cv) {
  if (!(cv >= 1.0)) fail("service.cv", "hyperexp2 requires cv >= 1");
  ServiceLaw law;
  law.family = Family::hyperexp2;
  law.cv = cv;
  return law;
}

ServiceLaw ServiceLaw::lognormal(double cv) {
  if (!(cv > 0.0)) fail("service.cv", "lognormal requires cv > 0");
  ServiceLaw law;
  law.family = Family::lognormal;
  law.cv = cv;
  return law;
}

double ServiceLaw::coeff_variation() const {
  switch (family) {
    case Family::exponential:
      return 1.0;
    case Family::erlang:
      return 1.0 / std::sqrt(static_cast<double>(shape));
    case Family::hyperexp2:
    case Family::lognormal:
      return cv;
  }
  return 1.0;
}

double ServiceLaw::sample_unit_mean(RngStream& rng) const {
  switch (family) {
    case Family::exponential:
      return rng.exponential(1.0);
    case Family::erlang: {
      double s = 0.0;
      for (int j = 0; j < shape; ++j) s += rng.exponential(1.0);
      return s / static_cast<double>(shape);
    }
    case Family::hyperexp2: {
      // Balanced-means two-phase mixture with squared CV = cv^2.
      const double c2 = cv * cv;
      const double eta = std::sqrt((c2 - 1.0) / (c2 + 1.0));
      const double p1 = 0.5 * (1.0 + eta);
      const double branch = rng.uniform();
      const double rate = (branch < p1) ? 2.0 * p1 : 2.0 * (1.0 - p1);
      return rng.exponential(rate);
    }
    case Family::lognormal: {
      const double s2 = std::log1p(cv * cv);
      return std::exp(-0.5 * s2 + std::sqrt(s2) * rng.normal());
    }
  }
  return 1.0;
}

std::string ServiceLaw::name() const {
  switch (family) {
    case Family::exponential:
      return "exponential";
    case Family::erlang:
      return "erlang(" + std::to_string(shape) + ")";
    case Family::hyperexp2:
      return "hyperexp2(cv=" + std::to_string(cv) + ")";
    case Family::lognormal:
      return "lognormal(cv=" + std::to_string(cv) + ")";
  }
  return "?";
}

double ModelParams::sqrt_n() const {
  return std::sqrt(static_cast<double>(n));
}

double ModelParams::lambda_n(int i) const {
  return static_cast<double>(n) * lambda[i] + sqrt_n() * lambda_hat[i];
}

double ModelParams::mu_n(int i) const {
  return static_cast<double>(n) * mu[i] + sqrt_n() * mu_hat[i];
}

double ModelParams::lambda0_n() const { return sqrt_n() * lambda0_hat; }

std::int64_t ModelParams::alpha_n() const {
  if (ic.alpha > 0) return ic.alpha;
  return std::llround(std::pow(static_cast<double>(n), 0.75));
}

std::vector<std::int64_t> ModelParams::initial_x0() const {
  if (ic.x0_at_alpha)
    return std::vector<std::int64_t>(static_cast<std::size_t>(N), alpha_n());
  return ic.x0;
}

void ModelParams::validate() const {
  if (N < 1) fail("model.N", "must be a positive integer");
  if (n < 1) fail("model.n", "must be a positive integer");
  const auto check_size = [&](const auto& v, const char* field) {
    if (static_cast<int>(v.size()) != N)
      fail(field, "expected " + std::to_string(N) + " entries, got " +
                      std::to_string(v.size()));
  };
  check_size(lambda, "model.lambda");
  check_size(lambda_hat, "model.lambda_hat");
  check_size(mu, "model.mu");
  check_size(mu_hat, "model.mu_hat");
  check_size(sigma_ser, "model.sigma_ser");
  check_size(p, "model.p");
  check_size(service, "model.service");

  for (int i = 0; i < N; ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    if (!(lambda[i] > 0.0)) fail("model.lambda" + idx, "must be positive");
    if (!(mu[i] > 0.0)) fail("model.mu" + idx, "must be positive");
    if (lambda[i] != mu[i])
      fail("model.lambda" + idx, "critical load requires lambda == mu");
    if (!std::isfinite(lambda_hat[i]))
      fail("model.lambda_hat" + idx, "must be finite");
    if (!std::isfinite(mu_hat[i])) fail("model.mu_hat" + idx, "must be finite");
    if (lambda_n(i) < 0.0)
      fail("model.lambda_hat" + idx, "effective arrival rate is negative");
    if (!(mu_n(i) > 0.0))
      fail("model.mu_hat" + idx, "effective service rate must be positive");
    if (!(sigma_ser[i] > 0.0)) fail("model.sigma_ser" + idx, "must be positive");
    const double cv = service[i].coeff_variation();
    if (std::abs(sigma_ser[i] - cv) > 1e-9 * (1.0 + cv))
      fail("model.sigma_ser" + idx,
           "inconsistent with service law (cv = " + std::to_string(cv) + ")");
  }
  if (!(lambda0_hat >= 0.0) || !std::isfinite(lambda0_hat))
    fail("model.lambda0_hat", "must be a nonnegative real");

  double psum = 0.0;
  for (int r = 0; r < N; ++r) {
    const std::string idx = "[" + std::to_string(r) + "]";
    if (!(p[r] >= 0.0)) fail("model.p" + idx, "must be nonnegative");
    if (r > 0 && p[r] > p[r - 1])
      fail("model.p" + idx, "probability vector must be nonincreasing");
    psum += p[r];
  }
  if (std::abs(psum - 1.0) > 1e-12)
    fail("model.p", "must sum to 1 (got " + std::to_string(psum) + ")");

  if (ic.x0_at_alpha && ic.regime != IcSpec::Regime::ic_alpha)
    fail("model.ic.x0", "\"alpha\" initial queues require the ic_alpha regime");
  if (!ic.x0_at_alpha && static_cast<int>(ic.x0.size()) != N)
    fail("model.ic.x0", "expected " + std::to_string(N) + " entries");
  const std::vector<std::int64_t> x0 = initial_x0();
  for (int i = 0; i < N; ++i) {
    if (x0[i] < 0)
      fail("model.ic.x0[" + std::to_string(i) + "]", "must be nonnegative");
  }
  if (ic.regime == IcSpec::Regime::ic_alpha && !(alpha_n() >= 1))
    fail("model.ic.alpha", "must be >= 1");
  if (ic.residual == IcSpec::ResidualPolicy::explicit_values) {
    if (static_cast<int>(ic.z0.size()) != N)
      fail("model.ic.z0", "expected " + std::to_string(N) + " entries");
    for (int i = 0; i < N; ++i) {
      if (x0[i] > 0 && !(ic.z0[i] > 0.0))
        fail("model.ic.z0[" + std::to_string(i) + "]",
             "must be positive for a nonempty queue");
    }
  } else if (!(ic.residual_scale > 0.0)) {
    fail("model.ic.residual_scale", "must be positive");
  }
}

void DiffusionParams::validate() const {
  const std::size_t N = b.size();
  if (N == 0) fail("diffusion.b", "must be nonempty");
  if (m.size() != N) fail("diffusion.m", "size mismatch with b");
  if (sigma.size() != N) fail("diffusion.sigma", "size mismatch with b");
  require_finite(b, "diffusion.b");
  require_finite(m, "diffusion.m");
  for (std::size_t r = 0; r + 1 < N; ++r) {
    if (b[r] < b[r + 1])
      fail("diffusion.b", "rank drifts must be nonincreasing");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
      fail("diffusion.sigma[" + std::to_string(i) + "]", "must be positive");
  }
  if (!x0.empty() && x0.size() != N)
    fail("diffusion.x0", "size mismatch with b");
}

DiffusionParams diffusion_params(const ModelParams& mp) {
  mp.validate();
  DiffusionParams dp;
  dp.b.resize(mp.N);
  dp.m.resize(mp.N);
  dp.sigma.resize(mp.N);
  dp.x0.resize(mp.N);
  const double scale = 1.0 / mp.sqrt_n();
  const double alpha =
      mp.ic.regime == IcSpec::Regime::ic_alpha ? static_cast<double>(mp.alpha_n()) : 0.0;
  const std::vector<std::int64_t> x0 = mp.initial_x0();
  for (int i = 0; i < mp.N; ++i) {
    dp.b[i] = mp.lambda0_hat * mp.p[i];
    dp.m[i] = mp.lambda_hat[i] - mp.mu_hat[i];
    dp.sigma[i] =
        std::sqrt(mp.lambda[i] + mp.mu[i] * mp.sigma_ser[i] * mp.sigma_ser[i]);
    dp.x0[i] = scale * (static_cast<double>(x0[i]) - alpha);
  }
  return dp;
}

std::vector<int> rank_vector(std::span<const double> x) {
  require_finite(x, "rank_vector input");
  return rank_vector_impl(x);
}

std::vector<int> rank_vector(std::span<const std::int64_t> x) {
  return rank_vector_impl(x);
}

void rank_inplace(std::span<const std::int64_t> x, std::span<int> order,
                  std::span<int> ranks) {
  const int n = static_cast<int>(x.size());
  // Insertion sort on indices; n is small and states change little.
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 1; i < n; ++i) {
    const int key = order[i];
    int j = i - 1;
    while (j >= 0 &&
           (x[order[j]] > x[key] || (x[order[j]] == x[key] && order[j] > key))) {
      order[j + 1] = order[j];
      --j;
    }
    order[j + 1] = key;
  }
  for (int k = 0; k < n; ++k) ranks[order[k]] = k + 1;
}

std::vector<double> poc_probabilities(int N, int ell, bool with_replacement) {
  if (N < 1) fail("poc_probabilities.N", "must be positive");
  if (ell < 1 || ell > N)
    fail("poc_probabilities.ell", "must lie in [1, N]");
  std::vector<double> p(N);
  if (!with_replacement) {
    const double denom = static_cast<double>(binom_u64(N, ell));
    for (int r = 1; r <= N; ++r)
      p[r - 1] = static_cast<double>(binom_u64(N - r, ell - 1)) / denom;
    return p;
  }
  // (N-r+1)^ell fits in 64 bits for every configuration exercised at desk
  // scale; fall back to pow for the rest.
  const bool exact =
      ell * std::log2(static_cast<double>(N)) < 62.0;
  if (exact) {
    const double denom = static_cast<double>(ipow_u64(N, ell));
    std::uint64_t prev = ipow_u64(N, ell);
    for (int r = 1; r <= N; ++r) {
      const std::uint64_t next = ipow_u64(static_cast<std::uint64_t>(N - r), ell);
      p[r - 1] = static_cast<double>(prev - next) / denom;
      prev = next;
    }
  } else {
    double prev = 1.0;
    for (int r = 1; r <= N; ++r) {
      const double next =
          std::pow(static_cast<double>(N - r) / static_cast<double>(N), ell);
      p[r - 1] = prev - next;
      prev = next;
    }
  }
  return p;
}

std::vector<TieBlock> tie_blocks(std::span<const double> x) {
  require_finite(x, "tie_blocks input");
  const int n = static_cast<int>(x.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return a < b;
  });
  std::vector<TieBlock> blocks;
  int k = 0;
  while (k < n) {
    int j = k;
    while (j < n && x[order[j]] == x[order[k]]) ++j;
    TieBlock block;
    block.rank_lo = k + 1;
    block.members.assign(order.begin() + k, order.begin() + j);
    std::sort(block.members.begin(), block.members.end());
    blocks.push_back(std::move(block));
    k = j;
  }
  return blocks;
}

std::vector<std::vector<int>> permissible_permutations(
    std::span<const double> x) {
  constexpr int kEnumerationCap = 8;
  if (static_cast<int>(x.size()) > kEnumerationCap)
    throw std::length_error(
        "permissible_permutations: N > 8; use in_drift_hull for membership "
        "queries instead of enumeration");
  const auto blocks = tie_blocks(x);
  std::vector<std::vector<int>> result;
  std::vector<int> current(x.size(), 0);
  // Cartesian product of within-block rank assignments.
  const auto recurse = [&](auto&& self, std::size_t bi) -> void {
    if (bi == blocks.size()) {
      result.push_back(current);
      return;
    }
    const auto& block = blocks[bi];
    const int sz = static_cast<int>(block.members.size());
    std::vector<int> ranks(sz);
    std::iota(ranks.begin(), ranks.end(), block.rank_lo);
    do {
      for (int j = 0; j < sz; ++j) current[block.members[j]] = ranks[j];
      self(self, bi + 1);
    } while (std::next_permutation(ranks.begin(), ranks.end()));
  };
  recurse(recurse, 0);
  std::sort(result.begin(), result.end());
  return result;
}

double default_hull_tol(std::span<const double> b) {
  double mx = 0.0;
  for (double v : b) mx = std::max(mx, std::abs(v));
  return 1e-9 * (1.0 + mx);
}

bool in_drift_hull(std::span<const double> beta, std::span<const double> x,
                   std::span<const double> b, double tol) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(beta.size()) != n || static_cast<int>(b.size()) != n)
    fail("in_drift_hull", "beta, x, b must have equal length");
  if (!(tol >= 0.0)) fail("in_drift_hull.tol", "must be nonnegative");
  require_finite(beta, "in_drift_hull.beta");
  for (int r = 0; r + 1 < n; ++r) {
    if (b[r] < b[r + 1]) fail("in_drift_hull.b", "must be nonincreasing");
  }
  // The permissible set factors over tie blocks, so membership does too:
  // on each block the restriction of beta must lie in the permutohedron of
  // the block's b-values, i.e. be majorized by them.
  for (const TieBlock& block : tie_blocks(x)) {
    const int sz = static_cast<int>(block.members.size());
    std::vector<double> w(sz);
    for (int j = 0; j < sz; ++j) w[j] = beta[block.members[j]];
    std::sort(w.begin(), w.end(), std::greater<>());
    double beta_sum = 0.0;
    double b_sum = 0.0;
    for (int j = 0; j < sz; ++j) {
      beta_sum += w[j];
      b_sum += b[block.rank_lo - 1 + j];  // b is nonincreasing already
      if (j + 1 < sz && beta_sum > b_sum + tol) return false;
    }
    if (std::abs(beta_sum - b_sum) > tol) return false;
  }
  return true;
}

}  // namespace poclab
