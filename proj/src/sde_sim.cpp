#include "poclab/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "poclab/reflect.hpp"

namespace poclab {

std::string tie_rule_name(TieRule rule) {
  switch (rule) {
    case TieRule::index_tiebreak:
      return "index-tiebreak";
    case TieRule::reverse_index_tiebreak:
      return "reverse-index-tiebreak";
    case TieRule::block_average:
      return "block-average";
    case TieRule::random_shuffle:
      return "random-shuffle";
  }
  return "?";
}

TieRule tie_rule_from_name(const std::string& name) {
  if (name == "index-tiebreak") return TieRule::index_tiebreak;
  if (name == "reverse-index-tiebreak") return TieRule::reverse_index_tiebreak;
  if (name == "block-average") return TieRule::block_average;
  if (name == "random-shuffle") return TieRule::random_shuffle;
  throw std::invalid_argument("unknown tie rule: " + name);
}

namespace {

// beta[i] = b at the rank assigned to i by the rule; ties detected by
// exact equality (reflection pins states to 0 exactly, which is where
// ties actually occur).
void select_drift(std::span<const double> x, std::span<const double> b,
                  TieRule rule, RngStream& shuffle_rng, std::span<int> order,
                  std::span<double> beta) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int c) {
    if (x[a] != x[c]) return x[a] < x[c];
    return a < c;
  });
  int k = 0;
  while (k < n) {
    int j = k;
    while (j < n && x[order[j]] == x[order[k]]) ++j;
    switch (rule) {
      case TieRule::index_tiebreak:
        for (int pos = k; pos < j; ++pos) beta[order[pos]] = b[pos];
        break;
      case TieRule::reverse_index_tiebreak:
        for (int pos = k; pos < j; ++pos) beta[order[pos]] = b[k + j - 1 - pos];
        break;
      case TieRule::block_average: {
        double mean = 0.0;
        for (int pos = k; pos < j; ++pos) mean += b[pos];
        mean /= static_cast<double>(j - k);
        for (int pos = k; pos < j; ++pos) beta[order[pos]] = mean;
        break;
      }
      case TieRule::random_shuffle: {
        // Fisher-Yates over the block's rank range.
        const int sz = j - k;
        std::vector<int> perm(sz);
        for (int q = 0; q < sz; ++q) perm[q] = k + q;
        for (int q = sz - 1; q > 0; --q) {
          const int r = static_cast<int>(shuffle_rng.next_u64() %
                                         static_cast<std::uint64_t>(q + 1));
          std::swap(perm[q], perm[r]);
        }
        for (int pos = k; pos < j; ++pos) beta[order[pos]] = b[perm[pos - k]];
        break;
      }
    }
    k = j;
  }
}

SdePath integrate_core(const DiffusionParams& dp, double T, double dt,
                       std::uint64_t seed,
                       const std::vector<std::vector<double>>* noise,
                       bool reflected, TieRule rule,
                       std::span<const double> x0,
                       std::uint64_t shuffle_seed) {
  dp.validate();
  const int N = static_cast<int>(dp.b.size());
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("integrate: T must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("integrate: dt must be positive");
  const std::int64_t steps = std::llround(T / dt);
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - T) >
                       1e-9 * std::max(T, 1.0))
    throw std::invalid_argument("integrate: dt must divide T within rounding");
  if (static_cast<int>(x0.size()) != N)
    throw std::invalid_argument("integrate: x0 size mismatch");
  for (double v : x0) {
    if (!std::isfinite(v))
      throw std::invalid_argument("integrate: non-finite x0");
    if (reflected && v < 0.0)
      throw std::invalid_argument("integrate: reflected mode requires x0 >= 0");
  }
  if (noise != nullptr) {
    if (static_cast<int>(noise->size()) != N)
      throw std::invalid_argument("integrate: noise coordinate count mismatch");
    for (const auto& row : *noise) {
      if (row.size() != static_cast<std::size_t>(steps))
        throw std::invalid_argument("integrate: noise step count mismatch");
    }
  }

  const std::size_t K = static_cast<std::size_t>(steps);
  SdePath path;
  path.N = N;
  path.dt = dt;
  path.horizon = T;
  path.seed = seed;
  path.rule = rule;
  path.reflected = reflected;
  path.t.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    path.t[k] = static_cast<double>(k) * dt;
  path.x.assign(N, std::vector<double>(K + 1, 0.0));
  path.l.assign(N, std::vector<double>(K + 1, 0.0));
  path.beta.assign(N, std::vector<double>(K, 0.0));
  path.db.assign(N, std::vector<double>(K, 0.0));

  std::vector<RngStream> noise_rng;
  noise_rng.reserve(N);
  for (int i = 0; i < N; ++i)
    noise_rng.emplace_back(seed, Stream::sde_noise,
                           static_cast<std::uint32_t>(i));
  RngStream shuffle_rng(noise == nullptr ? seed : shuffle_seed,
                        Stream::sde_shuffle);
  const double sqrt_dt = std::sqrt(dt);

  std::vector<double> X(x0.begin(), x0.end());
  std::vector<double> L(N, 0.0), beta(N, 0.0);
  std::vector<int> order(N);
  for (int i = 0; i < N; ++i) path.x[i][0] = X[i];

  for (std::size_t k = 0; k < K; ++k) {
    select_drift(X, dp.b, rule, shuffle_rng, order, beta);
    for (int i = 0; i < N; ++i) {
      const double db = noise != nullptr
                            ? (*noise)[i][k]
                            : sqrt_dt * noise_rng[i].normal_at(k);
      const double incr = dp.sigma[i] * db + (dp.m[i] + beta[i]) * dt;
      if (reflected) {
        const auto [x_new, dl] = reflect_step(X[i], incr);
        X[i] = x_new;
        L[i] += dl;
      } else {
        X[i] += incr;
      }
      path.beta[i][k] = beta[i];
      path.db[i][k] = db;
      path.x[i][k + 1] = X[i];
      path.l[i][k + 1] = L[i];
    }
  }
  return path;
}

}  // namespace

SdePath integrate(const DiffusionParams& dp, double T, double dt,
                  std::uint64_t seed, bool reflected, TieRule rule,
                  std::span<const double> x0) {
  return integrate_core(dp, T, dt, seed, nullptr, reflected, rule, x0, 0);
}

SdePath integrate_with_noise(const DiffusionParams& dp, double T, double dt,
                             const std::vector<std::vector<double>>& db,
                             bool reflected, TieRule rule,
                             std::span<const double> x0,
                             std::uint64_t shuffle_seed) {
  return integrate_core(dp, T, dt, 0, &db, reflected, rule, x0, shuffle_seed);
}

CoupledPaths integrate_coupled(const DiffusionParams& dp, double T, double dt,
                               std::uint64_t seed, bool reflected,
                               TieRule rule_a, TieRule rule_b,
                               std::span<const double> x0) {
  CoupledPaths out;
  out.a = integrate(dp, T, dt, seed, reflected, rule_a, x0);
  out.b = integrate(dp, T, dt, seed, reflected, rule_b, x0);
  double gap_sq = 0.0;
  const std::size_t K = out.a.t.size();
  for (std::size_t k = 0; k < K; ++k) {
    double d2 = 0.0;
    for (int i = 0; i < out.a.N; ++i) {
      const double d = out.a.x[i][k] - out.b.x[i][k];
      d2 += d * d;
    }
    gap_sq = std::max(gap_sq, d2);
  }
  out.gap = std::sqrt(gap_sq);
  return out;
}

double occupation_near_tie(const SdePath& path, int i, int j, double eps) {
  if (i == j) throw std::invalid_argument("occupation_near_tie: i == j");
  if (i < 0 || j < 0 || i >= path.N || j >= path.N)
    throw std::invalid_argument("occupation_near_tie: coordinate out of range");
  const std::size_t K = path.t.size() - 1;
  std::size_t count = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (std::abs(path.x[i][k] - path.x[j][k]) <= eps) ++count;
  }
  return path.dt * static_cast<double>(count);
}

double occupation_near_tie(const ScaledPath& path, int i, int j, double eps) {
  if (i == j) throw std::invalid_argument("occupation_near_tie: i == j");
  if (i < 0 || j < 0 || i >= path.N || j >= path.N)
    throw std::invalid_argument("occupation_near_tie: coordinate out of range");
  // Queue paths are constant between grid times.
  double occ = 0.0;
  for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
    if (std::abs(path.xhat[i][k] - path.xhat[j][k]) <= eps)
      occ += path.t[k + 1] - path.t[k];
  }
  return occ;
}

double occupation_near_tie(std::span<const double> t,
                           std::span<const double> xi,
                           std::span<const double> xj, double eps) {
  if (t.size() != xi.size() || t.size() != xj.size())
    throw std::invalid_argument("occupation_near_tie: size mismatch");
  double occ = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double len = t[k + 1] - t[k];
    if (len <= 0.0) continue;
    const double d0 = xi[k] - xj[k];
    const double d1 = xi[k + 1] - xj[k + 1];
    if (d0 == d1) {
      if (std::abs(d0) <= eps) occ += len;
      continue;
    }
    // |d0 + s (d1 - d0)| <= eps on s in [0, 1].
    const double slope = d1 - d0;
    double s_lo = (-eps - d0) / slope;
    double s_hi = (eps - d0) / slope;
    if (s_lo > s_hi) std::swap(s_lo, s_hi);
    const double lo = std::max(0.0, s_lo);
    const double hi = std::min(1.0, s_hi);
    if (hi > lo) occ += (hi - lo) * len;
  }
  return occ;
}

}  // namespace poclab
