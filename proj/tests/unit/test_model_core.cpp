#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "poclab/model.hpp"
#include "poclab/rng.hpp"

using namespace poclab;

namespace {

// Independent route: enumerate every sample of ell queues and route to the
// smallest sampled rank, counting exactly.
std::vector<double> poc_oracle(int N, int ell, bool with_replacement) {
  std::vector<std::uint64_t> count(N, 0);
  std::uint64_t total = 0;
  if (with_replacement) {
    std::vector<int> pick(ell, 0);  // odometer over ordered tuples
    for (;;) {
      int min_rank = N;
      for (int v : pick) min_rank = std::min(min_rank, v + 1);
      count[min_rank - 1] += 1;
      total += 1;
      int d = ell - 1;
      while (d >= 0 && ++pick[d] == N) pick[d--] = 0;
      if (d < 0) break;
    }
  } else {
    std::vector<int> pick(ell);
    std::iota(pick.begin(), pick.end(), 0);
    for (;;) {
      count[pick.front()] += 1;  // sorted, so front is the min rank - 1
      total += 1;
      int d = ell - 1;
      while (d >= 0 && pick[d] == N - ell + d) --d;
      if (d < 0) break;
      ++pick[d];
      for (int j = d + 1; j < ell; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  std::vector<double> p(N);
  for (int r = 0; r < N; ++r)
    p[r] = static_cast<double>(count[r]) / static_cast<double>(total);
  return p;
}

// Brute-force filter of all N! permutations against the defining relation.
std::vector<std::vector<int>> permissible_oracle(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j < n && ok; ++j) {
        if (x[i] < x[j] && perm[i] >= perm[j]) ok = false;
      }
    }
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(out.begin(), out.end());
  return out;
}

// Facet description of the hull: on every tie block, every subset sum of
// beta must be dominated by the same count of largest b-values.
bool hull_oracle(const std::vector<double>& beta, const std::vector<double>& x,
                 const std::vector<double>& b, double tol) {
  for (const TieBlock& block : tie_blocks(x)) {
    const int sz = static_cast<int>(block.members.size());
    double total_beta = 0.0, total_b = 0.0;
    for (int j = 0; j < sz; ++j) {
      total_beta += beta[block.members[j]];
      total_b += b[block.rank_lo - 1 + j];
    }
    if (std::abs(total_beta - total_b) > tol) return false;
    for (int mask = 1; mask < (1 << sz) - 1; ++mask) {
      double s = 0.0;
      int bits = 0;
      for (int j = 0; j < sz; ++j) {
        if (mask & (1 << j)) {
          s += beta[block.members[j]];
          ++bits;
        }
      }
      double cap = 0.0;
      for (int j = 0; j < bits; ++j) cap += b[block.rank_lo - 1 + j];
      if (s > cap + tol) return false;
    }
  }
  return true;
}

std::vector<double> random_tied_vector(RngStream& rng, int n, int levels) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i)
    x[i] = static_cast<double>(rng.next_u64() % levels);
  return x;
}

}  // namespace

TEST_CASE("rank_vector reproduces the worked examples") {
  CHECK(rank_vector(std::vector<double>{1, 1, 2, 2, 3}) ==
        std::vector<int>{1, 2, 3, 4, 5});
  CHECK(rank_vector(std::vector<double>{1, 1, 3, 2, 2}) ==
        std::vector<int>{1, 2, 5, 3, 4});
  CHECK(rank_vector(std::vector<double>{3, 2, 1}) == std::vector<int>{3, 2, 1});
  CHECK_THROWS_AS(
      rank_vector(std::vector<double>{1.0, std::nan("")}),
      std::invalid_argument);
}

TEST_CASE("rank_vector matches its defining formula and is transform-invariant") {
  RngStream rng(11, Stream::scratch);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 9);
    const auto x = random_tied_vector(rng, n, 4);
    const auto ranks = rank_vector(std::span<const double>(x));
    std::vector<int> seen(n, 0);
    for (int i = 0; i < n; ++i) {
      int formula = 0;
      for (int j = 0; j < n; ++j) {
        if (x[j] < x[i]) ++formula;
        if (j <= i && x[j] == x[i]) ++formula;
      }
      CHECK(ranks[i] == formula);
      seen[ranks[i] - 1] += 1;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    // Strictly increasing transforms (here an exact scaling) keep ranks.
    std::vector<double> y(x);
    for (double& v : y) v = 4.0 * v + 1.0;
    CHECK(rank_vector(std::span<const double>(y)) == ranks);
  }
}

TEST_CASE("poc_probabilities worked examples") {
  const auto wr = poc_probabilities(2, 2, true);
  CHECK(wr[0] == 0.75);
  CHECK(wr[1] == 0.25);
  const auto wor = poc_probabilities(3, 2, false);
  CHECK(wor[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(wor[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(wor[2] == 0.0);
  for (bool mode : {true, false}) {
    const auto uni = poc_probabilities(5, 1, mode);
    for (double v : uni) CHECK(v == 0.2);
  }
  CHECK_THROWS_AS(poc_probabilities(3, 0, true), std::invalid_argument);
  CHECK_THROWS_AS(poc_probabilities(3, 4, true), std::invalid_argument);
}

TEST_CASE("poc_probabilities equals exact enumeration for N <= 6") {
  for (int N = 1; N <= 6; ++N) {
    for (int ell = 1; ell <= N; ++ell) {
      for (bool mode : {true, false}) {
        const auto impl = poc_probabilities(N, ell, mode);
        const auto oracle = poc_oracle(N, ell, mode);
        for (int r = 0; r < N; ++r) CHECK(impl[r] == oracle[r]);
      }
    }
  }
}

TEST_CASE("poc_probabilities is a nonincreasing probability vector up to N=64") {
  for (int N : {1, 2, 3, 8, 17, 33, 64}) {
    for (int ell : {1, 2, 3, (N + 1) / 2, N}) {
      if (ell < 1 || ell > N) continue;
      for (bool mode : {true, false}) {
        const auto p = poc_probabilities(N, ell, mode);
        double sum = 0.0;
        for (int r = 0; r < N; ++r) {
          sum += p[r];
          CHECK(p[r] >= 0.0);
          if (r > 0) CHECK(p[r] <= p[r - 1] + 1e-15);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("permissible_permutations worked examples") {
  CHECK(permissible_permutations(std::vector<double>{1, 2}) ==
        std::vector<std::vector<int>>{{1, 2}});
  CHECK(permissible_permutations(std::vector<double>{1, 1}) ==
        std::vector<std::vector<int>>{{1, 2}, {2, 1}});
  CHECK(permissible_permutations(std::vector<double>{2, 1, 1}) ==
        std::vector<std::vector<int>>{{3, 1, 2}, {3, 2, 1}});
  CHECK_THROWS_AS(permissible_permutations(std::vector<double>(9, 0.0)),
                  std::length_error);
}

TEST_CASE("permissible_permutations equals the brute-force filter") {
  RngStream rng(12, Stream::scratch);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 6);
    const auto x = random_tied_vector(rng, n, 3);
    CHECK(permissible_permutations(std::span<const double>(x)) ==
          permissible_oracle(x));
    // The rank permutation itself is always permissible.
    const auto ranks = rank_vector(std::span<const double>(x));
    const auto all = permissible_oracle(x);
    CHECK(std::find(all.begin(), all.end(), ranks) != all.end());
  }
}

TEST_CASE("in_drift_hull worked examples") {
  const std::vector<double> b{0.6, 0.4};
  const double tol = 1e-9;
  CHECK(in_drift_hull(std::vector<double>{0.6, 0.4}, std::vector<double>{1, 2},
                      b, tol));
  CHECK_FALSE(in_drift_hull(std::vector<double>{0.4, 0.6},
                            std::vector<double>{1, 2}, b, tol));
  CHECK(in_drift_hull(std::vector<double>{0.5, 0.5}, std::vector<double>{5, 5},
                      b, tol));
  const double eps = 1e-6;  // > tol
  CHECK_FALSE(in_drift_hull(std::vector<double>{0.6 + eps, 0.4 - eps},
                            std::vector<double>{5, 5}, b, tol));
  CHECK_THROWS_AS(in_drift_hull(std::vector<double>{0.4, 0.6},
                                std::vector<double>{1, 2},
                                std::vector<double>{0.4, 0.6}, tol),
                  std::invalid_argument);
}

TEST_CASE("in_drift_hull: vertices and convex combinations lie inside") {
  RngStream rng(13, Stream::scratch);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 5);
    const auto x = random_tied_vector(rng, n, 3);
    std::vector<double> b(n);
    double acc = 1.0 + rng.uniform();
    for (int r = 0; r < n; ++r) {
      b[r] = acc;
      acc -= rng.uniform() * 0.5;
    }
    const double tol = default_hull_tol(b);
    const auto perms = permissible_permutations(std::span<const double>(x));

    std::vector<double> combo(n, 0.0);
    std::vector<double> weights(perms.size());
    double wsum = 0.0;
    for (std::size_t k = 0; k < perms.size(); ++k) {
      weights[k] = rng.uniform();
      wsum += weights[k];
    }
    for (std::size_t k = 0; k < perms.size(); ++k) {
      std::vector<double> vertex(n);
      for (int i = 0; i < n; ++i) vertex[i] = b[perms[k][i] - 1];
      CHECK(in_drift_hull(vertex, x, b, 0.0));
      CHECK(hull_oracle(vertex, x, b, tol));
      for (int i = 0; i < n; ++i) combo[i] += weights[k] / wsum * vertex[i];
    }
    CHECK(in_drift_hull(combo, x, b, tol));
    CHECK(hull_oracle(combo, x, b, tol));

    // Perturbing a block sum leaves the hull.
    const auto blocks = tie_blocks(std::span<const double>(x));
    std::vector<double> outside = combo;
    outside[blocks.front().members.front()] += 1e-3;
    CHECK_FALSE(in_drift_hull(outside, x, b, tol));
    CHECK_FALSE(hull_oracle(outside, x, b, tol));
  }
}

TEST_CASE("in_drift_hull agrees with the subset-facet oracle on random beta") {
  RngStream rng(14, Stream::scratch);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 4);
    const auto x = random_tied_vector(rng, n, 2);
    std::vector<double> b(n);
    double acc = 1.0;
    for (int r = 0; r < n; ++r) {
      b[r] = acc;
      acc -= rng.uniform() * 0.4;
    }
    const double tol = default_hull_tol(b);
    std::vector<double> beta(n);
    for (int i = 0; i < n; ++i) beta[i] = b[i] + 0.3 * (rng.uniform() - 0.5);
    CHECK(in_drift_hull(beta, x, b, tol) == hull_oracle(beta, x, b, tol));
  }
}

TEST_CASE("rearrangement inequality holds for random monotone pairs") {
  RngStream rng(15, Stream::scratch);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 7);
    std::vector<double> u(n), v(n);
    double ua = 2.0, va = -1.0;
    for (int i = 0; i < n; ++i) {
      u[i] = ua;
      v[i] = va;
      ua -= rng.uniform();  // u nonincreasing
      va += rng.uniform();  // v nondecreasing
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i],
                perm[static_cast<int>(rng.next_u64() %
                                      static_cast<std::uint64_t>(i + 1))]);
    double sorted_sum = 0.0, perm_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sorted_sum += u[i] * v[i];
      perm_sum += u[perm[i]] * v[i];
    }
    CHECK(sorted_sum <= perm_sum + 1e-12);
  }
}

TEST_CASE("diffusion_params substitutes the limit data") {
  ModelParams mp;
  mp.N = 2;
  mp.n = 100;
  mp.lambda = {1.0, 1.0};
  mp.mu = {1.0, 1.0};
  mp.lambda_hat = {0.5, 0.0};
  mp.mu_hat = {0.2, 0.0};
  mp.lambda0_hat = 1.0;
  mp.sigma_ser = {1.0, 1.0};
  mp.service = {ServiceLaw::exponential(), ServiceLaw::exponential()};
  mp.p = poc_probabilities(2, 2, true);
  mp.ic.x0 = {0, 0};
  const DiffusionParams dp = diffusion_params(mp);
  CHECK(dp.b[0] == 0.75);
  CHECK(dp.b[1] == 0.25);
  CHECK(dp.m[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(dp.m[1] == 0.0);
  CHECK(dp.sigma[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(dp.sigma[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(dp.x0 == std::vector<double>{0.0, 0.0});

  ModelParams same_hats = mp;
  same_hats.lambda_hat = {0.4, 0.4};
  same_hats.mu_hat = {0.4, 0.4};
  const DiffusionParams dp2 = diffusion_params(same_hats);
  CHECK(dp2.m == std::vector<double>{0.0, 0.0});
}

TEST_CASE("model validation rejects bad parameters with field paths") {
  ModelParams mp;
  mp.N = 2;
  mp.n = 100;
  mp.lambda = {1.0, 1.0};
  mp.mu = {1.0, 1.0};
  mp.lambda_hat = {0.0, 0.0};
  mp.mu_hat = {0.0, 0.0};
  mp.lambda0_hat = 1.0;
  mp.sigma_ser = {1.0, 1.0};
  mp.service = {ServiceLaw::exponential(), ServiceLaw::exponential()};
  mp.p = {0.75, 0.25};
  mp.ic.x0 = {0, 0};
  CHECK_NOTHROW(mp.validate());

  ModelParams bad = mp;
  bad.mu = {1.0, 2.0};
  CHECK_THROWS_WITH_AS(bad.validate(),
                       "model.lambda[1]: critical load requires lambda == mu",
                       std::invalid_argument);
  bad = mp;
  bad.p = {0.25, 0.75};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mp;
  bad.p = {0.6, 0.3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mp;
  bad.sigma_ser = {2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mp;
  bad.ic.x0 = {-1, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mp;
  bad.lambda_hat = {-11.0, 0.0};  // drives lambda_n below zero at n=100
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("service laws have unit mean and the advertised cv") {
  RngStream rng(16, Stream::scratch);
  const int draws = 200000;
  const std::vector<ServiceLaw> laws = {
      ServiceLaw::exponential(), ServiceLaw::erlang(2), ServiceLaw::erlang(4),
      ServiceLaw::hyperexp2(2.0), ServiceLaw::lognormal(1.5)};
  for (const auto& law : laws) {
    double sum = 0.0, sq = 0.0, min_v = 1e300;
    for (int k = 0; k < draws; ++k) {
      const double v = law.sample_unit_mean(rng);
      sum += v;
      sq += v * v;
      min_v = std::min(min_v, v);
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    CHECK(min_v > 0.0);
    CHECK(std::abs(mean - 1.0) < 0.02 * (1.0 + law.coeff_variation()));
    CHECK(std::abs(std::sqrt(var) - law.coeff_variation()) <
          0.06 * law.coeff_variation() * law.coeff_variation());
  }
  CHECK(ServiceLaw::erlang(2).coeff_variation() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(ServiceLaw::hyperexp2(2.0).coeff_variation() == 2.0);
}
