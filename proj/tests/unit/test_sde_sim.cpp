#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "poclab/sde_sim.hpp"
#include "poclab/rng.hpp"

using namespace poclab;

namespace {

DiffusionParams make_dp(std::vector<double> b, std::vector<double> m,
                        std::vector<double> sigma) {
  DiffusionParams dp;
  dp.b = std::move(b);
  dp.m = std::move(m);
  dp.sigma = std::move(sigma);
  return dp;
}

std::vector<std::vector<double>> zero_noise(int N, std::size_t steps) {
  return std::vector<std::vector<double>>(N, std::vector<double>(steps, 0.0));
}

}  // namespace

TEST_CASE("single particle: drift selection is constant and state stays in R+") {
  const DiffusionParams dp = make_dp({0.7}, {0.0}, {1.0});
  const SdePath path = integrate(dp, 1.0, 1e-2, 42, true, TieRule::index_tiebreak,
                                 std::vector<double>{0.0});
  for (double b : path.beta[0]) CHECK(b == 0.7);
  for (double x : path.x[0]) CHECK(x >= 0.0);
  for (std::size_t k = 1; k < path.l[0].size(); ++k)
    CHECK(path.l[0][k] >= path.l[0][k - 1]);
}

TEST_CASE("one explicit step reproduces the hand calculation") {
  const DiffusionParams dp = make_dp({1.0}, {0.0}, {1.0});
  std::vector<std::vector<double>> noise{{-0.2}};
  const SdePath path = integrate_with_noise(dp, 0.1, 0.1, noise, true,
                                            TieRule::index_tiebreak,
                                            std::vector<double>{0.0});
  // Proposed increment: 1*(-0.2) + (0 + 1)*0.1 = -0.1, reflected to 0.
  CHECK(path.x[0][1] == 0.0);
  CHECK(path.l[0][1] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("zero noise and zero drift leave an interior state constant") {
  const DiffusionParams dp = make_dp({0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0});
  const auto noise = zero_noise(2, 100);
  const SdePath path = integrate_with_noise(dp, 1.0, 1e-2, noise, true,
                                            TieRule::block_average,
                                            std::vector<double>{2.0, 3.0});
  for (double x : path.x[0]) CHECK(x == 2.0);
  for (double x : path.x[1]) CHECK(x == 3.0);
  for (double l : path.l[0]) CHECK(l == 0.0);
  for (double l : path.l[1]) CHECK(l == 0.0);
}

TEST_CASE("integrate validates its inputs") {
  const DiffusionParams good = make_dp({0.6, 0.4}, {0.0, 0.0}, {1.0, 1.0});
  CHECK_THROWS_AS(integrate(make_dp({0.4, 0.6}, {0, 0}, {1, 1}), 1.0, 1e-2, 1,
                            true, TieRule::block_average,
                            std::vector<double>{0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate(good, 1.0, 0.3, 1, true, TieRule::block_average,
                            std::vector<double>{0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate(good, 1.0, 1e-2, 1, true, TieRule::block_average,
                            std::vector<double>{-0.5, 0}),
                  std::invalid_argument);
  CHECK_NOTHROW(integrate(good, 1.0, 1e-2, 1, false, TieRule::block_average,
                          std::vector<double>{-0.5, 0}));
}

TEST_CASE("every realized drift lies in the permissible hull") {
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0.0, 0.0, 0.0},
                                     {1.0, 1.0, 1.0});
  const double tol = default_hull_tol(dp.b);
  for (TieRule rule : {TieRule::index_tiebreak, TieRule::reverse_index_tiebreak,
                       TieRule::block_average, TieRule::random_shuffle}) {
    const SdePath path = integrate(dp, 0.5, 1e-3, 7, true, rule,
                                   std::vector<double>{0.0, 0.0, 0.0});
    const std::size_t K = path.beta[0].size();
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> state(3), beta(3);
      for (int i = 0; i < 3; ++i) {
        state[i] = path.x[i][k];
        beta[i] = path.beta[i][k];
      }
      REQUIRE(in_drift_hull(beta, state, dp.b, tol));
    }
  }
}

TEST_CASE("tie rules assign block values as specified") {
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0.0, 0.0, 0.0},
                                     {1.0, 1.0, 1.0});
  const auto noise = zero_noise(3, 1);
  const std::vector<double> tied{1.0, 1.0, 0.0};
  // ranks: coordinate 2 lowest (rank 1); coordinates 0,1 tie on ranks 2,3.
  SdePath idx = integrate_with_noise(dp, 0.1, 0.1, noise, false,
                                     TieRule::index_tiebreak, tied);
  CHECK(idx.beta[0][0] == 0.3);
  CHECK(idx.beta[1][0] == 0.1);
  CHECK(idx.beta[2][0] == 0.6);
  SdePath rev = integrate_with_noise(dp, 0.1, 0.1, noise, false,
                                     TieRule::reverse_index_tiebreak, tied);
  CHECK(rev.beta[0][0] == 0.1);
  CHECK(rev.beta[1][0] == 0.3);
  CHECK(rev.beta[2][0] == 0.6);
  SdePath avg = integrate_with_noise(dp, 0.1, 0.1, noise, false,
                                     TieRule::block_average, tied);
  CHECK(avg.beta[0][0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(avg.beta[1][0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(avg.beta[2][0] == 0.6);
}

TEST_CASE("discrete balance holds exactly at every step") {
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0.1, 0.0, -0.1},
                                     {1.0, 1.5, 0.5});
  for (bool reflected : {true, false}) {
    const SdePath path = integrate(dp, 1.0, 1e-2, 99, reflected,
                                   TieRule::block_average,
                                   std::vector<double>{0.0, 0.5, 2.0});
    for (int i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k + 1 < path.t.size(); ++k) {
        const double incr = dp.sigma[i] * path.db[i][k] +
                            (dp.m[i] + path.beta[i][k]) * path.dt;
        const double dl = path.l[i][k + 1] - path.l[i][k];
        // x + incr, then the reflection deficit; 1e-15 absorbs FP
        // contraction differences between this TU and the integrator.
        CHECK(std::abs(path.x[i][k + 1] - (path.x[i][k] + incr + dl)) <=
              1e-15);
        if (!reflected) CHECK(dl == 0.0);
        if (dl > 0.0) CHECK(path.x[i][k + 1] == 0.0);
      }
    }
  }
}

TEST_CASE("coupled runs: identical rules give zero gap, N=1 always does") {
  const DiffusionParams dp3 = make_dp({0.6, 0.3, 0.1}, {0, 0, 0}, {1, 1, 1});
  const CoupledPaths same =
      integrate_coupled(dp3, 1.0, 1e-2, 5, true, TieRule::block_average,
                        TieRule::block_average, std::vector<double>{0, 0, 0});
  CHECK(same.gap == 0.0);
  const DiffusionParams dp1 = make_dp({0.5}, {0.0}, {1.0});
  const CoupledPaths single =
      integrate_coupled(dp1, 1.0, 1e-2, 5, true, TieRule::index_tiebreak,
                        TieRule::block_average, std::vector<double>{0.0});
  CHECK(single.gap == 0.0);
}

TEST_CASE("coupling contraction: ||V||^2 grows at most O(dt^2) per step") {
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0, 0, 0}, {1, 1, 1});
  const double dt = 1e-2;
  const CoupledPaths pair =
      integrate_coupled(dp, 1.0, dt, 31, true, TieRule::index_tiebreak,
                        TieRule::block_average, std::vector<double>{0, 0, 0});
  double bmax = 0.0;
  for (double b : dp.b) bmax = std::max(bmax, std::abs(b));
  const double slack = dt * dt * 4.0 * 3.0 * bmax * bmax + 1e-12;
  double prev = 0.0;
  for (std::size_t k = 0; k < pair.a.t.size(); ++k) {
    double v2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = pair.a.x[i][k] - pair.b.x[i][k];
      v2 += d * d;
    }
    if (k > 0) CHECK(v2 <= prev + slack);
    prev = v2;
  }
  CHECK(pair.gap > 0.0);  // the rules really do act differently at ties
}

TEST_CASE("median coupled gap shrinks with the step size") {
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0, 0, 0}, {1, 1, 1});
  const std::vector<double> x0{0.0, 0.0, 0.0};
  std::vector<double> coarse, fine;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    coarse.push_back(integrate_coupled(dp, 1.0, 1e-1, seed, true,
                                       TieRule::index_tiebreak,
                                       TieRule::block_average, x0)
                         .gap);
    fine.push_back(integrate_coupled(dp, 1.0, 1e-3, seed, true,
                                     TieRule::index_tiebreak,
                                     TieRule::block_average, x0)
                       .gap);
  }
  std::sort(coarse.begin(), coarse.end());
  std::sort(fine.begin(), fine.end());
  CHECK(fine[10] < coarse[10]);
}

TEST_CASE("away from the boundary, reflected and free dynamics coincide") {
  const DiffusionParams dp = make_dp({0.5, 0.2}, {0.0, 0.0}, {1.0, 1.0});
  const std::vector<double> x0{10.0, 12.0};
  const SdePath refl = integrate(dp, 0.25, 1e-3, 77, true,
                                 TieRule::index_tiebreak, x0);
  const SdePath free = integrate(dp, 0.25, 1e-3, 77, false,
                                 TieRule::index_tiebreak, x0);
  double min_x = 1e300;
  for (int i = 0; i < 2; ++i)
    min_x = std::min(min_x, *std::min_element(refl.x[i].begin(),
                                              refl.x[i].end()));
  REQUIRE(min_x > 1.0);  // this seed never approaches zero
  for (int i = 0; i < 2; ++i) {
    CHECK(refl.x[i] == free.x[i]);
    for (double l : refl.l[i]) CHECK(l == 0.0);
  }
}

TEST_CASE("label equivariance under consistently permuted inputs and noise") {
  const int N = 3;
  const DiffusionParams dp = make_dp({0.6, 0.3, 0.1}, {0.1, -0.1, 0.0},
                                     {1.0, 1.5, 2.0});
  const std::vector<double> x0{4.0, 6.0, 5.0};
  const std::size_t steps = 200;
  std::vector<std::vector<double>> noise(N, std::vector<double>(steps));
  RngStream rng(91, Stream::scratch);
  for (int i = 0; i < N; ++i)
    for (std::size_t k = 0; k < steps; ++k)
      noise[i][k] = 0.05 * (rng.uniform() - 0.5);
  const SdePath base = integrate_with_noise(dp, 2.0, 1e-2, noise, true,
                                            TieRule::index_tiebreak, x0);

  const std::vector<int> g{2, 0, 1};  // new coordinate j carries old g[j]
  DiffusionParams pdp = dp;
  std::vector<double> px0(N);
  std::vector<std::vector<double>> pnoise(N);
  for (int j = 0; j < N; ++j) {
    pdp.m[j] = dp.m[g[j]];
    pdp.sigma[j] = dp.sigma[g[j]];
    px0[j] = x0[g[j]];
    pnoise[j] = noise[g[j]];
  }
  const SdePath perm = integrate_with_noise(pdp, 2.0, 1e-2, pnoise, true,
                                            TieRule::index_tiebreak, px0);
  for (int j = 0; j < N; ++j) {
    for (std::size_t k = 0; k < base.t.size(); ++k)
      CHECK(perm.x[j][k] == base.x[g[j]][k]);
  }
}

TEST_CASE("occupation near ties: worked examples") {
  // Exact knot version: crossing lines meet analytic value.
  {
    const std::vector<double> t{0.0, 1.0};
    const std::vector<double> xi{0.0, 1.0};
    const std::vector<double> xj{1.0, 0.0};
    CHECK(occupation_near_tie(std::span<const double>(t),
                              std::span<const double>(xi),
                              std::span<const double>(xj), 0.1) ==
          doctest::Approx(0.1).epsilon(1e-12));
  }
  // Grid version: separated and coincident paths.
  const DiffusionParams dp = make_dp({0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0});
  const auto noise = zero_noise(2, 100);
  const SdePath apart = integrate_with_noise(dp, 1.0, 1e-2, noise, true,
                                             TieRule::block_average,
                                             std::vector<double>{0.0, 1.0});
  CHECK(occupation_near_tie(apart, 0, 1, 0.5) == 0.0);
  const SdePath together = integrate_with_noise(dp, 1.0, 1e-2, noise, true,
                                                TieRule::block_average,
                                                std::vector<double>{1.0, 1.0});
  CHECK(occupation_near_tie(together, 0, 1, 0.5) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(occupation_near_tie(together, 1, 1, 0.5),
                  std::invalid_argument);
}

TEST_CASE("occupation near ties decays with eps for separated rank drifts") {
  const DiffusionParams dp = make_dp({0.6, 0.2}, {0.0, 0.0}, {1.0, 1.0});
  const std::vector<double> x0{0.0, 0.0};
  double mean_wide = 0.0, mean_narrow = 0.0;
  const int seeds = 30;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const SdePath path =
        integrate(dp, 1.0, 1e-4, seed, true, TieRule::block_average, x0);
    const double wide = occupation_near_tie(path, 0, 1, 0.3);
    const double narrow = occupation_near_tie(path, 0, 1, 0.01);
    CHECK(narrow <= wide);  // monotone in eps, pathwise
    mean_wide += wide;
    mean_narrow += narrow;
  }
  mean_wide /= seeds;
  mean_narrow /= seeds;
  CHECK(mean_narrow < 0.2 * mean_wide);
  CHECK(mean_narrow < 0.05);
}
