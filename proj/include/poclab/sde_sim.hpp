#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poclab/model.hpp"
#include "poclab/queue_sim.hpp"

namespace poclab {

// Drift selection at tied coordinates. Every rule picks a point of
// conv{b_pi : pi permissible}, so all of them solve the inclusion; they
// differ only in which measurable selection they realize.
enum class TieRule {
  index_tiebreak,
  reverse_index_tiebreak,
  block_average,
  random_shuffle,
};

std::string tie_rule_name(TieRule rule);
TieRule tie_rule_from_name(const std::string& name);

// Euler-Maruyama path of the rank-based SDE/SDI, with optional one-step
// projection reflection at 0.
struct SdePath {
  int N = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  TieRule rule = TieRule::block_average;
  bool reflected = true;

  std::vector<double> t;                  // K+1 grid times
  std::vector<std::vector<double>> x;     // [N][K+1]
  std::vector<std::vector<double>> l;     // [N][K+1], local time
  std::vector<std::vector<double>> beta;  // [N][K], realized drift selection
  std::vector<std::vector<double>> db;    // [N][K], Brownian increments
};

SdePath integrate(const DiffusionParams& dp, double T, double dt,
                  std::uint64_t seed, bool reflected, TieRule rule,
                  std::span<const double> x0);

// Same scheme with caller-supplied Brownian increments db[ i ][ step ].
SdePath integrate_with_noise(const DiffusionParams& dp, double T, double dt,
                             const std::vector<std::vector<double>>& db,
                             bool reflected, TieRule rule,
                             std::span<const double> x0,
                             std::uint64_t shuffle_seed = 0);

// Two integrations sharing identical Brownian increments but (possibly)
// different tie rules; gap = max over the grid of ||X^a - X^b||.
struct CoupledPaths {
  SdePath a;
  SdePath b;
  double gap = 0.0;
};

CoupledPaths integrate_coupled(const DiffusionParams& dp, double T, double dt,
                               std::uint64_t seed, bool reflected,
                               TieRule rule_a, TieRule rule_b,
                               std::span<const double> x0);

// Time spent with |X_i - X_j| <= eps. The SdePath version counts step
// left endpoints times dt; the ScaledPath and knot versions are exact for
// piecewise-constant and piecewise-linear paths respectively.
double occupation_near_tie(const SdePath& path, int i, int j, double eps);
double occupation_near_tie(const ScaledPath& path, int i, int j, double eps);
double occupation_near_tie(std::span<const double> t,
                           std::span<const double> xi,
                           std::span<const double> xj, double eps);

}  // namespace poclab
