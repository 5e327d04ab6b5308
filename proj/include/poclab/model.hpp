#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poclab/rng.hpp"

namespace poclab {

// Unit-mean service-time law. Every family has mean 1, strictly positive
// variance and no mass at 0; `cv` is the coefficient of variation.
struct ServiceLaw {
  enum class Family { exponential, erlang, hyperexp2, lognormal };

  Family family = Family::exponential;
  int shape = 1;    // erlang only
  double cv = 1.0;  // hyperexp2 / lognormal only

  static ServiceLaw exponential() { return {}; }
  static ServiceLaw erlang(int k);
  static ServiceLaw hyperexp2(double cv);
  static ServiceLaw lognormal(double cv);

  double coeff_variation() const;
  double sample_unit_mean(RngStream& rng) const;
  std::string name() const;
};

// Initial-condition descriptor. `x0` holds the intended queue lengths at
// time 0: a zero entry marks an initially empty queue, realized through a
// fictitious zero-service job with X(0-) = 1; a positive entry k gives
// X(0-) = k with a strictly positive head-of-line residual.
struct IcSpec {
  enum class Regime { ic0, ic_alpha };
  enum class ResidualPolicy { scaled, explicit_values };

  Regime regime = Regime::ic0;
  std::vector<std::int64_t> x0;
  bool x0_at_alpha = false;  // start every queue exactly at the centering value
  std::int64_t alpha = 0;    // ic_alpha centering; 0 = default round(n^{3/4})
  ResidualPolicy residual = ResidualPolicy::scaled;
  double residual_scale = 1.0;  // multiplies the default draw/n residual
  std::vector<double> z0;       // explicit residuals (positive where x0 > 0)
};

// All prelimit parameters of the N-server system with scaling parameter n.
// Effective rates: lambda_n(i) = n*lambda[i] + sqrt(n)*lambda_hat[i],
// mu_n(i) = n*mu[i] + sqrt(n)*mu_hat[i], lambda0_n = sqrt(n)*lambda0_hat.
struct ModelParams {
  int N = 1;
  std::int64_t n = 1;
  std::vector<double> lambda;
  std::vector<double> lambda_hat;
  double lambda0_hat = 0.0;
  std::vector<double> mu;
  std::vector<double> mu_hat;
  std::vector<double> sigma_ser;
  std::vector<double> p;
  std::vector<ServiceLaw> service;
  IcSpec ic;

  double lambda_n(int i) const;
  double mu_n(int i) const;
  double lambda0_n() const;
  double sqrt_n() const;
  std::int64_t alpha_n() const;  // resolved centering sequence value
  std::vector<std::int64_t> initial_x0() const;  // resolves x0_at_alpha

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Limit-equation data b_r = lambda0*p_r, m_i = lambda_hat_i - mu_hat_i,
// sigma_i = sqrt(lambda_i + mu_i*sigma_ser_i^2).
struct DiffusionParams {
  std::vector<double> b;
  std::vector<double> m;
  std::vector<double> sigma;
  std::vector<double> x0;

  void validate() const;
};

DiffusionParams diffusion_params(const ModelParams& mp);

// rank(i; x) = #{j : x_j < x_i} + #{j <= i : x_j = x_i}; ties go to the
// smaller index. Result is a permutation of 1..N.
std::vector<int> rank_vector(std::span<const double> x);
std::vector<int> rank_vector(std::span<const std::int64_t> x);

// Allocation-free variant for hot loops. `order` and `ranks` must have
// size N; `order` is scratch.
void rank_inplace(std::span<const std::int64_t> x, std::span<int> order,
                  std::span<int> ranks);

// Power-of-choice routing probabilities: sample ell of N queues (with or
// without replacement), route to the smallest sampled rank.
std::vector<double> poc_probabilities(int N, int ell, bool with_replacement);

// Maximal index sets with equal x-value, listed by increasing value;
// members ascending; the block occupies ranks rank_lo .. rank_lo+size-1.
struct TieBlock {
  std::vector<int> members;  // 0-based indices
  int rank_lo = 1;           // 1-based
};
std::vector<TieBlock> tie_blocks(std::span<const double> x);

// All permutations pi with x_i < x_j => pi(i) < pi(j); pi[i] is the
// 1-based position of coordinate i. Enumeration capped at N <= 8.
std::vector<std::vector<int>> permissible_permutations(
    std::span<const double> x);

// Membership of beta in conv{b_pi : pi permissible for x}, decided
// blockwise by the majorization criterion on each tie block.
bool in_drift_hull(std::span<const double> beta, std::span<const double> x,
                   std::span<const double> b, double tol);
double default_hull_tol(std::span<const double> b);

}  // namespace poclab
