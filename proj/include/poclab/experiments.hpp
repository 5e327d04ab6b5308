#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "poclab/model.hpp"
#include "poclab/sde_sim.hpp"
#include "poclab/stats.hpp"

namespace poclab {

// Malformed JSON text; the CLI maps this to exit status 2.
struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Well-formed config with invalid content; message starts with the field
// path; exit status 3.
struct ConfigValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { queue, sde, convergence, uniqueness, occupation, idle };
std::string experiment_kind_name(ExperimentKind kind);
ExperimentKind experiment_kind_from_name(const std::string& name);

enum class EmitPaths { none, first, all };

struct SdeSettings {
  double dt = 1e-3;
  bool reflected = true;
  TieRule rule = TieRule::block_average;
  TieRule rule_b = TieRule::index_tiebreak;  // second leg of coupled runs
};

struct Thresholds {
  double ks = 0.061;
  double idle = 0.05;
  double gap = 0.05;
  double occupation = 0.01;  // fraction of the horizon
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::queue;
  double horizon = 1.0;
  std::size_t replications = 1;
  std::uint64_t seed = 1;

  bool has_model = false;
  ModelParams model;
  bool has_diffusion = false;
  DiffusionParams diffusion;
  SdeSettings sde;

  std::vector<std::int64_t> n_ladder;  // strictly increasing; default {model.n}
  std::vector<double> dt_ladder;       // strictly increasing; default {sde.dt}
  std::vector<double> eps_ladder;      // strictly increasing
  Thresholds thresholds;
  EmitPaths emit = EmitPaths::none;
  std::array<int, 2> pair = {1, 2};  // 1-based coordinate pair for occupation

  // Explicit diffusion section if present, otherwise derived from model.
  DiffusionParams effective_diffusion() const;
  ModelParams model_at(std::int64_t n) const;
  void validate() const;
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Fully resolved config (all defaults spelled); a valid config file and
// the manifest payload. Fixed point of parse/serialize.
std::string config_to_json_text(const ExperimentConfig& config);

struct ExperimentOutcome {
  std::vector<CheckResult> checks;
  std::vector<std::string> files_written;
  bool all_pass() const;
};

// Executes the experiment, writing manifest.json, report.json and any
// per-replication CSV/sidecar files under out_dir. Deterministic for a
// given config: the same bytes are produced regardless of `jobs`.
ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::string& out_dir, unsigned jobs);

// ---- Monte Carlo building blocks shared with the acceptance suite ----

// Seed-derivation domains for replication streams.
inline constexpr std::uint64_t kSeedDomainQueue = 1;
inline constexpr std::uint64_t kSeedDomainSde = 2;
inline constexpr std::uint64_t kSeedDomainCoupled = 3;

// Terminal statistics of one queue replication, read off the exact
// terminal counters (no path reconstruction).
struct QueueTerminal {
  std::vector<double> xhat;  // n^{-1/2} X_i(T)
  std::vector<double> xs;    // regime variant (hat or check)
  std::vector<double> lhat;  // n^{-1/2} mu_n (T - T_i(T))
  std::vector<double> mhat;  // Ahat_i(T) - lambda0hat_n * p-integral
};
QueueTerminal queue_terminal(const ModelParams& mp, double horizon,
                             std::uint64_t seed);

struct QueueMonteCarlo {
  std::vector<std::vector<double>> xs;    // [rep][server]
  std::vector<std::vector<double>> lhat;  // [rep][server]
  std::vector<std::vector<double>> mhat;  // [rep][server]
  std::vector<double> lhat_max;           // [rep]
};
QueueMonteCarlo queue_monte_carlo(const ModelParams& mp, double horizon,
                                  std::size_t replications,
                                  std::uint64_t master_seed, unsigned jobs);

struct SdeMonteCarlo {
  std::vector<std::vector<double>> x;  // [rep][coordinate], terminal
  std::vector<std::vector<double>> l;  // [rep][coordinate], terminal
};
SdeMonteCarlo sde_monte_carlo(const DiffusionParams& dp, double T, double dt,
                              bool reflected, TieRule rule,
                              std::span<const double> x0,
                              std::size_t replications,
                              std::uint64_t master_seed, unsigned jobs);

// Per-rank KS checks between two terminal ensembles (ranked marginals).
std::vector<CheckResult> ranked_ks_checks(
    const std::vector<std::vector<double>>& a,
    const std::vector<std::vector<double>>& b, double threshold,
    const std::string& name_prefix);

}  // namespace poclab
