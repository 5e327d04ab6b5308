#pragma once

#include <cstdint>
#include <vector>

#include "poclab/model.hpp"

namespace poclab {

// Realized initial condition: queues in the empty set carry a fictitious
// zero-service job (X(0-) = 1, Z(0) = 0), so the first real job to enter
// any server after time 0 has index 1.
struct InitialCondition {
  std::vector<std::int64_t> x0_minus;
  std::vector<double> z0;
  std::vector<std::uint8_t> fictitious;
};

enum class EventKind : std::uint8_t {
  departure = 0,
  dedicated_arrival = 1,
  lbs_arrival = 2,
};

struct Event {
  double t;
  EventKind kind;
  std::int16_t server;  // 0-based
  std::int16_t theta;   // sampled rank for LBS arrivals (1-based), else 0
};

// Full trajectory of one simulation run plus exact terminal counters and
// the exact integrals needed by the scaled processes.
struct EventLog {
  int N = 0;
  std::int64_t n = 1;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  InitialCondition ic;
  std::vector<double> lambda_n;
  std::vector<double> mu_n;
  double lambda0_n = 0.0;

  std::vector<Event> events;
  std::vector<std::int32_t> x_after;  // events.size() * N, post-event queues

  std::vector<std::int64_t> x_T, e_T, a_T, d_T;
  std::int64_t a0_T = 0;
  std::vector<double> busy_T;        // T_i(horizon)
  std::vector<double> idle_T;        // horizon - T_i(horizon)
  std::vector<double> p_integral_T;  // int_0^T p_{R_i(s)} ds

  const std::int32_t* queue_after(std::size_t event_idx) const {
    return x_after.data() + event_idx * static_cast<std::size_t>(N);
  }
};

// Event-driven trajectory on [0, horizon]: Poisson dedicated arrivals per
// server, a Poisson load-balancing stream routed by sampled rank, and
// generally distributed unit-mean services scaled by 1/mu_n. Bit-exact
// reproducible for a given (mp, horizon, seed).
EventLog simulate(const ModelParams& mp, double horizon, std::uint64_t seed);

// Diffusion-scaled processes on the event-time grid (0, every distinct
// event time, horizon). All "hat" arrays are kept in the IC0 scaling; `xs`
// holds the regime-dependent display variant (Xhat under ic0, Xcheck under
// ic_alpha).
struct ScaledPath {
  IcSpec::Regime regime = IcSpec::Regime::ic0;
  int N = 0;
  std::int64_t n = 1;
  double alpha_n = 0.0;
  double horizon = 0.0;
  std::vector<double> mhat_n;        // per server: lambda_hat_n - mu_hat_n
  std::vector<double> xhat0_minus;   // n^{-1/2} X(0-)

  std::vector<double> t;
  std::vector<std::vector<std::int64_t>> x, e, a, d;  // raw counters
  std::vector<std::vector<double>> busy;              // T_i
  std::vector<std::vector<double>> xhat;              // n^{-1/2} X_i
  std::vector<std::vector<double>> xs;                // Xhat or Xcheck
  std::vector<std::vector<double>> lhat;
  std::vector<std::vector<double>> ehat;
  std::vector<std::vector<double>> ahat;
  std::vector<std::vector<double>> shat_t;            // Shat_i(T_i(t))
  std::vector<std::vector<double>> phat;              // lambda0hat_n * p-integral
  std::vector<std::vector<double>> phat_sharp;        // lambda0 * p-integral
  std::vector<std::vector<double>> mhat;              // Ahat - Phat
  std::vector<std::vector<double>> u;      // Uhat: Xhat net of reflection
  std::vector<std::vector<double>> u_pre;  // left limit of Uhat
  std::vector<double> a0hat;
};

ScaledPath scaled_path(const EventLog& log, const ModelParams& mp,
                       IcSpec::Regime regime);

struct MartingalePath {
  std::vector<double> t;
  std::vector<std::vector<double>> m;   // Mhat_i = Ahat_i - Phat_i
  std::vector<std::vector<double>> qv;  // optional quadratic variation n^{-1} A_i
};

MartingalePath martingale_residual(const EventLog& log, const ModelParams& mp);

// Replays the log and throws std::logic_error on any violated invariant:
// exact balance at every event, nonnegative queues, departures only from
// busy servers, routed rank equal to theta, sum_i A_i = A_0, and terminal
// counter consistency.
void verify_event_log(const EventLog& log, const ModelParams& mp);

}  // namespace poclab
