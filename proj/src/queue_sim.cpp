#include "poclab/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace poclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_log_matches(const EventLog& log, const ModelParams& mp) {
  if (log.N != mp.N || log.n != mp.n)
    throw std::invalid_argument(
        "event log was not produced with these model parameters");
  for (int i = 0; i < mp.N; ++i) {
    if (log.lambda_n[i] != mp.lambda_n(i) || log.mu_n[i] != mp.mu_n(i))
      throw std::invalid_argument(
          "event log was not produced with these model parameters");
  }
}

InitialCondition realize_initial_condition(const ModelParams& mp,
                                           std::uint64_t seed) {
  InitialCondition ic;
  ic.x0_minus.resize(mp.N);
  ic.z0.resize(mp.N);
  ic.fictitious.resize(mp.N);
  RngStream rng(seed, Stream::initial_residual);
  const std::vector<std::int64_t> x0 = mp.initial_x0();
  for (int i = 0; i < mp.N; ++i) {
    if (x0[i] == 0) {
      ic.fictitious[i] = 1;
      ic.x0_minus[i] = 1;
      ic.z0[i] = 0.0;
    } else {
      ic.fictitious[i] = 0;
      ic.x0_minus[i] = x0[i];
      if (mp.ic.residual == IcSpec::ResidualPolicy::explicit_values) {
        ic.z0[i] = mp.ic.z0[i];
      } else {
        // Residual of order 1/n, so sqrt(n) Z(0) -> 0.
        ic.z0[i] = mp.ic.residual_scale *
                   mp.service[i].sample_unit_mean(rng) /
                   static_cast<double>(mp.n);
      }
    }
  }
  return ic;
}

}  // namespace

EventLog simulate(const ModelParams& mp, double horizon, std::uint64_t seed) {
  mp.validate();
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("simulate: horizon must be a nonnegative real");

  const int N = mp.N;
  EventLog log;
  log.N = N;
  log.n = mp.n;
  log.seed = seed;
  log.horizon = horizon;
  log.ic = realize_initial_condition(mp, seed);
  log.lambda_n.resize(N);
  log.mu_n.resize(N);
  for (int i = 0; i < N; ++i) {
    log.lambda_n[i] = mp.lambda_n(i);
    log.mu_n[i] = mp.mu_n(i);
  }
  log.lambda0_n = mp.lambda0_n();

  std::vector<RngStream> arrival_rng;
  std::vector<RngStream> service_rng;
  arrival_rng.reserve(N);
  service_rng.reserve(N);
  for (int i = 0; i < N; ++i) {
    arrival_rng.emplace_back(seed, Stream::dedicated_arrival,
                             static_cast<std::uint32_t>(i));
    service_rng.emplace_back(seed, Stream::service,
                             static_cast<std::uint32_t>(i));
  }
  RngStream lbs_rng(seed, Stream::lbs_arrival);
  RngStream theta_rng(seed, Stream::theta);

  std::vector<double> p_cum(N);
  {
    double acc = 0.0;
    for (int r = 0; r < N; ++r) {
      acc += mp.p[r];
      p_cum[r] = acc;
    }
  }

  std::vector<std::int64_t> X = log.ic.x0_minus;
  std::vector<std::int64_t> E(N, 0), A(N, 0), D(N, 0);
  std::int64_t A0 = 0;
  std::vector<double> busy(N, 0.0), idle(N, 0.0), p_int(N, 0.0);
  std::vector<int> ranks(N), order(N);

  double total_rate = log.lambda0_n;
  for (int i = 0; i < N; ++i) total_rate += log.lambda_n[i] + log.mu_n[i];
  const std::size_t expected =
      static_cast<std::size_t>(std::min(horizon * total_rate * 1.2 + 64.0, 5e8));
  log.events.reserve(expected);
  log.x_after.reserve(expected * static_cast<std::size_t>(N));

  const auto record = [&](double t, EventKind kind, int server, int theta) {
    log.events.push_back({t, kind, static_cast<std::int16_t>(server),
                          static_cast<std::int16_t>(theta)});
    for (int i = 0; i < N; ++i)
      log.x_after.push_back(static_cast<std::int32_t>(X[i]));
  };
  const auto service_draw = [&](int i) {
    return mp.service[i].sample_unit_mean(service_rng[i]) / log.mu_n[i];
  };

  double t_now = 0.0;
  std::vector<double> next_dep(N, kInf), next_ded(N, kInf);

  // Fictitious jobs complete instantly at time 0.
  for (int i = 0; i < N; ++i) {
    if (log.ic.fictitious[i]) {
      X[i] -= 1;
      D[i] += 1;
      record(0.0, EventKind::departure, i, 0);
    } else {
      next_dep[i] = log.ic.z0[i];
    }
  }
  for (int i = 0; i < N; ++i)
    next_ded[i] = arrival_rng[i].exponential(log.lambda_n[i]);
  double next_lbs = lbs_rng.exponential(log.lambda0_n);
  rank_inplace(X, order, ranks);

  for (;;) {
    // Next event: earliest time, departures before arrivals, then index.
    double t_next = kInf;
    int kind = -1;
    int who = -1;
    for (int i = 0; i < N; ++i) {
      if (next_dep[i] < t_next) {
        t_next = next_dep[i];
        kind = 0;
        who = i;
      }
    }
    for (int i = 0; i < N; ++i) {
      if (next_ded[i] < t_next) {
        t_next = next_ded[i];
        kind = 1;
        who = i;
      }
    }
    if (next_lbs < t_next) {
      t_next = next_lbs;
      kind = 2;
      who = -1;
    }
    if (kind < 0 || t_next > horizon) break;

    const double dt = t_next - t_now;
    if (dt > 0.0) {
      for (int i = 0; i < N; ++i) {
        if (X[i] > 0)
          busy[i] += dt;
        else
          idle[i] += dt;
        p_int[i] += mp.p[ranks[i] - 1] * dt;
      }
      t_now = t_next;
    }

    switch (kind) {
      case 0: {  // departure
        X[who] -= 1;
        D[who] += 1;
        next_dep[who] = X[who] > 0 ? t_now + service_draw(who) : kInf;
        record(t_now, EventKind::departure, who, 0);
        break;
      }
      case 1: {  // dedicated arrival
        X[who] += 1;
        E[who] += 1;
        if (X[who] == 1) next_dep[who] = t_now + service_draw(who);
        next_ded[who] = t_now + arrival_rng[who].exponential(log.lambda_n[who]);
        record(t_now, EventKind::dedicated_arrival, who, 0);
        break;
      }
      default: {  // LBS arrival, routed by the rank of X(t-)
        const double u = theta_rng.uniform();
        int theta = N;
        for (int r = 0; r < N; ++r) {
          if (u <= p_cum[r]) {
            theta = r + 1;
            break;
          }
        }
        for (int i = 0; i < N; ++i) {
          if (ranks[i] == theta) {
            who = i;
            break;
          }
        }
        X[who] += 1;
        A[who] += 1;
        A0 += 1;
        if (X[who] == 1) next_dep[who] = t_now + service_draw(who);
        next_lbs = t_now + lbs_rng.exponential(log.lambda0_n);
        record(t_now, EventKind::lbs_arrival, who, theta);
        break;
      }
    }
    rank_inplace(X, order, ranks);
  }

  const double tail = horizon - t_now;
  if (tail > 0.0) {
    for (int i = 0; i < N; ++i) {
      if (X[i] > 0)
        busy[i] += tail;
      else
        idle[i] += tail;
      p_int[i] += mp.p[ranks[i] - 1] * tail;
    }
  }

  log.x_T = std::move(X);
  log.e_T = std::move(E);
  log.a_T = std::move(A);
  log.d_T = std::move(D);
  log.a0_T = A0;
  log.busy_T = std::move(busy);
  log.idle_T = std::move(idle);
  log.p_integral_T = std::move(p_int);
  return log;
}

ScaledPath scaled_path(const EventLog& log, const ModelParams& mp,
                       IcSpec::Regime regime) {
  check_log_matches(log, mp);
  if (regime != mp.ic.regime)
    throw std::invalid_argument(
        "scaled_path: regime inconsistent with model initial condition");

  const int N = log.N;
  const double s = 1.0 / mp.sqrt_n();
  const double lambda0_hat_n = s * log.lambda0_n;

  ScaledPath sp;
  sp.regime = regime;
  sp.N = N;
  sp.n = log.n;
  sp.alpha_n = regime == IcSpec::Regime::ic_alpha
                   ? static_cast<double>(mp.alpha_n())
                   : 0.0;
  sp.horizon = log.horizon;
  sp.mhat_n.resize(N);
  sp.xhat0_minus.resize(N);
  for (int i = 0; i < N; ++i) {
    const double lambda_hat_n =
        s * (log.lambda_n[i] - static_cast<double>(log.n) * mp.lambda[i]);
    const double mu_hat_n =
        s * (log.mu_n[i] - static_cast<double>(log.n) * mp.mu[i]);
    sp.mhat_n[i] = lambda_hat_n - mu_hat_n;
    sp.xhat0_minus[i] = s * static_cast<double>(log.ic.x0_minus[i]);
  }

  // Grid: 0, every distinct event time, horizon.
  std::vector<double> grid;
  grid.reserve(log.events.size() + 2);
  grid.push_back(0.0);
  for (const Event& ev : log.events) {
    if (ev.t > grid.back()) grid.push_back(ev.t);
  }
  if (log.horizon > grid.back()) grid.push_back(log.horizon);
  const std::size_t K = grid.size();

  const auto alloc_d = [&] {
    return std::vector<std::vector<double>>(N, std::vector<double>(K, 0.0));
  };
  const auto alloc_i = [&] {
    return std::vector<std::vector<std::int64_t>>(
        N, std::vector<std::int64_t>(K, 0));
  };
  sp.t = grid;
  sp.x = alloc_i();
  sp.e = alloc_i();
  sp.a = alloc_i();
  sp.d = alloc_i();
  sp.busy = alloc_d();
  sp.xhat = alloc_d();
  sp.xs = alloc_d();
  sp.lhat = alloc_d();
  sp.ehat = alloc_d();
  sp.ahat = alloc_d();
  sp.shat_t = alloc_d();
  sp.phat = alloc_d();
  sp.phat_sharp = alloc_d();
  sp.mhat = alloc_d();
  sp.u = alloc_d();
  sp.u_pre = alloc_d();
  sp.a0hat.assign(K, 0.0);

  // Replay.
  std::vector<std::int64_t> X = log.ic.x0_minus;
  std::vector<std::int64_t> E(N, 0), A(N, 0), D(N, 0);
  std::int64_t A0 = 0;
  std::vector<double> busy(N, 0.0), idle(N, 0.0), p_int(N, 0.0);
  std::vector<int> ranks(N), order(N);
  rank_inplace(X, order, ranks);

  std::size_t ev = 0;
  double t_prev = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double t = grid[k];
    const double dt = t - t_prev;
    if (dt > 0.0) {
      for (int i = 0; i < N; ++i) {
        if (X[i] > 0)
          busy[i] += dt;
        else
          idle[i] += dt;
        p_int[i] += mp.p[ranks[i] - 1] * dt;
      }
      t_prev = t;
    }
    // Left limits, before the events at this grid time.
    for (int i = 0; i < N; ++i) {
      const double ehat_pre = s * (static_cast<double>(E[i]) - log.lambda_n[i] * t);
      const double shat_pre = s * (static_cast<double>(D[i]) - log.mu_n[i] * busy[i]);
      sp.u_pre[i][k] = sp.xhat0_minus[i] + ehat_pre +
                       s * static_cast<double>(A[i]) - shat_pre +
                       sp.mhat_n[i] * t;
    }
    while (ev < log.events.size() && log.events[ev].t == t) {
      const Event& e = log.events[ev];
      switch (e.kind) {
        case EventKind::departure:
          X[e.server] -= 1;
          D[e.server] += 1;
          break;
        case EventKind::dedicated_arrival:
          X[e.server] += 1;
          E[e.server] += 1;
          break;
        case EventKind::lbs_arrival:
          X[e.server] += 1;
          A[e.server] += 1;
          A0 += 1;
          break;
      }
      ++ev;
    }
    rank_inplace(X, order, ranks);

    sp.a0hat[k] = s * static_cast<double>(A0);
    for (int i = 0; i < N; ++i) {
      sp.x[i][k] = X[i];
      sp.e[i][k] = E[i];
      sp.a[i][k] = A[i];
      sp.d[i][k] = D[i];
      sp.busy[i][k] = busy[i];
      sp.xhat[i][k] = s * static_cast<double>(X[i]);
      sp.xs[i][k] = regime == IcSpec::Regime::ic0
                        ? sp.xhat[i][k]
                        : s * (static_cast<double>(X[i]) - sp.alpha_n);
      sp.lhat[i][k] = s * log.mu_n[i] * idle[i];
      sp.ehat[i][k] = s * (static_cast<double>(E[i]) - log.lambda_n[i] * t);
      sp.ahat[i][k] = s * static_cast<double>(A[i]);
      sp.shat_t[i][k] = s * (static_cast<double>(D[i]) - log.mu_n[i] * busy[i]);
      sp.phat[i][k] = lambda0_hat_n * p_int[i];
      sp.phat_sharp[i][k] = mp.lambda0_hat * p_int[i];
      sp.mhat[i][k] = sp.ahat[i][k] - sp.phat[i][k];
      sp.u[i][k] = sp.xhat0_minus[i] + sp.ehat[i][k] + sp.ahat[i][k] -
                   sp.shat_t[i][k] + sp.mhat_n[i] * t;
    }
  }
  return sp;
}

MartingalePath martingale_residual(const EventLog& log, const ModelParams& mp) {
  const ScaledPath sp = scaled_path(log, mp, mp.ic.regime);
  MartingalePath out;
  out.t = sp.t;
  out.m = sp.mhat;
  out.qv.assign(log.N, std::vector<double>(sp.t.size(), 0.0));
  const double inv_n = 1.0 / static_cast<double>(log.n);
  for (int i = 0; i < log.N; ++i) {
    for (std::size_t k = 0; k < sp.t.size(); ++k)
      out.qv[i][k] = inv_n * static_cast<double>(sp.a[i][k]);
  }
  return out;
}

void verify_event_log(const EventLog& log, const ModelParams& mp) {
  check_log_matches(log, mp);
  const int N = log.N;
  const auto fail = [](const std::string& msg) {
    throw std::logic_error("event log invariant violated: " + msg);
  };

  std::vector<std::int64_t> X = log.ic.x0_minus;
  std::vector<std::int64_t> E(N, 0), A(N, 0), D(N, 0);
  std::int64_t A0 = 0;
  std::vector<double> busy(N, 0.0), idle(N, 0.0);
  std::vector<int> ranks(N), order(N);
  double t_prev = 0.0;
  rank_inplace(X, order, ranks);

  for (std::size_t ev = 0; ev < log.events.size(); ++ev) {
    const Event& e = log.events[ev];
    if (e.t < t_prev) fail("event times decrease");
    if (e.t > log.horizon) fail("event beyond horizon");
    const double dt = e.t - t_prev;
    if (dt > 0.0) {
      for (int i = 0; i < N; ++i) {
        if (X[i] > 0)
          busy[i] += dt;
        else
          idle[i] += dt;
      }
      t_prev = e.t;
    }
    switch (e.kind) {
      case EventKind::departure:
        if (X[e.server] <= 0) fail("departure from an idle server");
        X[e.server] -= 1;
        D[e.server] += 1;
        break;
      case EventKind::dedicated_arrival:
        X[e.server] += 1;
        E[e.server] += 1;
        break;
      case EventKind::lbs_arrival:
        if (ranks[e.server] != e.theta)
          fail("routed server rank differs from sampled theta");
        X[e.server] += 1;
        A[e.server] += 1;
        A0 += 1;
        break;
    }
    rank_inplace(X, order, ranks);
    const std::int32_t* snap = log.queue_after(ev);
    for (int i = 0; i < N; ++i) {
      if (X[i] < 0) fail("negative queue length");
      if (X[i] != log.ic.x0_minus[i] + E[i] + A[i] - D[i])
        fail("balance equation broken");
      if (snap[i] != X[i]) fail("recorded post-event queue vector mismatch");
    }
  }
  const double tail = log.horizon - t_prev;
  if (tail > 0.0) {
    for (int i = 0; i < N; ++i) {
      if (X[i] > 0)
        busy[i] += tail;
      else
        idle[i] += tail;
    }
  }

  std::int64_t a_sum = 0;
  for (int i = 0; i < N; ++i) {
    if (X[i] != log.x_T[i] || E[i] != log.e_T[i] || A[i] != log.a_T[i] ||
        D[i] != log.d_T[i])
      fail("terminal counters disagree with replay");
    a_sum += A[i];
    if (std::abs(busy[i] - log.busy_T[i]) > 1e-12 * (1.0 + log.horizon))
      fail("cumulative busyness disagrees with replay");
    if (std::abs(busy[i] + idle[i] - log.horizon) > 1e-9 * (1.0 + log.horizon))
      fail("busy + idle time does not cover the horizon");
  }
  if (a_sum != log.a0_T) fail("sum of routed LBS arrivals differs from A_0");
  if (A0 != log.a0_T) fail("A_0 counter disagrees with replay");
}

}  // namespace poclab
