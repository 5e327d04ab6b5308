"""Smoke tests for the compiled poclab module."""

import json
import math

import pytest

import poclab


def make_symmetric_model(N=2, n=100, lambda0=1.0, ell=2):
    mp = poclab.ModelParams()
    mp.N = N
    mp.n = n
    mp.lambda_ = [1.0] * N
    mp.mu = [1.0] * N
    mp.lambda_hat = [0.0] * N
    mp.mu_hat = [0.0] * N
    mp.lambda0_hat = lambda0
    mp.service = [poclab.ServiceLaw.exponential()] * N
    mp.sigma_ser = [1.0] * N
    mp.p = poclab.poc_probabilities(N, ell, True)
    ic = poclab.IcSpec()
    ic.x0 = [0] * N
    mp.ic = ic
    mp.validate()
    return mp


def test_rank_and_probabilities():
    assert poclab.rank_vector([1, 1, 2, 2, 3]) == [1, 2, 3, 4, 5]
    assert poclab.rank_vector([1, 1, 3, 2, 2]) == [1, 2, 5, 3, 4]
    p = poclab.poc_probabilities(2, 2, True)
    assert p == [0.75, 0.25]
    assert poclab.poc_probabilities(3, 2, False) == pytest.approx(
        [2 / 3, 1 / 3, 0.0]
    )


def test_permutations_and_hull():
    perms = poclab.permissible_permutations([2.0, 1.0, 1.0])
    assert sorted(perms) == [[3, 1, 2], [3, 2, 1]]
    b = [0.6, 0.4]
    assert poclab.in_drift_hull([0.5, 0.5], [5.0, 5.0], b)
    assert not poclab.in_drift_hull([0.61, 0.39], [5.0, 5.0], b)
    assert poclab.in_drift_hull([0.6, 0.4], [1.0, 2.0], b)


def test_skorokhod_map():
    x, z = poclab.skorokhod_map([0.0, 1.0, 2.0, 3.0], [0.0, -1.0, 1.0, -2.0])
    assert z == [0.0, 1.0, 1.0, 2.0]
    assert x == [0.0, 0.0, 2.0, 0.0]
    assert poclab.reflect_step(0.2, -0.5) == (0.0, 0.3)


def test_simulate_and_scaled_path():
    mp = make_symmetric_model()
    log = poclab.simulate(mp, 1.0, 42)
    poclab.verify_event_log(log, mp)
    assert log.num_events > 0
    assert sum(log.a_T) == log.a0_T
    sp = poclab.scaled_path(log, mp, "ic0")
    n_sqrt = math.sqrt(mp.n)
    assert sp.xhat[0][-1] == pytest.approx(log.x_T[0] / n_sqrt)
    for i in range(mp.N):
        for k in range(len(sp.t)):
            assert sp.xhat[i][k] == pytest.approx(
                sp.u[i][k] + sp.lhat[i][k], abs=1e-9
            )
    t, m, qv = poclab.martingale_residual(log, mp)
    assert len(t) == len(m[0]) == len(qv[0])


def test_diffusion_params_and_integrate():
    mp = make_symmetric_model()
    dp = poclab.diffusion_params(mp)
    assert dp.b == [0.75, 0.25]
    assert dp.sigma == pytest.approx([math.sqrt(2.0)] * 2)
    path = poclab.integrate(dp, 1.0, 0.01, 7, True, "block-average", [0.0, 0.0])
    assert min(min(row) for row in path.x) >= 0.0
    assert all(path.l[i][-1] >= 0.0 for i in range(2))
    a, b, gap = poclab.integrate_coupled(
        dp, 1.0, 0.01, 7, True, "index-tiebreak", "block-average", [0.0, 0.0]
    )
    assert gap >= 0.0
    assert poclab.occupation_near_tie(path, 0, 1, 1e9) == pytest.approx(1.0)
    assert poclab.occupation_near_tie_knots(
        [0.0, 1.0], [0.0, 1.0], [1.0, 0.0], 0.1
    ) == pytest.approx(0.1)


def test_stats():
    assert poclab.ks_statistic([1.0, 2.0], [1.5, 2.5]) == 0.5
    assert poclab.ks_critical_5pct(2000, 2000) == pytest.approx(
        1.358 * math.sqrt(2 / 2000)
    )
    ranks = poclab.ranked_marginals([[2.0, 1.0], [3.0, 4.0]])
    assert ranks[0] == [1.0, 3.0]
    assert ranks[1] == [2.0, 4.0]
    assert poclab.idle_fraction([0.0, 0.5]) == 0.5
    grid = [k / 100 for k in range(101)]
    assert poclab.modulus_of_continuity(grid, grid, 0.1) == pytest.approx(0.1)


def test_run_experiment(tmp_path):
    config = {
        "experiment": "queue",
        "horizon": 0.25,
        "replications": 2,
        "seed": 5,
        "model": {
            "N": 2,
            "n": 36,
            "lambda": 1.0,
            "mu": 1.0,
            "lambda0_hat": 1.0,
            "routing": {"ell": 2, "with_replacement": True},
        },
    }
    out = tmp_path / "run"
    poclab.run_experiment(json.dumps(config), str(out), 1)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "queue"
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert (out / "queue_rep0000.csv").read_text().startswith(
        "t,i,X,Xhat_or_Xcheck,Lhat,E,A,D,T"
    )
