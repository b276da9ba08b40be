from math import sqrt

import numpy as np
import pytest

from bols_edgeworth.design import DesignConfig
from bols_edgeworth.errors import ConfigError, DegenerateDesignError, DegenerateVarianceError, InfeasibleDesignError
from bols_edgeworth.noise import NoiseModel
from bols_edgeworth.policy import Policy
from bols_edgeworth.quantiles import order_statistic_quantiles
from bols_edgeworth.simulation import (
    StageOutcome,
    bols,
    mc_quantiles,
    simulate_block,
    simulate_statistics,
    simulate_trial,
    stage_outcome,
)
from bols_edgeworth.simulation import test_statistic as statistic


def test_bols_examples():
    d, _ = bols([1, -1, 1, -1], [1, 1, 0, 0])
    assert d == 0
    d, s2 = bols([2, 0, 0, 0], [1, 1, 0, 0])
    assert d == pytest.approx(1.0)
    assert s2 == pytest.approx(2 / 3)


def test_bols_errors():
    with pytest.raises(DegenerateVarianceError):
        bols([1.0, 1.0, 1.0, 1.0], [1, 1, 0, 0])
    with pytest.raises(DegenerateDesignError):
        bols([1.0, 2.0, 3.0], [1, 1, 1])


def test_statistic_examples():
    o = StageOutcome((2, 2), 0.0, 1.0, (0, 0), 0)
    assert statistic([o]) == 0
    o = StageOutcome((2, 2), 1.0, 2 / 3, (0, 0), 0)
    assert statistic([o]) == pytest.approx(sqrt(1.5))
    assert statistic([o, o]) == pytest.approx(sqrt(2) * sqrt(1.5))
    with pytest.raises(DegenerateVarianceError):
        statistic([StageOutcome((2, 2), 1.0, 0.0, (0, 0), 0)])


def test_shift_scale_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        r = rng.gamma(2.0, size=30)
        a = (rng.random(30) < 0.4).astype(int)
        a[:2] = (1, 0)
        base = statistic([stage_outcome(r, a)])
        for c, b in ((3.0, 0.0), (0.2, -5.0), (1.0, 100.0)):
            assert statistic([stage_outcome(c * r + b, a)]) == pytest.approx(base, rel=1e-10, abs=1e-12)


def test_trial_reproducible(gamma_cfg):
    cfg = gamma_cfg.replace(mc_reps=10_000)
    a = simulate_trial(cfg, 12345)
    b = simulate_trial(cfg, 12345)
    assert a == b
    outs, stat = a
    assert stat == pytest.approx(statistic(outs), rel=1e-12)
    for o in outs:
        assert sum(o.counts) == 50 and min(o.counts) >= 5 and o.sigma_hat2 > 0


def test_block_matches_direct_computation(gamma_cfg):
    res = simulate_block(gamma_cfg, 0, size=64)
    for i in range(64):
        outs = [
            StageOutcome((int(res["counts"][i, s]), 50 - int(res["counts"][i, s])), res["delta"][i, s], res["sigma2"][i, s], (0, 0), 0)
            for s in range(2)
        ]
        assert res["stat"][i] == pytest.approx(statistic(outs), rel=1e-12)


def test_clamped_support_respected():
    cfg = DesignConfig(
        n=(50, 50),
        policies=(Policy.fixed((0.999, 0.001)), Policy.fixed((0.999, 0.001))),
        noise=(NoiseModel.normal(), NoiseModel.normal()),
    )
    res = simulate_block(cfg, 0, size=2000)
    assert res["counts"].max() <= 45 and res["counts"].min() >= 5


def test_worker_count_independent(gamma_cfg):
    a, _ = simulate_statistics(gamma_cfg, 20_000, workers=1)
    b, _ = simulate_statistics(gamma_cfg, 20_000, workers=4)
    assert np.array_equal(a, b)


def test_symmetric_median(normal_cfg):
    q = mc_quantiles(normal_cfg, [0.5], reps=100_000)[0]
    assert abs(q.x_hat) < 3 * q.stderr + 1e-3


def test_arm_swap_negates(mixture_cfg):
    swapped = mixture_cfg.replace(policies=(Policy.fixed((0.8, 0.2)),) + mixture_cfg.policies[1:])
    alphas = [0.025, 0.05, 0.95, 0.975]
    qa = mc_quantiles(mixture_cfg, alphas, reps=200_000)
    qb = mc_quantiles(swapped, alphas[::-1], reps=200_000)
    for a, b in zip(qa, qb):
        assert abs(a.x_hat + b.x_hat) < 3 * sqrt(a.stderr**2 + b.stderr**2)


def test_order_statistic_stderr_reasonable():
    x = np.random.default_rng(3).standard_normal(200_000)
    q = order_statistic_quantiles(x, [0.025, 0.5])
    # asymptotic sd of the sample quantile: sqrt(a(1-a)/R) / phi(q)
    ref = sqrt(0.025 * 0.975 / x.size) / (np.exp(-0.5 * 1.96**2) / sqrt(2 * np.pi))
    assert q[0].stderr == pytest.approx(ref, rel=0.25)
    assert abs(q[1].x_hat) < 4 * q[1].stderr


def test_config_validation():
    with pytest.raises(ConfigError) as exc:
        DesignConfig.from_dict({"stages": 1, "n": [50], "stage1_probs": [0.5, 0.5]})
    assert "noise" in exc.value.keys
    with pytest.raises(InfeasibleDesignError):
        DesignConfig.from_dict(
            {"stages": 1, "n": [8], "noise": {"family": "normal"}, "stage1_probs": [0.5, 0.5]}
        )
    with pytest.raises(ConfigError):
        DesignConfig.from_dict(
            {"stages": 1, "n": [50], "noise": {"family": "normal"}, "stage1_probs": [0.5, 0.5], "bogus": 1}
        )


def test_config_roundtrip(gamma_cfg, mixture_cfg):
    for cfg in (gamma_cfg, mixture_cfg):
        again = DesignConfig.from_dict(cfg.to_dict())
        assert again == cfg
