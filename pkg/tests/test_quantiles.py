import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from bols_edgeworth.backward import BackwardEngine
from bols_edgeworth.errors import BracketError, ParameterDomainError
from bols_edgeworth.quantiles import normal_quantile, order_statistic_quantiles, quantile, quantiles


def test_normal_examples():
    assert normal_quantile(0.975) == pytest.approx(1.95996, abs=1e-5)
    assert normal_quantile(0.05) == pytest.approx(-1.64485, abs=1e-5)
    assert normal_quantile(0.5) == 0.0


@given(st.floats(1e-12, 1 - 1e-12))
def test_normal_accuracy(a):
    assert normal_quantile(a) == pytest.approx(norm.ppf(a), abs=1e-8, rel=1e-10)


@pytest.mark.parametrize("a", [0.001, 0.025, 0.05, 0.1, 0.3, 0.49])
def test_normal_antisymmetry(a):
    assert normal_quantile(a) == -normal_quantile(1 - a)


@pytest.mark.parametrize("a", [0.0, 1.0, -0.2, 1.5])
def test_normal_domain(a):
    with pytest.raises(ParameterDomainError):
        normal_quantile(a)


def test_bisection_on_exact_tail():
    for a in (0.025, 0.3, 0.975):
        q = quantile(norm.sf, a)
        assert abs(q.x_hat - norm.ppf(a)) <= 1e-4
        lo, hi = q.stderr_or_bracket["bracket"]
        assert hi - lo <= 1e-4


def test_bracket_widening_and_error():
    q = quantile(lambda x: norm.sf(x, scale=5), 0.975)
    assert q.x_hat == pytest.approx(norm.ppf(0.975, scale=5), abs=1e-4)
    with pytest.raises(BracketError) as exc:
        quantile(lambda x: norm.sf(x, scale=100), 0.9999)
    assert exc.value.lo == -32 and exc.value.hi == 32


def test_order_statistics():
    x = np.arange(1, 101, dtype=float)
    q = order_statistic_quantiles(x, [0.025, 0.5, 0.975])
    assert [r.x_hat for r in q] == [3.0, 50.0, 98.0]
    assert all(r.method == "mc" and r.stderr > 0 for r in q)


def test_ae_quantiles_monotone_and_roundtrip(gamma_cfg):
    eng = BackwardEngine(gamma_cfg, draws=20_000)
    alphas = [0.025, 0.05, 0.5, 0.95, 0.975]
    res = quantiles(eng.tail, alphas)
    xs = [r.x_hat for r in res]
    assert xs == sorted(xs)
    for r in res:
        t = eng.tail(r.x_hat)
        assert abs(t.value - (1 - r.alpha)) <= 3 * t.stderr + 1e-4 + r.stderr_or_bracket["tail_stderr"]
