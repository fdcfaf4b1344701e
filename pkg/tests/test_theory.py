import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cssd.errors import DomainError
from cssd.theory import (
    SignalClassParams,
    check_uniqueness,
    eta,
    log_covering_count,
    measurement_bound,
    recovery_constants,
    tau_constants,
    theory_report,
    uniqueness_bound,
)

SCENARIO = SignalClassParams(n=1000, r=10, s=4, l=4, mu=0.82, delta_ba_s=0.6, delta_ba_2s=0.6)
SIGMA_MIN_B = 2.1968431392005185  # smallest singular value of the degree-3, 6-knot basis on n=1000

mp.mp.dps = 40


def oracle_taus(p, delta, smin):
    e2 = mp.mpf(p.mu) * p.r * p.s * p.l / p.n
    return 1 / mp.sqrt((1 - mp.mpf(delta)) * (1 - e2)), (1 / mp.mpf(smin)) * (1 + 1 / mp.sqrt(1 - e2))


def oracle_recovery(p, d, d2):
    e = mp.sqrt(mp.mpf(p.mu) * p.r * p.s * p.l / p.n)
    a1 = e / (1 - e**2)
    a2 = mp.sqrt(2) * e / (1 - 2 * e**2)
    g2 = (1 + mp.mpf(d2)) / (1 - mp.mpf(d2))
    a = (1 + a1 + a2) * g2 + 2 * a2 + 2
    c = 1 - g2 * a1 * a2 - a2**2
    d = mp.mpf(d)
    Ca = (1 + g2) * (1 + a2) * mp.sqrt(1 + d) / (c - a * d)
    Cm = (mp.sqrt(1 + d) + (d + g2 / (1 + g2) * a1 + a2 / (1 + g2)) * Ca) / (1 - d)
    return a1, a2, mp.sqrt(g2), a, c, Ca, Cm


def test_eta_examples():
    assert eta(SignalClassParams(1000, 10, 4, 4, 0.0)) == 0.0
    assert eta(SignalClassParams(1, 1, 1, 1, 1.0)) == 1.0
    assert eta(SCENARIO) == pytest.approx(math.sqrt(0.1312), rel=1e-14)
    assert eta(SCENARIO) == pytest.approx(0.3622, abs=5e-5)


def test_uniqueness_examples():
    assert check_uniqueness(SCENARIO)
    # 1000 / (2 * 10 * 4 * 4)
    assert uniqueness_bound(SCENARIO) == pytest.approx(3.125)
    edge = SignalClassParams(n=320, r=10, s=4, l=4, mu=1.0)
    assert uniqueness_bound(edge) == 1.0 and not check_uniqueness(edge)
    assert not check_uniqueness(SignalClassParams(1000, 10, 4, 4, 1e6))


def test_uniqueness_with_empty_class():
    p = SignalClassParams(100, 0, 5, 3, 50.0)
    assert math.isinf(uniqueness_bound(p)) and check_uniqueness(p)


@given(
    st.floats(1, 1e5),
    st.integers(1, 50),
    st.integers(1, 50),
    st.integers(1, 50),
    st.floats(0, 200),
)
def test_uniqueness_equivalent_to_eta_squared(n, r, s, l, mu):
    if max(r, s, l) > n:
        return
    p = SignalClassParams(n, r, s, l, mu)
    assert check_uniqueness(p) == (eta(p) ** 2 < 0.5)


def test_eta_monotone():
    base = dict(n=500, r=5, s=3, l=4, mu=2.0)
    e0 = eta(SignalClassParams(**base))
    for key in ("mu", "r", "s", "l"):
        assert eta(SignalClassParams(**{**base, key: base[key] * 1.5})) > e0
    assert eta(SignalClassParams(**{**base, "n": 900})) < e0


def test_tau_clean_case():
    p = SignalClassParams(100, 1, 1, 1, 0.0, delta_ba_s=0.0)
    assert tau_constants(p, 1.0) == (1.0, 2.0)


def test_tau_diverge_towards_eta_one():
    taus = []
    for mu in np.linspace(0.1, 0.999, 30):
        p = SignalClassParams(n=40, r=2, s=2, l=10, mu=mu, delta_ba_s=0.2)
        taus.append(tau_constants(p, 1.0))
    t0, t1 = np.array(taus).T
    assert np.all(np.diff(t0) > 0) and np.all(np.diff(t1) > 0)
    assert t0[-1] > 10 and t1[-1] > 10


def test_tau_scenario_regression():
    t0, t1 = tau_constants(SCENARIO, SIGMA_MIN_B)
    o0, o1 = oracle_taus(SCENARIO, 0.6, SIGMA_MIN_B)
    assert t0 == pytest.approx(float(o0), rel=1e-13)
    assert t1 == pytest.approx(float(o1), rel=1e-13)
    assert (t0, t1) == pytest.approx((1.6963290448379869, 0.9435597160166588), rel=1e-12)


def test_tau_domain_errors():
    with pytest.raises(DomainError, match="eta < 1"):
        tau_constants(SignalClassParams(1, 1, 1, 1, 1.0, delta_ba_s=0.1), 1.0)
    with pytest.raises(DomainError, match="delta_ba_s"):
        tau_constants(SCENARIO, 1.0, delta_s=1.0)
    with pytest.raises(DomainError, match="sigma_min"):
        tau_constants(SCENARIO, 0.0)


def test_measurement_bound_examples():
    p0 = SignalClassParams(100, 0, 0, 1, 1.0)
    assert measurement_bound(p0, 0.5, 1.0, 1.0, 3.0) == pytest.approx(3.0 * math.log(2))
    t0, t1 = tau_constants(SCENARIO, SIGMA_MIN_B)
    one = measurement_bound(SCENARIO, 0.5, t0, t1, 1.0)
    assert measurement_bound(SCENARIO, 0.5, t0, t1, 2.0) == pytest.approx(2 * one)
    expected = math.log(2) + 10 * math.log(48 * t1) + 4 * (1 + math.log(48 * t0) + math.log(250))
    assert one == pytest.approx(expected, rel=1e-14)
    assert one == pytest.approx(82.50871488646413, rel=1e-12)
    with pytest.raises(DomainError):
        measurement_bound(SCENARIO, 1.0, t0, t1, 1.0)
    with pytest.raises(DomainError):
        measurement_bound(SCENARIO, 0.5, t0, t1, 0.0)


def test_log_covering_examples():
    assert log_covering_count(SignalClassParams(10, 0, 0, 1, 1.0), 0.3, 1.0, 1.0) == 0.0
    t0, t1 = tau_constants(SCENARIO, SIGMA_MIN_B)
    v = log_covering_count(SCENARIO, 0.5, t0, t1)
    assert v == pytest.approx(55.72972403445522, rel=1e-12)
    prev = -1.0
    for r in range(0, 6):
        cur = log_covering_count(SignalClassParams(100, r, 2, 1, 1.0), 0.5, 1.0, 1.0)
        assert cur > prev
        prev = cur
    with pytest.raises(DomainError):
        log_covering_count(SCENARIO, 0.0, t0, t1)


def test_recovery_clean_limit():
    p = SignalClassParams(100, 1, 1, 1, 0.0, delta_ba_2s=0.0)
    rc = recovery_constants(p, 0.0)
    assert (rc.alpha1, rc.alpha2, rc.gamma, rc.a, rc.c) == (0.0, 0.0, 1.0, 3.0, 1.0)
    assert rc.Ca == 2.0 and rc.Cm == 1.0


@pytest.mark.parametrize("mu,d2,d", [(0.5, 0.1, 0.01), (0.2, 0.3, 0.02), (1.0, 0.05, 0.001)])
def test_recovery_matches_oracle(mu, d2, d):
    p = SignalClassParams(n=1000, r=5, s=3, l=4, mu=mu, delta_ba_2s=d2)
    rc = recovery_constants(p, d)
    assert rc.reason is None
    for got, want in zip(rc.as_tuple(), oracle_recovery(p, d, d2)):
        assert got == pytest.approx(float(want), rel=1e-12)


def test_recovery_scenario_c_negative():
    rc = recovery_constants(SCENARIO, 0.01)
    assert rc.gamma == pytest.approx(2.0)
    assert rc.c == pytest.approx(-0.6404640580688132, rel=1e-12)
    assert float(oracle_recovery(SCENARIO, 0.01, 0.6)[4]) == pytest.approx(rc.c, rel=1e-12)
    assert rc.Ca is None and rc.Cm is None and rc.reason == "c <= 0"


def test_recovery_delta_beyond_c_over_a():
    p = SignalClassParams(n=1000, r=5, s=3, l=4, mu=0.5, delta_ba_2s=0.1)
    rc = recovery_constants(p, 0.9)
    assert rc.reason == "delta_r3s >= c/a" and rc.Ca is None


def test_recovery_domain_errors():
    with pytest.raises(DomainError, match="eta\\^2 < 1/2"):
        recovery_constants(SignalClassParams(100, 5, 5, 2, 1.0, delta_ba_2s=0.1), 0.01)
    with pytest.raises(DomainError):
        recovery_constants(SignalClassParams(100, 1, 1, 1, 0.1, delta_ba_2s=1.0), 0.01)
    with pytest.raises(DomainError):
        recovery_constants(SignalClassParams(100, 1, 1, 1, 0.1), 0.01)


def test_recovery_continuity():
    p = SignalClassParams(n=1000, r=5, s=3, l=4, mu=0.5, delta_ba_2s=0.1)
    q = SignalClassParams(n=1000, r=5, s=3, l=4, mu=0.5 + 1e-9, delta_ba_2s=0.1 + 1e-9)
    a = recovery_constants(p, 0.01).as_tuple()
    b = recovery_constants(q, 0.01 + 1e-9).as_tuple()
    for x, y in zip(a, b):
        assert abs(x - y) < 1e-6


def test_params_validation():
    with pytest.raises(DomainError):
        SignalClassParams(0, 1, 1, 1, 1.0)
    with pytest.raises(DomainError):
        SignalClassParams(10, 11, 1, 1, 1.0)
    with pytest.raises(DomainError):
        SignalClassParams(10, 1, 1, 1, float("nan"))
    with pytest.raises(DomainError):
        SignalClassParams(10, 1, 1, 1, -1.0)
    with pytest.raises(DomainError):
        SignalClassParams.from_dict({"n": 10, "r": 1, "s": 1, "l": 1, "mu": 1, "kappa": 2})


def test_report_scenario():
    rep = theory_report(SCENARIO, sigma_min_B=SIGMA_MIN_B, delta=0.5, delta_r3s=0.01)
    assert rep.unique and rep.uniqueness_bound == pytest.approx(3.125)
    assert rep.tau0 is not None and rep.p_min is not None
    assert rep.c_const < 0 and rep.Ca is None and rep.undefined["Ca"] == "c <= 0"


def test_report_marks_recovery_undefined_for_large_eta():
    p = SignalClassParams(100, 5, 5, 2, 1.0, delta_ba_s=0.1, delta_ba_2s=0.1)
    rep = theory_report(p, sigma_min_B=1.0, delta=0.5)
    assert "eta^2 < 1/2" in rep.undefined["recovery"]
    assert rep.alpha1 is None


any_float = st.one_of(st.floats(allow_nan=True, allow_infinity=True), st.integers(-5, 5))


@given(any_float, any_float, any_float, any_float, any_float, any_float, any_float)
def test_calculators_never_return_nan(n, r, s, l, mu, d, smin):
    try:
        p = SignalClassParams(n, r, s, l, mu, delta_ba_s=d if 0 <= d < 1 else None, delta_ba_2s=None)
    except DomainError:
        return
    outs = [eta(p), uniqueness_bound(p)]
    for call in (
        lambda: tau_constants(p, smin, delta_s=d),
        lambda: measurement_bound(p, d, smin, smin, 1.0),
        lambda: log_covering_count(p, d, smin, smin),
        lambda: recovery_constants(p, d, delta_2s=d),
    ):
        try:
            res = call()
        except DomainError:
            continue
        res = res.as_tuple() if hasattr(res, "as_tuple") else res
        outs.extend(res if isinstance(res, tuple) else [res])
    for v in outs:
        assert v is None or not math.isnan(v)
