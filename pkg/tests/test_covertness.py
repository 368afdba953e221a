import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from covertlink.bosonic import (
    ChannelParams,
    ProbeState,
    build_willie_mixture,
    innocent_state,
    qre_numeric,
)
from covertlink.covertness import (
    CovertnessBudget,
    delta_qre_from_delta_p,
    qre_quartic_per_symbol,
    signal_weight,
    tau_bound,
    tau_times_sqrt_n,
    willie_error_floor,
)
from covertlink.errors import (
    CovertLinkWarning,
    DegenerateSignalError,
    DomainError,
    SingularNoiseError,
)

CH = ChannelParams(0.5, 1.0)


def test_delta_qre_from_delta_p():
    assert delta_qre_from_delta_p(0.5) == 0.5
    with pytest.raises(DomainError):
        delta_qre_from_delta_p(0.0)
    with pytest.raises(DomainError):
        delta_qre_from_delta_p(0.6)


def test_budget_roundtrip():
    b = CovertnessBudget.from_delta_p(math.sqrt(0.025), 100)
    assert b.delta_QRE == pytest.approx(0.05, rel=1e-15)
    assert b.delta_p == pytest.approx(0.1581138830084, rel=1e-12)
    assert CovertnessBudget.from_time_bandwidth(0.05, 100.0, 1e12).n == 10**14
    with pytest.raises(DomainError):
        CovertnessBudget(0.05, 0)
    with pytest.raises(DomainError):
        CovertnessBudget(0.0, 10)


def test_willie_error_floor():
    assert willie_error_floor(0.0) == 0.5
    assert willie_error_floor(0.05) == pytest.approx(0.4209430584957905167, rel=1e-14)
    assert willie_error_floor(8.0) == 0.0


def test_quartic_examples():
    probe = ProbeState(1.0, 0.0, 1)
    assert qre_quartic_per_symbol(probe, CH, 0.0) == 0.0
    assert qre_quartic_per_symbol(probe, CH, 0.1) == pytest.approx(1 / 600, rel=1e-14)
    with pytest.raises(SingularNoiseError):
        qre_quartic_per_symbol(probe, ChannelParams(0.5, 0.0), 0.1)


def test_quartic_matches_fock_oracle():
    probe = ProbeState(1e-2, 0.0, 1)
    rho = build_willie_mixture(probe, CH, 0.1)
    num = qre_numeric(rho, innocent_state(CH, 1, rho.dim))
    assert qre_quartic_per_symbol(probe, CH, 0.1) == pytest.approx(num, rel=0.1)


def test_signal_weight():
    assert signal_weight(ProbeState(2.0, 3.0, 4)) == 4 + 12 + 36


def test_tau_bound_example():
    b = CovertnessBudget(0.05, 10**6)
    tau = tau_bound(ProbeState(1.0, 0.0, 1), CH, b)
    assert tau == pytest.approx(5.477225575051661135e-4, rel=1e-13)
    assert tau_times_sqrt_n(ProbeState(1.0, 0.0, 1), CH, b) == pytest.approx(0.5477225575051661135, rel=1e-13)


def test_tau_bound_errors_and_flags():
    b = CovertnessBudget(0.05, 10**6)
    with pytest.raises(DegenerateSignalError):
        tau_bound(ProbeState(0.0, 0.0, 1), CH, b)
    with pytest.warns(CovertLinkWarning):
        assert tau_bound(ProbeState(1.0, 0.0, 1), ChannelParams(1.0, 1.0), b) == 1.0
    with pytest.warns(CovertLinkWarning):
        assert tau_bound(ProbeState(1e-6, 0.0, 1), CH, CovertnessBudget(0.05, 10)) == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert tau_bound(ProbeState(1e-6, 0.0, 1), CH, CovertnessBudget(0.05, 10), clamp=False) > 1.0
    with pytest.raises(DomainError):
        tau_bound(ProbeState(1.0, 0.0, 8), CH, CovertnessBudget(0.05, 4))


def _displacement_only(ch2, a, dq, M, n):
    n0 = ch2.eta * ch2.nbar_B
    return math.sqrt(2 * n0 * (1 + n0)) / ((1 - ch2.eta) * a) * math.sqrt(dq * M / n)


def _thermal_only(ch2, s, dq, n):
    n0 = ch2.eta * ch2.nbar_B
    return math.sqrt(2 * n0 * (1 + n0)) / ((1 - ch2.eta) * s) * math.sqrt(dq / n)


params = dict(
    eta=st.floats(0.01, 0.99),
    nb=st.floats(1e-4, 10.0),
    a=st.floats(1e-3, 10.0),
    s=st.floats(1e-3, 10.0),
    M=st.integers(1, 64),
    dq=st.floats(1e-4, 1.0),
    n=st.integers(10**6, 10**14),
)


@settings(max_examples=200)
@given(**params)
def test_single_source_forms(eta, nb, a, s, M, dq, n):
    ch2 = ChannelParams(eta, nb)
    b = CovertnessBudget(dq, n)
    t1 = tau_bound(ProbeState(a, 0.0, M), ch2, b, clamp=False)
    assert t1 == pytest.approx(_displacement_only(ch2, a, dq, M, n), rel=1e-12)
    t2 = tau_bound(ProbeState(0.0, s, M), ch2, b, clamp=False)
    assert t2 == pytest.approx(_thermal_only(ch2, s, dq, n), rel=1e-12)


@settings(max_examples=200)
@given(**params)
def test_budget_closure(eta, nb, a, s, M, dq, n):
    ch2 = ChannelParams(eta, nb)
    probe = ProbeState(a, s, M)
    tau = tau_bound(probe, ch2, CovertnessBudget(dq, n), clamp=False)
    assert n * qre_quartic_per_symbol(probe, ch2, tau) / M == pytest.approx(dq, rel=1e-12)


@given(**params)
def test_tau_sqrt_n_scaling(eta, nb, a, s, M, dq, n):
    ch2 = ChannelParams(eta, nb)
    probe = ProbeState(a, 0.0, M)
    v1 = tau_times_sqrt_n(probe, ch2, CovertnessBudget(dq, n))
    assert tau_times_sqrt_n(probe, ch2, CovertnessBudget(dq, 2 * n)) == pytest.approx(v1, rel=1e-14)
    assert tau_times_sqrt_n(ProbeState(2 * a, 0.0, M), ch2, CovertnessBudget(dq, n)) == pytest.approx(v1 / 2, rel=1e-14)


def test_tau_bound_monotone_on_grid():
    grid = np.geomspace(1e-3, 10, 12)
    b = CovertnessBudget(0.05, 10**8)
    for s in (0.0, 0.1):
        taus = [tau_bound(ProbeState(a, s, 2), CH, b, clamp=False) for a in grid]
        assert np.all(np.diff(taus) <= 0)
    taus = [tau_bound(ProbeState(0.2, s, 2), CH, b, clamp=False) for s in grid]
    assert np.all(np.diff(taus) <= 0)
    taus = [tau_bound(ProbeState(0.2, 0.1, 2), CH, CovertnessBudget(0.05, int(n)), clamp=False) for n in np.geomspace(1e4, 1e12, 9)]
    assert np.all(np.diff(taus) <= 0)
    taus = [tau_bound(ProbeState(0.2, 0.1, 2), CH, CovertnessBudget(d, 10**8), clamp=False) for d in grid / 10]
    assert np.all(np.diff(taus) >= 0)
    taus = [tau_bound(ProbeState(0.2, 0.1, 2), ChannelParams(0.5, nb), b, clamp=False) for nb in grid]
    assert np.all(np.diff(taus) >= 0)


@settings(max_examples=100)
@given(st.floats(0.0, 1.0), st.floats(0.01, 0.99), st.floats(1e-3, 5.0))
def test_quartic_nonnegative_and_quadratic_in_tau(tau, eta, nb):
    assume(tau > 0)
    probe = ProbeState(0.3, 0.2, 2)
    ch2 = ChannelParams(eta, nb)
    q = qre_quartic_per_symbol(probe, ch2, tau)
    assert q >= 0
    assert qre_quartic_per_symbol(probe, ch2, tau / 2) == pytest.approx(q / 4, rel=1e-13)
