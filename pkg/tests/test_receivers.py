import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertlink.errors import (
    CovertLinkWarning,
    DomainError,
    IngestionError,
    StructuralError,
)
from covertlink.receivers import (
    BinaryChannel,
    CorrelatorModel,
    HomodyneStats,
    bac_mutual_information,
    ber_from_stats,
    binary_entropy,
    binomial_sf,
    bpsk_capacity,
    bpsk_capacity_interval,
    correlation_counts,
    demodulate,
    homodyne_ber,
    ook_symbols,
    optimize_symbol_channel,
    p_cc_null,
    p_cc_on_lower,
    p_idler_click,
    p_noise_click,
    read_click_stream,
    simulate_clicks,
    symbol_channel,
    wilson_interval,
    write_click_stream,
    write_demodulation_csv,
)
from covertlink.signaling import make_sparse_plan

mp.mp.dps = 40


def _mp_tail(M, p, t):
    p = mp.mpf(p)
    return mp.fsum(mp.binomial(M, k) * p**k * (1 - p) ** (M - k) for k in range(t, M + 1))


# ---------------------------------------------------------------- homodyne


def test_ber_examples():
    assert ber_from_stats(HomodyneStats(1.0, 1.0, 0.3, 0.2, 10)) == 0.5
    assert ber_from_stats(HomodyneStats(0.0, 2.0, 0.5, 0.5, 10)) == pytest.approx(0.02275013194817920720, rel=1e-14)
    assert ber_from_stats(HomodyneStats(0.0, 1e3, 1e-3, 1e-3, 10)) == 0.0
    with pytest.raises(DomainError):
        ber_from_stats(HomodyneStats(0.0, 1.0, 0.0, 0.0, 10))


def test_homodyne_ber_limits():
    assert homodyne_ber(0.5, 0.0, 1.0) == 0.5
    assert homodyne_ber(1.0, 2.0, 5.0) == pytest.approx(0.5 * math.erfc(2.0))
    assert homodyne_ber(0.9, 4.0, 0.1) < homodyne_ber(0.9, 1.0, 0.1)


def _wilson_textbook(p, n, z):
    # score interval roots of (p - P)^2 = z^2 P(1-P)/n, solved as a quadratic in P
    p, n, z = mp.mpf(p), mp.mpf(n), mp.mpf(z)
    a = 1 + z**2 / n
    b = -(2 * p + z**2 / n)
    c = p**2
    disc = mp.sqrt(b * b - 4 * a * c)
    return (-b - disc) / (2 * a), (-b + disc) / (2 * a)


def test_wilson_frozen():
    lo, hi = wilson_interval(0.1, 100, 1.96)
    assert lo == pytest.approx(0.05522854161313612296, rel=1e-13)
    assert hi == pytest.approx(0.17436730436766540552, rel=1e-13)


@settings(max_examples=100)
@given(st.floats(0, 1), st.integers(1, 10**6), st.floats(0.5, 4))
def test_wilson_quadratic_roots(p, n, z):
    lo, hi = wilson_interval(p, n, z)
    rlo, rhi = _wilson_textbook(p, n, z)
    assert lo == pytest.approx(max(0.0, float(rlo)), abs=1e-12)
    assert hi == pytest.approx(min(1.0, float(rhi)), abs=1e-12)
    center = (p + z * z / (2 * n)) / (1 + z * z / n)
    assert lo <= center <= hi


def test_wilson_boundary_and_scaling():
    assert wilson_interval(0.0, 50)[0] == 0.0
    w2 = np.subtract(*wilson_interval(0.1, 100)[::-1])
    w4 = np.subtract(*wilson_interval(0.1, 10**4)[::-1])
    assert w2 / w4 == pytest.approx(10.0, rel=0.05)
    with pytest.raises(DomainError):
        wilson_interval(1.2, 10)


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.49991595816452799564, rel=1e-14)
    np.testing.assert_allclose(binary_entropy(np.array([0.25, 0.75])), [0.8112781244591328] * 2, rtol=1e-14)


def test_bpsk_capacity():
    assert bpsk_capacity(0.0) == 1.0
    assert bpsk_capacity(0.5) == 0.0
    assert bpsk_capacity(0.02275) == pytest.approx(0.84338562966539261819, rel=1e-13)
    with pytest.warns(CovertLinkWarning):
        bpsk_capacity(0.7)
    lo, hi = bpsk_capacity_interval(0.01, 0.05)
    assert lo == pytest.approx(bpsk_capacity(0.05)) and hi == pytest.approx(bpsk_capacity(0.01))


@given(st.floats(0, 0.5))
def test_capacity_plus_entropy(p):
    assert bpsk_capacity(p) + binary_entropy(p) == 1.0


# ---------------------------------------------------------------- click probabilities


def test_click_probability_examples():
    m = CorrelatorModel(1.0, 0.5, 2.0)
    assert p_cc_null(m) == pytest.approx(0.25, rel=1e-15)
    assert p_cc_on_lower(m) == pytest.approx(0.3125, rel=1e-15)
    assert p_cc_null(CorrelatorModel(1.0, 0.5, 0.0)) == 0.0
    assert p_cc_null(CorrelatorModel(0.0, 0.5, 2.0)) == 0.0
    assert p_cc_on_lower(CorrelatorModel(1.0, 1.0, 7.0)) == pytest.approx(0.5)
    m0 = CorrelatorModel(0.3, 0.0, 2.0)
    assert p_cc_on_lower(m0) == pytest.approx(p_cc_null(m0), rel=1e-15)


@settings(max_examples=200)
@given(st.floats(0, 10), st.floats(0, 1), st.floats(0, 10))
def test_on_dominates_null(ns, eta, nb):
    m = CorrelatorModel(ns, eta, nb)
    on, off = p_cc_on_lower(m), p_cc_null(m)
    assert on >= off - 1e-15
    if eta == 0 or ns == 0:
        assert on == pytest.approx(off, abs=1e-15)
    elif ns > 1e-6 and eta > 1e-6:
        assert on > off


# ---------------------------------------------------------------- binomial channel


@pytest.mark.parametrize("M,p", [(100, 0.01), (100, 0.05), (1000, 0.003), (1000, 0.4), (7, 0.9), (500, 1e-6)])
def test_binomial_tail_vs_exact_sum(M, p):
    sf = binomial_sf(M, p)
    assert sf[0] == 1.0 and sf[M + 1] == 0.0
    assert np.all(np.diff(sf) <= 0)
    for t in sorted({1, 2, 3, M // 10, M // 2, M - 1, M}):
        ref = float(_mp_tail(M, p, t))
        assert sf[t] == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_symbol_channel_threshold_bounds():
    m = CorrelatorModel(0.1, 0.5, 0.1, M=20)
    ch = symbol_channel(m, 0)
    assert ch.p_one_given_zero == 1.0 and ch.p_one_given_one == 1.0
    with pytest.raises(DomainError):
        symbol_channel(m, 21)
    ch = symbol_channel(m, 3)
    assert ch.p_one_given_zero == pytest.approx(float(_mp_tail(20, p_cc_null(m), 3)), rel=1e-12)
    assert ch.p_one_given_one == pytest.approx(float(_mp_tail(20, p_cc_on_lower(m), 3)), rel=1e-12)


def _mi_joint(p10, p11, prior):
    # brute force from the 2x2 joint pmf
    px = [1 - mp.mpf(prior), mp.mpf(prior)]
    pyx = [[1 - mp.mpf(p10), mp.mpf(p10)], [1 - mp.mpf(p11), mp.mpf(p11)]]
    py = [px[0] * pyx[0][y] + px[1] * pyx[1][y] for y in (0, 1)]
    tot = mp.mpf(0)
    for x in (0, 1):
        for y in (0, 1):
            j = px[x] * pyx[x][y]
            if j > 0:
                tot += j * mp.log(j / (px[x] * py[y]), 2)
    return tot


def test_bac_examples():
    assert bac_mutual_information(BinaryChannel(0.0, 1.0, 0.5)) == pytest.approx(1.0, abs=1e-15)
    assert bac_mutual_information(BinaryChannel(0.1, 0.7, 0.4)) == pytest.approx(0.29090498912718424804, rel=1e-13)
    assert float(_mi_joint(0.1, 0.7, 0.4)) == pytest.approx(0.29090498912718424804, rel=1e-15)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_bac_vs_joint(p10, p11, prior):
    assert bac_mutual_information(BinaryChannel(p10, p11, prior)) == pytest.approx(float(_mi_joint(p10, p11, prior)), abs=1e-12)


@given(st.floats(0, 1))
def test_bsc_special_case(p):
    assert bac_mutual_information(BinaryChannel(p, 1 - p, 0.5)) == pytest.approx(1 - binary_entropy(p), abs=1e-9)


def _model_with(p0, p1, M):
    # choose eta, nbar_B for nbar_s so that the two coincidence probabilities hit p0, p1

    ns = 1.0
    pi = p_idler_click(CorrelatorModel(ns, 0.5, 0.0))
    pn = p0 / pi
    # noise click pn fixes N; then eta from p1 = pi (pn + eta/(1+N)^2)
    N = 1 / (1 - pn) - 1
    eta = (p1 / pi - pn) * (1 + N) ** 2
    nb = N / (1 - eta)
    m = CorrelatorModel(ns, eta, nb, M=M)
    assert p_cc_null(m) == pytest.approx(p0, rel=1e-12) and p_cc_on_lower(m) == pytest.approx(p1, rel=1e-12)
    return m


def test_optimizer_matches_brute_force():
    m = _model_with(0.02, 0.2, 20)
    thr, prior, cap = optimize_symbol_channel(m)
    priors = (np.arange(10**4) + 0.5) / 10**4
    best = 0.0
    for t in range(21):
        ch = symbol_channel(m, t)
        vals = np.array([float(_mi_joint(ch.p_one_given_zero, ch.p_one_given_one, q)) for q in priors[::50]])
        q0 = priors[::50][np.argmax(vals)]
        fine = priors[(priors > q0 - 0.006) & (priors < q0 + 0.006)]
        best = max(best, max(float(_mi_joint(ch.p_one_given_zero, ch.p_one_given_one, q)) for q in fine))
    assert cap >= best - 1e-6
    assert cap <= best + 1e-6 or cap - best < 2e-8  # grid spacing 1e-4 bounds the brute-force shortfall
    ch = symbol_channel(CorrelatorModel(m.nbar_s, m.eta, m.nbar_B, m.M, prior), thr)
    assert bac_mutual_information(ch) == pytest.approx(cap, abs=1e-12)


def test_optimizer_identical_hypotheses():
    thr, prior, cap = optimize_symbol_channel(CorrelatorModel(0.0, 0.5, 1.0, M=10))
    assert cap == pytest.approx(0.0, abs=1e-15)


def test_optimizer_monotone_in_eta():
    caps = [optimize_symbol_channel(CorrelatorModel(0.01, eta, 1e-4, M=10**4))[2] for eta in np.arange(1, 10) / 10]
    assert np.all(np.diff(caps) >= -1e-12)
    assert all(0.0 <= c <= 1.0 for c in caps)


# ---------------------------------------------------------------- simulator


MODEL = CorrelatorModel(0.05, 0.5, 0.05, M=100)


def test_simulate_dark_idler():
    plan = make_sparse_plan(10**4, 100, 0.5, 1)
    D_i, D_s = simulate_clicks(plan, CorrelatorModel(0.0, 0.5, 0.05, M=100), 3)
    assert D_i.sum() == 0


def test_simulate_replay():
    plan = make_sparse_plan(10**5, 100, 0.3, 5)
    a = simulate_clicks(plan, MODEL, "s")
    b = simulate_clicks(plan, MODEL, "s")
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    c = simulate_clicks(plan, MODEL, "t")
    assert not np.array_equal(a[0], c[0])


def test_simulate_mismatched_M():
    with pytest.raises(StructuralError):
        simulate_clicks(make_sparse_plan(100, 10, 0.5, 0), MODEL, 0)


def test_joint_click_rate_on_modes():
    model = CorrelatorModel(0.05, 0.5, 0.05, M=100, p_ook=1.0)
    plan = make_sparse_plan(10**6, 100, 1.0, 11)
    D_i, D_s = simulate_clicks(plan, model, 12)
    p1 = p_cc_on_lower(model)
    rate = np.mean(D_i & D_s)
    assert abs(rate - p1) <= 4 * math.sqrt(p1 * (1 - p1) / 10**6)
    p_i = p_idler_click(model)
    assert abs(D_i.mean() - p_i) <= 4 * math.sqrt(p_i * (1 - p_i) / 10**6)


def test_off_modes_are_independent_noise():
    model = CorrelatorModel(0.05, 0.5, 0.05, M=100, p_ook=0.0)
    plan = make_sparse_plan(10**6, 100, 1.0, 21)
    D_i, D_s = simulate_clicks(plan, model, 22)
    p0 = p_cc_null(model)
    assert abs(np.mean(D_i & D_s) - p0) <= 4 * math.sqrt(p0 * (1 - p0) / 10**6)
    pn = p_noise_click(model)
    assert abs(D_s.mean() - pn) <= 4 * math.sqrt(pn * (1 - pn) / 10**6)


def test_demodulate_edges():
    plan = make_sparse_plan(1000, 10, 0.5, 3)
    z = np.zeros(1000, dtype=np.uint8)
    assert demodulate(z, z, plan, 1).sum() == 0
    assert demodulate(z, z, plan, 0).sum() == plan.N_B
    with pytest.raises(StructuralError):
        demodulate(z, z[:-1], plan, 1)


def test_correlation_counts_by_hand():
    plan = make_sparse_plan(12, 4, 1.0, 0)
    D_i = np.array([1, 1, 0, 1, 0, 0, 0, 0, 1, 1, 1, 1], dtype=np.uint8)
    D_s = np.array([1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0], dtype=np.uint8)
    np.testing.assert_array_equal(correlation_counts(D_i, D_s, plan), [2, 0, 3])
    # a delay of one mode pairs D_i[k] with D_s[k + 1]
    np.testing.assert_array_equal(correlation_counts(D_i, D_s, plan, delay=1), [2, 0, 2])


def test_end_to_end_rates():
    plan = make_sparse_plan(10**7, 100, 1.0, 31)
    D_i, D_s = simulate_clicks(plan, MODEL, 32)
    bits = ook_symbols(plan, MODEL, 32).astype(bool)
    dec = demodulate(D_i, D_s, plan, 1).astype(bool)
    ch = symbol_channel(MODEL, 1)
    for sel, p in ((~bits, ch.p_one_given_zero), (bits, ch.p_one_given_one)):
        k = sel.sum()
        assert abs(dec[sel].mean() - p) <= 3 * math.sqrt(p * (1 - p) / k)


def test_bright_probe_clamp_warns():
    with pytest.warns(CovertLinkWarning):
        simulate_clicks(make_sparse_plan(100, 10, 1.0, 0), CorrelatorModel(5.0, 0.1, 0.001, M=10), 0)


def test_click_stream_roundtrip(tmp_path):
    plan = make_sparse_plan(10**4 + 300, 100, 0.2, 4)
    D_i, D_s = simulate_clicks(plan, MODEL, 8)
    write_click_stream(tmp_path / "c.bin", D_i, D_s, 100, 8)
    Ri, Rs, n, M, seed = read_click_stream(tmp_path / "c.bin")
    np.testing.assert_array_equal(Ri, D_i)
    np.testing.assert_array_equal(Rs, D_s)
    assert (n, M) == (plan.n, 100)
    (tmp_path / "bad.bin").write_bytes(b"xxxx")
    with pytest.raises(IngestionError):
        read_click_stream(tmp_path / "bad.bin")


def test_demodulation_csv(tmp_path):
    plan = make_sparse_plan(1000, 10, 0.3, 2)
    D_i, D_s = simulate_clicks(plan, CorrelatorModel(0.5, 0.8, 0.1, M=10), 2)
    counts = correlation_counts(D_i, D_s, plan)
    write_demodulation_csv(tmp_path / "d.csv", plan, counts, (counts >= 1).astype(int))
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "slot_index,C_u,decision"
    assert len(lines) == plan.N_B + 1
