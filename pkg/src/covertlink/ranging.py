"""Path-length recovery by padded cross-correlation of click records.

Each selected symbol slot is surrounded by ``N_R + 2M`` idler positions and
correlated against the signal record at each of ``N_R`` candidate lags.  At
the true lag every trial succeeds with probability ``q1``; elsewhere with
``q0 < q1``.  The probability that the true lag strictly wins is

    S_N = sum_{k=1}^{N} f1[k] * F0[k-1]^{N_R}

with ``f1`` the ``Bin(N, q1)`` pmf and ``F0`` the ``Bin(N, q0)`` cdf.  The
analytic lower bound replaces the sum by a two-event tail bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp, rel_entr
from scipy.stats import binom

from covertlink.errors import CovertLinkWarning, DomainError, StructuralError
from covertlink.receivers import (
    CorrelatorModel,
    p_cc_on_lower,
    p_idler_click,
    p_noise_click,
    p_signal_click_on,
    simulate_clicks,
)
from covertlink.signaling import SparsePlan, _philox, make_sparse_plan, normalize_seed

__all__ = [
    "SPEED_OF_LIGHT",
    "RangeEstimate",
    "RangingBoundInputs",
    "RangingScenario",
    "best_varsigma",
    "binary_relative_entropy",
    "generative_trial_probabilities",
    "monte_carlo_ranging",
    "p_match_lower",
    "p_mismatch",
    "p_mismatch_upper",
    "pad_and_correlate",
    "ranging_failure_log10",
    "ranging_success_analytic",
    "ranging_success_exact",
    "simulate_ranging",
]

SPEED_OF_LIGHT = 2.99792458e8
EXACT_WINDOW_ABOVE = 10**5
EXACT_LIMIT = 10**7
_LOG_TINY = math.log(1e-30)


@dataclass(frozen=True)
class RangingScenario:
    """Prior range interval and the physical rates that set the bin grid.

    ``l_l`` and ``l_u`` are path lengths in metres; one bin is one mode
    length ``c / W``.
    """

    l_l: float
    l_u: float
    W: float
    W_M: float
    tau_M: float = 0.5
    N_B: int = 1

    def __post_init__(self):
        if not self.l_u > self.l_l:
            raise DomainError("need l_l < l_u")
        if self.W <= 0 or self.W_M <= 0:
            raise DomainError("bandwidths must be positive")
        if not 0.0 <= self.tau_M <= 1.0:
            raise DomainError("tau_M must lie in [0, 1]")
        if self.N_B < 0:
            raise DomainError("N_B must be >= 0")
        if self.M < 1:
            raise DomainError("W / W_M rounds to zero modes per symbol")

    @property
    def mode_length(self) -> float:
        return SPEED_OF_LIGHT / self.W

    @property
    def M(self) -> int:
        return int(round(self.W / self.W_M))

    @property
    def N_R(self) -> int:
        # guard against (30 m)/(c/W) landing a hair above an integer
        ratio = (self.l_u - self.l_l) / self.mode_length
        return max(1, math.ceil(ratio - 1e-9 * max(1.0, ratio)))

    @property
    def window(self) -> int:
        return self.N_R + 2 * self.M

    @property
    def p_o(self) -> float:
        return self.M / self.window

    @property
    def N(self) -> int:
        return self.window * self.N_B

    @property
    def first_lag(self) -> int:
        """Delay in modes represented by bin 0."""
        return math.floor(self.l_l / self.mode_length)

    def lag_of(self, l: float) -> int:
        """Round-trip delay in modes for a path length ``l``."""
        return math.floor(l / self.mode_length)

    def bin_of(self, l: float) -> int:
        return self.lag_of(l) - self.first_lag

    def estimate(self, bin_index: int) -> float:
        return self.l_l + bin_index * self.mode_length


@dataclass(frozen=True)
class RangingBoundInputs:
    """Trial count, competing bins and per-trial success probabilities."""

    N: int
    N_R: int
    q0: float
    q1: float
    varsigma: float | None = None

    def __post_init__(self):
        if self.N < 1 or self.N_R < 1:
            raise DomainError("N and N_R must be >= 1")
        if not (0.0 <= self.q0 <= 1.0 and 0.0 <= self.q1 <= 1.0):
            raise DomainError("q0 and q1 must be probabilities")
        if not self.q1 > self.q0:
            raise DomainError(f"need q1 > q0, got q0={self.q0}, q1={self.q1}")
        if self.varsigma is not None and not 0.0 < self.varsigma < self.q1 - self.q0:
            raise DomainError("varsigma must lie in (0, q1 - q0)")

    @property
    def margin(self) -> float:
        return self.varsigma if self.varsigma is not None else 0.5 * (self.q1 - self.q0)


# --------------------------------------------------------------------------
# per-trial success probabilities


def p_mismatch(model: CorrelatorModel, scenario: RangingScenario, form: str = "corrected") -> float:
    """Coincidence probability of one trial at a wrong lag.

    At a wrong lag the idler and signal outcomes are independent.  A fraction
    ``p_o tau_M`` of the signal positions carries an "on" return.  The
    ``"printed"`` form weights the noise-only term by ``1 - tau_M`` instead of
    ``1 - p_o tau_M``; it is kept for comparison only.
    """
    on = scenario.p_o * scenario.tau_M
    rest = {"corrected": 1.0 - on, "printed": 1.0 - scenario.tau_M}[form]
    q_sig = 1.0 / (1.0 + model.eta * model.nbar_s + model.noise)
    q_noise = 1.0 / (1.0 + model.noise)
    return p_idler_click(model) * (1.0 - on * q_sig - rest * q_noise)


def p_mismatch_upper(model: CorrelatorModel) -> float:
    """Simplified bound: every signal position treated as carrying a return."""
    return p_idler_click(model) * p_signal_click_on(model)


def _p_star(model: CorrelatorModel, tau_M: float, form: str) -> float:
    n1 = 1.0 + model.noise
    sign = {"corrected": 1.0, "printed": -1.0}[form]
    return 1.0 - 1.0 / n1 + sign * tau_M * model.eta / n1**2


def p_match_lower(model: CorrelatorModel, scenario: RangingScenario, form: str = "corrected") -> float:
    """Lower bound on the coincidence probability of one trial at the true lag.

    ``p_i ((1 - p_o) q_s + p_o p*)`` where ``p*`` is the aligned-position
    coincidence probability given an idler click,
    ``1 - 1/(1+N) + tau_M eta/(1+N)^2``.  ``form="printed"`` flips the sign
    of the ``eta`` term, which can make the result negative.
    """
    p_o = scenario.p_o
    return p_idler_click(model) * ((1.0 - p_o) * p_signal_click_on(model) + p_o * _p_star(model, scenario.tau_M, form))


def generative_trial_probabilities(model: CorrelatorModel, scenario: RangingScenario) -> tuple[float, float]:
    """``(q0, q1)`` realised by :func:`simulate_clicks` under padded correlation.

    At the true lag only the ``p_o tau_M`` share of positions that sit on an
    "on" pulse are correlated; every other position contributes the
    independent noise coincidence.  ``q0`` is the corrected mismatch
    probability, an upper bound on every wrong-lag trial.
    """
    on = scenario.p_o * scenario.tau_M
    q1 = on * p_cc_on_lower(model) + (1.0 - on) * p_idler_click(model) * p_noise_click(model)
    return p_mismatch(model, scenario), q1


# --------------------------------------------------------------------------
# success probability


def binary_relative_entropy(p, q):
    """``D(p || q)`` between Bernoulli laws in nats.

    ``0 log 0 = 0``; a support mismatch (``q`` in ``{0, 1}`` with ``p != q``)
    gives ``inf`` and a warning.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)):
        raise DomainError("arguments must be probabilities")
    d = rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q)
    if np.any(np.isinf(d)):
        warnings.warn("relative entropy is infinite (support mismatch)", CovertLinkWarning, stacklevel=2)
    return float(d) if d.ndim == 0 else d


def _log_cdf(k: np.ndarray, N: int, q: float) -> np.ndarray:
    cdf = binom.cdf(k, N, q)
    with np.errstate(divide="ignore"):
        return np.where(cdf < 0.5, np.log(cdf), np.log1p(-binom.sf(k, N, q)))


def ranging_success_exact(b: RangingBoundInputs, limit: int = EXACT_LIMIT) -> float:
    """``S_N`` evaluated term by term in log space.

    Above ``N = 1e5`` only the ``k`` where the ``Bin(N, q1)`` pmf exceeds
    1e-30 are summed.  Beyond ``limit`` trials a :class:`DomainError` asks
    for the analytic bound instead.
    """
    N = b.N
    if N > limit:
        raise DomainError(f"N={N} exceeds the exact-mode limit {limit}; use ranging_success_analytic")
    if N > EXACT_WINDOW_ABOVE:
        lo = max(1, int(binom.ppf(1e-31, N, b.q1)) - 1)
        hi = min(N, int(binom.isf(1e-31, N, b.q1)) + 1)
        k = np.arange(lo, hi + 1)
    else:
        k = np.arange(1, N + 1)
    log_f1 = binom.logpmf(k, N, b.q1)
    if N > EXACT_WINDOW_ABOVE:
        keep = log_f1 > _LOG_TINY
        k, log_f1 = k[keep], log_f1[keep]
    terms = log_f1 + b.N_R * _log_cdf(k - 1, N, b.q0)
    if k.size == 0 or np.all(np.isneginf(terms)):
        return 0.0
    return float(min(1.0, max(0.0, math.exp(logsumexp(terms)))))


def _log_failure(N: int, N_R: int, q0: float, q1: float, varsigma: float, tail: str) -> float:
    # natural log of 1 - (1 - A)(1 - B)
    cut = q0 + varsigma
    log_A = math.log(N_R) - N * float(binary_relative_entropy(cut, q0))
    if tail == "quadratic":
        log_B = -2.0 * (q1 - cut) ** 2 * N
    elif tail == "relative_entropy":
        log_B = -N * float(binary_relative_entropy(cut, q1))
    else:
        raise DomainError(f"unknown tail {tail!r}")
    if log_A >= 0.0:
        return 0.0
    return float(np.logaddexp(log_A, log_B + math.log1p(-math.exp(log_A))))


def best_varsigma(b: RangingBoundInputs, tail: str = "quadratic") -> float:
    """Margin in ``(0, q1 - q0)`` minimising the analytic failure bound."""
    gap = b.q1 - b.q0
    res = minimize_scalar(
        lambda s: _log_failure(b.N, b.N_R, b.q0, b.q1, s, tail),
        bounds=(gap * 1e-9, gap * (1 - 1e-9)),
        method="bounded",
        options={"xatol": gap * 1e-12},
    )
    default = 0.5 * gap
    if _log_failure(b.N, b.N_R, b.q0, b.q1, default, tail) <= res.fun:
        return default
    return float(res.x)


def ranging_failure_log10(b: RangingBoundInputs, tail: str = "quadratic", optimize: bool = False) -> float:
    """``log10`` of one minus the analytic bound, accurate far below 1e-16."""
    s = best_varsigma(b, tail) if optimize else b.margin
    return _log_failure(b.N, b.N_R, b.q0, b.q1, s, tail) / math.log(10.0)


def ranging_success_analytic(b: RangingBoundInputs, tail: str = "quadratic", optimize: bool = False) -> float:
    """Two-event lower bound ``(1 - N_R e^{-cN}) (1 - e^{-rN})`` on ``S_N``.

    Parameters
    ----------
    b : RangingBoundInputs
        ``varsigma`` defaults to half the gap ``q1 - q0``.
    tail : {"quadratic", "relative_entropy"}
        Bound on ``P[K/N <= q0 + varsigma]``: ``r = 2 delta^2`` (Hoeffding,
        ``delta = q1 - q0 - varsigma``) or ``r = D(q0 + varsigma || q1)``
        (Chernoff).  The second is never weaker.
    optimize : bool
        Search the margin that maximises the bound instead of the default.
    """
    s = best_varsigma(b, tail) if optimize else b.margin
    fail = math.exp(_log_failure(b.N, b.N_R, b.q0, b.q1, s, tail))
    return min(1.0, max(0.0, 1.0 - fail))


# --------------------------------------------------------------------------
# estimator


@dataclass(frozen=True)
class RangeEstimate:
    """Outcome of one correlation sweep; unpacks as ``(bin_index, l_estimate)``."""

    bin_index: int
    l_estimate: float
    tie: bool
    padded: bool
    scores: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.bin_index, self.l_estimate))


def pad_and_correlate(D_i, D_s, plan: SparsePlan, scenario: RangingScenario, chunk: int = 1 << 16) -> RangeEstimate:
    """Pick the lag bin with the largest padded cross-correlation.

    Every selected slot ``u`` contributes the idler window
    ``[uM - M, uM + M + N_R)``; for bin ``b`` each idler click at ``k`` in that
    window scores ``D_s[k + first_lag + b]``.  Positions outside the record
    count as zeros and set ``padded``.  Ties resolve to the lowest bin.
    """
    D_i, D_s = np.asarray(D_i), np.asarray(D_s)
    if D_i.shape != D_s.shape or D_i.ndim != 1 or D_i.size != plan.n:
        raise StructuralError(f"click sequences must both have length n={plan.n}")
    if plan.M != scenario.M:
        raise StructuralError(f"plan M={plan.M} disagrees with scenario M={scenario.M}")
    n, M, N_R, L = plan.n, plan.M, scenario.N_R, scenario.window
    offsets = np.arange(L)
    lags = scenario.first_lag + np.arange(N_R)
    scores = np.zeros(N_R, dtype=np.int64)
    padded = False
    for start in range(0, plan.N_B, max(1, chunk // L)):
        slots = plan.slots[start : start + max(1, chunk // L)]
        pos = (slots * M - M)[:, None] + offsets[None, :]
        inside = (pos >= 0) & (pos < n)
        padded |= not inside.all()
        pos = pos[inside]
        clicks = pos[D_i[pos] == 1]
        for c0 in range(0, clicks.size, chunk):
            tgt = clicks[c0 : c0 + chunk, None] + lags[None, :]
            ok = tgt < n
            padded |= not ok.all()
            vals = np.where(ok, D_s[np.minimum(tgt, n - 1)], 0)
            scores += vals.sum(axis=0, dtype=np.int64)
    best = int(np.argmax(scores))
    tie = bool(np.count_nonzero(scores == scores[best]) > 1)
    if padded:
        warnings.warn("correlation window ran past the record; zero padded", CovertLinkWarning, stacklevel=2)
    return RangeEstimate(best, scenario.estimate(best), tie, padded, scores)


# --------------------------------------------------------------------------
# Monte Carlo


def _trial_seed(seed: bytes, index: int) -> bytes:
    return normalize_seed(seed + index.to_bytes(8, "big"))


def monte_carlo_ranging(b: RangingBoundInputs, trials: int, seed) -> tuple[int, int]:
    """Draw the correlation counts directly and count strict wins of the true bin.

    Returns ``(successes, trials)``.
    """
    gen = _philox(normalize_seed(seed), b"ranging-mc")
    wins = 0
    step = max(1, (1 << 22) // b.N_R)
    for start in range(0, trials, step):
        m = min(step, trials - start)
        K = gen.binomial(b.N, b.q1, size=m)
        X = gen.binomial(b.N, b.q0, size=(m, b.N_R)).max(axis=1)
        wins += int(np.count_nonzero(K > X))
    return wins, trials


def simulate_ranging(
    model: CorrelatorModel,
    scenario: RangingScenario,
    n: int,
    tau: float,
    l_true: float,
    trials: int,
    seed,
) -> tuple[int, int]:
    """End-to-end ranging trials: fresh plan and clicks per trial, then correlation.

    A trial succeeds when the estimate lands on the true bin without a tie.
    Returns ``(successes, trials)``.
    """
    seed = normalize_seed(seed)
    delay = scenario.lag_of(l_true)
    true_bin = scenario.bin_of(l_true)
    if not 0 <= true_bin < scenario.N_R:
        raise DomainError("l_true lies outside the prior interval")
    wins = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CovertLinkWarning)
        for t in range(trials):
            ts = _trial_seed(seed, t)
            plan = make_sparse_plan(n, scenario.M, tau, ts)
            D_i, D_s = simulate_clicks(plan, model, ts, delay=delay)
            est = pad_and_correlate(D_i, D_s, plan, scenario)
            wins += int(est.bin_index == true_bin and not est.tie)
    return wins, trials
