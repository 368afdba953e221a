"""Classical channels induced at Alice's receiver.

Two receivers are modelled:

* a homodyne BPSK link whose bit error rate is estimated from two voltage
  levels, giving a binary symmetric channel, and
* a click correlator that multiplies idler and signal single-photon-detector
  outcomes mode by mode, sums them over an ``M``-mode symbol and thresholds
  the count, giving a binary asymmetric channel.

Capacities are in bits.  The click simulator draws per-mode Bernoulli
outcomes whose joint law on transmitted "on" modes reproduces the k = 1
lower bound on the coincidence probability used by the analytic model.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc
from scipy.stats import binom

from covertlink.errors import (
    CovertLinkWarning,
    DomainError,
    IngestionError,
    StructuralError,
)
from covertlink.signaling import SparsePlan, _philox, normalize_seed

__all__ = [
    "BinaryChannel",
    "CorrelatorModel",
    "HomodyneStats",
    "bac_mutual_information",
    "ber_from_stats",
    "binary_entropy",
    "binomial_sf",
    "bpsk_capacity",
    "bpsk_capacity_interval",
    "correlation_counts",
    "demodulate",
    "homodyne_ber",
    "ook_symbols",
    "optimize_symbol_channel",
    "p_cc_null",
    "p_cc_on_lower",
    "p_idler_click",
    "p_signal_click_on",
    "read_click_stream",
    "simulate_clicks",
    "symbol_channel",
    "wilson_interval",
    "write_click_stream",
    "write_demodulation_csv",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PRIOR_LO, PRIOR_HI = 1e-6, 1.0 - 1e-6


# --------------------------------------------------------------------------
# homodyne BPSK


@dataclass(frozen=True)
class HomodyneStats:
    """Summary statistics of the two homodyne voltage levels."""

    V0: float
    V1: float
    sigma0: float
    sigma1: float
    n_d: int
    z_alpha: float = 1.96

    def __post_init__(self):
        if self.sigma0 < 0 or self.sigma1 < 0:
            raise DomainError("standard deviations must be non-negative")
        if self.n_d < 1:
            raise DomainError("n_d must be >= 1")


def ber_from_stats(s: HomodyneStats) -> float:
    """Bit error rate ``erfc((V1 - V0) / (sqrt(2) (sigma1 + sigma0))) / 2``."""
    spread = s.sigma0 + s.sigma1
    if spread <= 0.0:
        raise DomainError("sigma0 + sigma1 is zero; the error rate is undefined")
    return float(0.5 * erfc((s.V1 - s.V0) / (math.sqrt(2.0) * spread)))


def homodyne_ber(eta: float, nbar_alpha: float, nbar_B: float, nbar_thermal: float = 0.0) -> float:
    """Analytic BPSK homodyne error rate through a thermal-loss channel.

    A coherent amplitude ``sqrt(eta nbar_alpha)`` is read against quadrature
    noise variance ``(1 + 2 N) / 4`` where ``N = (1 - eta) nbar_B + eta
    nbar_thermal`` collects the environment and any thermal part of the probe.
    """
    N = (1.0 - eta) * nbar_B + eta * nbar_thermal
    return float(0.5 * erfc(math.sqrt(2.0 * eta * nbar_alpha / (1.0 + 2.0 * N))))


def wilson_interval(p_hat: float, n_d: int, z_alpha: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Parameters
    ----------
    p_hat : float
        Observed proportion in ``[0, 1]``.
    n_d : int
        Number of trials.
    z_alpha : float
        Normal critical value.

    Returns
    -------
    (lo, hi) : tuple of float
        Clipped to ``[0, 1]``.
    """
    if not 0.0 <= p_hat <= 1.0:
        raise DomainError("p_hat must lie in [0, 1]")
    if n_d < 1:
        raise DomainError("n_d must be >= 1")
    z2 = z_alpha * z_alpha
    denom = 1.0 + z2 / n_d
    center = (p_hat + z2 / (2.0 * n_d)) / denom
    half = z_alpha / denom * math.sqrt(p_hat * (1.0 - p_hat) / n_d + z2 / (4.0 * n_d * n_d))
    return max(0.0, center - half), min(1.0, center + half)


def binary_entropy(p):
    """Binary entropy in bits with ``0 log 0 = 0``; accepts scalars or arrays."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("binary entropy needs p in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p)) - (1.0 - p) * np.log2(1.0 - p)
    h = np.where((p == 0) | (p == 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def bpsk_capacity(ber: float) -> float:
    """Binary-symmetric-channel capacity ``1 - H2(ber)`` in bits.

    An error rate above one half is relabelled (bits flipped) with a warning.
    """
    if not 0.0 <= ber <= 1.0:
        raise DomainError("ber must lie in [0, 1]")
    if ber > 0.5:
        warnings.warn(f"ber={ber:.4g} > 0.5; outputs relabelled", CovertLinkWarning, stacklevel=2)
    return 1.0 - binary_entropy(ber)


def bpsk_capacity_interval(ber_lo: float, ber_hi: float) -> tuple[float, float]:
    """Map a BER interval through the decreasing map ``1 - H2`` on ``[0, 1/2]``."""
    lo, hi = min(ber_lo, 0.5), min(ber_hi, 0.5)
    return 1.0 - binary_entropy(hi), 1.0 - binary_entropy(lo)


# --------------------------------------------------------------------------
# click correlator


@dataclass(frozen=True)
class CorrelatorModel:
    """Two-mode-squeezed-vacuum probe read out with a click correlator."""

    nbar_s: float
    eta: float
    nbar_B: float
    M: int = 1
    p_ook: float = 0.5

    def __post_init__(self):
        if self.nbar_s < 0 or self.nbar_B < 0:
            raise DomainError("photon numbers must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError("eta must lie in [0, 1]")
        if self.M < 1:
            raise DomainError("M must be >= 1")
        if not 0.0 <= self.p_ook <= 1.0:
            raise DomainError("p_ook must lie in [0, 1]")

    @property
    def noise(self) -> float:
        """Thermal photons per mode reaching the signal detector, (1 - eta) nbar_B."""
        return (1.0 - self.eta) * self.nbar_B


def p_idler_click(model: CorrelatorModel) -> float:
    return 1.0 - 1.0 / (1.0 + model.nbar_s)


def p_noise_click(model: CorrelatorModel) -> float:
    return 1.0 - 1.0 / (1.0 + model.noise)


def p_signal_click_on(model: CorrelatorModel) -> float:
    """Signal-detector click probability on an "on" mode, marginal over the idler."""
    return 1.0 - 1.0 / (1.0 + model.eta * model.nbar_s + model.noise)


def p_cc_null(model: CorrelatorModel) -> float:
    """Coincidence probability when the signal carries no return."""
    return p_idler_click(model) * p_noise_click(model)


def p_cc_on_lower(model: CorrelatorModel) -> float:
    """Coincidence probability on an "on" mode, single-photon lower bound."""
    N1 = 1.0 + model.noise
    return p_idler_click(model) * (1.0 - 1.0 / N1 + model.eta / N1**2)


@dataclass(frozen=True)
class BinaryChannel:
    """Binary-input binary-output channel with its input prior."""

    p_one_given_zero: float
    p_one_given_one: float
    prior_one: float = 0.5

    def __post_init__(self):
        for name in ("p_one_given_zero", "p_one_given_one", "prior_one"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")


def binomial_sf(M: int, p: float) -> np.ndarray:
    """``P[Bin(M, p) >= t]`` for ``t = 0 .. M + 1`` as one array.

    The pmf is evaluated term by term and accumulated from the upper end, so
    small upper tails keep full relative precision.
    """
    pmf = binom.pmf(np.arange(M + 1), M, p)
    sf = np.empty(M + 2)
    sf[M + 1] = 0.0
    sf[: M + 1] = np.cumsum(pmf[::-1])[::-1]
    sf[0] = 1.0
    return np.minimum(sf, 1.0)


def symbol_channel(model: CorrelatorModel, threshold: int) -> BinaryChannel:
    """Channel from the transmitted OOK bit to the thresholded coincidence count."""
    if not 0 <= threshold <= model.M:
        raise DomainError(f"threshold must lie in [0, {model.M}], got {threshold}")
    off = binomial_sf(model.M, p_cc_null(model))[threshold]
    on = binomial_sf(model.M, p_cc_on_lower(model))[threshold]
    return BinaryChannel(float(off), float(on), model.p_ook)


def _bac_mi(p10, p11, prior):
    # vectorised I(X;Y) in bits
    py1 = prior * p11 + (1.0 - prior) * p10
    mi = binary_entropy(np.clip(py1, 0, 1)) - prior * binary_entropy(p11) - (1.0 - prior) * binary_entropy(p10)
    return np.maximum(mi, 0.0)


def bac_mutual_information(ch: BinaryChannel) -> float:
    """Mutual information in bits at the channel's stored prior."""
    return float(_bac_mi(ch.p_one_given_zero, ch.p_one_given_one, ch.prior_one))


def _golden_max(p10: np.ndarray, p11: np.ndarray, tol: float = 1e-9):
    a = np.full(p10.shape, PRIOR_LO)
    b = np.full(p10.shape, PRIOR_HI)
    while (b - a).max() > tol:
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = _bac_mi(p10, p11, c) >= _bac_mi(p10, p11, d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    x = 0.5 * (a + b)
    return x, _bac_mi(p10, p11, x)


def optimize_symbol_channel(model: CorrelatorModel) -> tuple[int, float, float]:
    """Best decision threshold and input prior for the correlator channel.

    Every threshold ``0 .. M`` is scanned; for each, the concave mutual
    information is maximised over the prior by golden-section search.

    Returns
    -------
    threshold : int
    prior : float
        Optimal probability of sending "on".
    capacity : float
        Mutual information in bits, in ``[0, 1]``.
    """
    sf0 = binomial_sf(model.M, p_cc_null(model))[: model.M + 1]
    sf1 = binomial_sf(model.M, p_cc_on_lower(model))[: model.M + 1]
    priors, caps = _golden_max(sf0, sf1)
    best = int(np.argmax(caps))
    return best, float(priors[best]), float(min(caps[best], 1.0))


# --------------------------------------------------------------------------
# click-level simulator


def _conditional_rates(model: CorrelatorModel) -> tuple[float, float]:
    """P(signal click | idler click) and P(signal click | no idler click) on "on" modes."""
    p_i = p_idler_click(model)
    p1 = p_cc_on_lower(model)
    q_s = p_signal_click_on(model)
    r1 = p1 / p_i if p_i > 0 else 0.0
    r0 = (q_s - p1) / (1.0 - p_i)
    if not 0.0 <= r0 <= 1.0:
        warnings.warn(
            "signal marginal inconsistent with the coincidence bound at this brightness; "
            "no-idler conditional clamped",
            CovertLinkWarning,
            stacklevel=3,
        )
    return min(r1, 1.0), min(max(r0, 0.0), 1.0)


def ook_symbols(plan: SparsePlan, model: CorrelatorModel, rng_seed) -> np.ndarray:
    """OOK bits carried by each selected slot, in slot order."""
    gen = _philox(normalize_seed(rng_seed), b"ook-bits")
    return (gen.random(plan.N_B) < model.p_ook).astype(np.uint8)


def on_mode_mask(plan: SparsePlan, model: CorrelatorModel, rng_seed) -> np.ndarray:
    """Boolean mask over the ``n`` modes that carry an "on" pulse."""
    bits = ook_symbols(plan, model, rng_seed)
    on_slots = plan.slots[bits.astype(bool)]
    mask = np.zeros(plan.n, dtype=bool)
    idx = (on_slots[:, None] * plan.M + np.arange(plan.M)[None, :]).ravel()
    mask[idx] = True
    return mask


def simulate_clicks(plan: SparsePlan, model: CorrelatorModel, rng_seed, delay: int = 0):
    """Draw idler and signal click records for one pass over ``n`` modes.

    Parameters
    ----------
    plan : SparsePlan
        Selected symbol slots; ``plan.M`` must equal ``model.M``.
    model : CorrelatorModel
    rng_seed : int, str or bytes
        Everything (OOK bits and clicks) derives from this seed.
    delay : int
        Round-trip delay in modes: the return of mode ``k`` lands on signal
        index ``k + delay``.  Returns falling past the end are lost.

    Returns
    -------
    D_i, D_s : ndarray of uint8
        Click indicators of length ``n``.
    """
    if plan.M != model.M:
        raise StructuralError(f"plan uses M={plan.M} but the model M={model.M}")
    if delay < 0:
        raise DomainError("delay must be >= 0")
    seed = normalize_seed(rng_seed)
    n = plan.n
    gen = _philox(seed, b"clicks")
    D_i = gen.random(n) < p_idler_click(model)

    on = on_mode_mask(plan, model, seed)
    prob = np.full(n, p_noise_click(model))
    if delay < n:
        r1, r0 = _conditional_rates(model)
        src_on = on[: n - delay]
        src_i = D_i[: n - delay]
        target = prob[delay:]
        target[src_on & src_i] = r1
        target[src_on & ~src_i] = r0
    D_s = gen.random(n) < prob
    return D_i.astype(np.uint8), D_s.astype(np.uint8)


def _check_lengths(D_i, D_s, plan):
    D_i, D_s = np.asarray(D_i), np.asarray(D_s)
    if D_i.shape != D_s.shape or D_i.ndim != 1 or D_i.size != plan.n:
        raise StructuralError(f"click sequences must both have length n={plan.n}; got {D_i.shape} and {D_s.shape}")
    return D_i, D_s


def correlation_counts(D_i, D_s, plan: SparsePlan, delay: int = 0) -> np.ndarray:
    """Coincidence count ``C_u`` for every selected slot ``u``."""
    D_i, D_s = _check_lengths(D_i, D_s, plan)
    shifted = np.zeros(plan.n, dtype=np.int64)
    if delay < plan.n:
        shifted[: plan.n - delay] = D_s[delay:]
    prod = D_i.astype(np.int64) * shifted
    blocks = prod[: plan.n_slots * plan.M].reshape(plan.n_slots, plan.M)
    return blocks[plan.slots].sum(axis=1)


def demodulate(D_i, D_s, plan: SparsePlan, threshold: int, delay: int = 0) -> np.ndarray:
    """Decide "on" for each selected slot whose coincidence count reaches ``threshold``."""
    return (correlation_counts(D_i, D_s, plan, delay) >= threshold).astype(np.uint8)


def write_demodulation_csv(path, plan: SparsePlan, counts: np.ndarray, decisions: np.ndarray) -> None:
    lines = ["slot_index,C_u,decision"]
    lines += [f"{u},{c},{d}" for u, c, d in zip(plan.slots.tolist(), counts.tolist(), decisions.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


_CLICK_MAGIC = b"CLCK"
_CLICK_HEAD = "<HQQ32s"


def write_click_stream(path, D_i, D_s, M: int, seed) -> None:
    """Store both click records bit-packed behind a ``(n, M, seed)`` header."""
    D_i, D_s = np.asarray(D_i, dtype=np.uint8), np.asarray(D_s, dtype=np.uint8)
    if D_i.shape != D_s.shape:
        raise StructuralError("click records differ in length")
    head = _CLICK_MAGIC + struct.pack(_CLICK_HEAD, 1, D_i.size, M, normalize_seed(seed))
    Path(path).write_bytes(head + np.packbits(D_i).tobytes() + np.packbits(D_s).tobytes())


def read_click_stream(path):
    """Inverse of :func:`write_click_stream`; returns ``(D_i, D_s, n, M, seed)``."""
    blob = Path(path).read_bytes()
    size = struct.calcsize(_CLICK_HEAD)
    if blob[:4] != _CLICK_MAGIC or len(blob) < 4 + size:
        raise IngestionError("not a click stream")
    version, n, M, seed = struct.unpack(_CLICK_HEAD, blob[4 : 4 + size])
    if version != 1:
        raise IngestionError(f"unsupported click stream version {version}")
    nbytes = (n + 7) // 8
    body = np.frombuffer(blob[4 + size :], dtype=np.uint8)
    if body.size != 2 * nbytes:
        raise IngestionError("click stream body has the wrong length")
    D_i = np.unpackbits(body[:nbytes])[:n]
    D_s = np.unpackbits(body[nbytes:])[:n]
    return D_i, D_s, n, M, seed
