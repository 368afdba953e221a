"""Closed-form covertness quantities for symbol-sparse QPSK signalling.

Willie watches the environment port of the return channel.  To leading order
in Bob's per-mode photon number the per-symbol relative entropy between the
intercepted state and the innocent thermal state is quadratic in ``tau`` and
in the signal power; inverting it against the relative-entropy budget gives
the largest admissible per-slot transmission probability.

Everything here is in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from covertlink.bosonic import ChannelParams, ProbeState
from covertlink.errors import (
    CovertLinkWarning,
    DegenerateSignalError,
    DomainError,
    SingularNoiseError,
)

__all__ = [
    "CovertnessBudget",
    "delta_qre_from_delta_p",
    "qre_quartic_per_symbol",
    "signal_weight",
    "tau_bound",
    "tau_times_sqrt_n",
    "willie_error_floor",
]


def delta_qre_from_delta_p(delta_p: float) -> float:
    """Relative-entropy budget matching a detection-advantage tolerance, 2 delta_p^2."""
    if not 0.0 < delta_p <= 0.5:
        raise DomainError(f"delta_p must lie in (0, 0.5], got {delta_p}")
    return 2.0 * delta_p**2


@dataclass(frozen=True)
class CovertnessBudget:
    """Detection tolerance and the number of available modes ``n = T W``."""

    delta_QRE: float
    n: int

    def __post_init__(self):
        if not self.delta_QRE > 0:
            raise DomainError(f"delta_QRE must be positive, got {self.delta_QRE}")
        if self.n < 1:
            raise DomainError(f"mode budget must be >= 1, got {self.n}")

    @classmethod
    def from_delta_p(cls, delta_p: float, n: int) -> CovertnessBudget:
        return cls(delta_QRE=delta_qre_from_delta_p(delta_p), n=n)

    @classmethod
    def from_time_bandwidth(cls, delta_QRE: float, T: float, W: float) -> CovertnessBudget:
        return cls(delta_QRE=delta_QRE, n=int(round(T * W)))

    @property
    def delta_p(self) -> float:
        return math.sqrt(self.delta_QRE / 2.0)


def willie_error_floor(delta_QRE: float) -> float:
    """Lower bound on Willie's error probability implied by Pinsker's inequality."""
    if delta_QRE < 0:
        raise DomainError("delta_QRE must be >= 0")
    return max(0.0, 0.5 - math.sqrt(2.0 * delta_QRE) / 4.0)


def signal_weight(probe: ProbeState) -> float:
    """n_alpha^2 + 2 n_alpha n_S' + M n_S'^2, the power term of the symbol QRE."""
    a, s = probe.nbar_alpha, probe.nbar_S_prime
    return a * a + 2.0 * a * s + probe.M * s * s


def _noise_term(ch2: ChannelParams) -> float:
    n0 = ch2.eta * ch2.nbar_B
    if n0 <= 0.0:
        raise SingularNoiseError("Willie's thermal floor eta2*nbar_B2 is zero")
    return 2.0 * n0 * (1.0 + n0)


def qre_quartic_per_symbol(probe: ProbeState, ch2: ChannelParams, tau: float) -> float:
    """Leading-order relative entropy of one M-mode symbol slot at Willie.

    ``signal_weight(probe) * tau^2 (1-eta2)^2 / (2 n0 (1 + n0))`` with
    ``n0 = eta2 nbar_B2``.
    """
    noise = _noise_term(ch2)
    return signal_weight(probe) * tau**2 * (1.0 - ch2.eta) ** 2 / noise


def _tau_sqrt_n(probe: ProbeState, ch2: ChannelParams, delta_QRE: float) -> float:
    # tau * sqrt(n), independent of n
    noise = _noise_term(ch2)
    weight = signal_weight(probe)
    if probe.nbar_T == 0.0 or weight == 0.0:
        raise DegenerateSignalError("probe carries no photons; tau is unbounded")
    return math.sqrt(noise / weight) / (1.0 - ch2.eta) * math.sqrt(delta_QRE * probe.M)


def tau_times_sqrt_n(probe: ProbeState, ch2: ChannelParams, budget: CovertnessBudget) -> float:
    """Normalised transmission probability tau * sqrt(n), before clamping."""
    if ch2.eta >= 1.0:
        return math.inf
    return _tau_sqrt_n(probe, ch2, budget.delta_QRE)


def tau_bound(
    probe: ProbeState,
    ch2: ChannelParams,
    budget: CovertnessBudget,
    clamp: bool = True,
) -> float:
    """Largest per-slot transmission probability meeting the QRE budget.

    Solves ``(n / M) * qre_quartic_per_symbol(probe, ch2, tau) = delta_QRE``
    for ``tau``.  With ``clamp`` the result is capped at one and a
    :class:`CovertLinkWarning` is emitted when the cap binds; a lossless
    return channel (``eta2 = 1``) leaks nothing and also yields one.
    """
    if budget.n < probe.M:
        raise DomainError("the mode budget must hold at least one symbol (n >= M)")
    if ch2.eta >= 1.0:
        warnings.warn("eta2 = 1: nothing leaks to Willie, tau set to 1", CovertLinkWarning, stacklevel=2)
        return 1.0
    tau = _tau_sqrt_n(probe, ch2, budget.delta_QRE) / math.sqrt(budget.n)
    if clamp and tau > 1.0:
        warnings.warn(f"tau bound {tau:.4g} exceeds 1; clamped", CovertLinkWarning, stacklevel=2)
        return 1.0
    return tau
