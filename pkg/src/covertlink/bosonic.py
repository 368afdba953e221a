r"""Photon statistics of lossy thermal-noise bosonic channels.

Covers the single-mode building blocks used everywhere else:

* geometric (thermal) photon-number distributions,
* propagation of Bob's displaced-thermal probe through a beamsplitter channel,
* Laguerre polynomials and the photon-number distribution of a single photon
  sent through a lossy thermal channel,
* a truncated Fock-space density-matrix oracle for Willie's intercepted state
  and a direct (eigendecomposition) quantum relative entropy.

The oracle builds displaced-thermal matrix elements straight from the
Glauber-Sudarshan P-function, never from a series expansion in the signal
power, so it can be used to check closed-form expansions independently.

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from covertlink.errors import CutoffTooSmallError, DomainError, NumericError

__all__ = [
    "ChannelParams",
    "ProbeState",
    "TruncatedState",
    "build_willie_mixture",
    "default_cutoff",
    "displaced_thermal_matrix",
    "evolve_probe",
    "laguerre",
    "qre_numeric",
    "single_photon_output_pmf",
    "thermal_matrix",
    "thermal_pmf",
    "willie_view",
]

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
EIGEN_FLOOR = 1e-300


@dataclass(frozen=True)
class ChannelParams:
    """Beamsplitter channel with transmittance ``eta`` and thermal environment.

    ``nbar_B`` is the mean environment photon number per mode.
    """

    eta: float
    nbar_B: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"transmittance must lie in [0, 1], got {self.eta}")
        if not self.nbar_B >= 0.0:
            raise DomainError(f"noise photon number must be >= 0, got {self.nbar_B}")

    @property
    def noise_floor(self) -> float:
        """Thermal photons per mode at the output when the input is vacuum."""
        return (1.0 - self.eta) * self.nbar_B


@dataclass(frozen=True)
class ProbeState:
    """Bob's return symbol: coherent part, thermal part and symbol length.

    ``nbar_alpha`` is the coherent photon number of the whole symbol,
    ``nbar_S_prime`` the thermal photon number per mode and ``M`` the number
    of modes per symbol.
    """

    nbar_alpha: float
    nbar_S_prime: float
    M: int = 1

    def __post_init__(self):
        if not self.nbar_alpha >= 0.0:
            raise DomainError(f"nbar_alpha must be >= 0, got {self.nbar_alpha}")
        if not self.nbar_S_prime >= 0.0:
            raise DomainError(f"nbar_S_prime must be >= 0, got {self.nbar_S_prime}")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def nbar_T(self) -> float:
        """Total mean photon number per mode."""
        return self.nbar_alpha / self.M + self.nbar_S_prime

    @property
    def x(self) -> float:
        """Thermal fraction of the per-mode photon number (0 when dark)."""
        total = self.nbar_T
        if total == 0.0:
            return 0.0
        return self.nbar_S_prime / total

    @classmethod
    def from_total(cls, nbar_T: float, x: float, M: int = 1) -> ProbeState:
        """Build a probe from its per-mode photon number and thermal fraction."""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"thermal fraction must lie in [0, 1], got {x}")
        return cls(nbar_alpha=M * (1.0 - x) * nbar_T, nbar_S_prime=x * nbar_T, M=M)


@dataclass(frozen=True)
class TruncatedState:
    """Density matrix on the first ``dim`` Fock levels of each mode.

    ``matrix`` has shape ``(dim**modes, dim**modes)``.  The trace may fall
    short of one by at most ``trunc_tol``, the probability mass lost above the
    cutoff.
    """

    matrix: np.ndarray
    dim: int
    modes: int = 1
    trunc_tol: float = 1e-8
    diagonal: bool = field(default=False, compare=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        size = self.dim ** self.modes
        if mat.shape != (size, size):
            raise NumericError(f"expected a {size}x{size} matrix, got {mat.shape}")
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL * scale:
            raise NumericError("density matrix is not Hermitian")
        tr = float(np.trace(mat).real)
        if tr > 1.0 + 1e-10 or tr < 1.0 - self.trunc_tol:
            raise CutoffTooSmallError(
                f"trace {tr!r} outside [1 - {self.trunc_tol:g}, 1]; raise the Fock cutoff"
            )
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


def thermal_pmf(nbar, k):
    """Photon-number distribution of a thermal state, n^k / (1+n)^(k+1).

    Vectorised over ``k``.  Evaluated as a geometric law in log space so large
    ``k`` does not overflow.
    """
    nbar = float(nbar)
    k_arr = np.asarray(k)
    if nbar < 0 or np.any(k_arr < 0):
        raise DomainError("thermal_pmf needs nbar >= 0 and k >= 0")
    if nbar == 0.0:
        out = np.where(k_arr == 0, 1.0, 0.0)
    else:
        ratio = nbar / (1.0 + nbar)
        out = np.exp(k_arr * math.log(ratio)) / (1.0 + nbar)
    return float(out) if np.ndim(out) == 0 else out


def evolve_probe(probe: ProbeState, ch: ChannelParams) -> ProbeState:
    """Send a probe through a beamsplitter channel.

    The coherent photon number is attenuated by ``eta`` and the thermal part
    becomes the convex mixture ``(1-eta) nbar_B + eta nbar_S_prime``.
    """
    return ProbeState(
        nbar_alpha=ch.eta * probe.nbar_alpha,
        nbar_S_prime=(1.0 - ch.eta) * ch.nbar_B + ch.eta * probe.nbar_S_prime,
        M=probe.M,
    )


def willie_view(ch2: ChannelParams) -> ChannelParams:
    """The complementary port of channel 2, i.e. what leaks to Willie.

    Willie collects a ``1 - eta2`` fraction of Bob's light mixed with the
    transmitted environment mode, so he sees the beamsplitter with
    transmittance ``1 - eta2`` and the same thermal environment.
    """
    return ChannelParams(eta=1.0 - ch2.eta, nbar_B=ch2.nbar_B)


def laguerre(m: int, x):
    """Laguerre polynomial L_m(x) from the three-term recurrence.

    (k+1) L_{k+1} = (2k+1-x) L_k - k L_{k-1}.  Vectorised over ``x``.
    """
    if int(m) != m or m < 0:
        raise DomainError(f"Laguerre order must be a non-negative integer, got {m}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if m == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = 1.0 - x
    for k in range(1, int(m)):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return float(cur) if cur.ndim == 0 else cur


def single_photon_output_pmf(ch: ChannelParams, m):
    """<m| rho | m> for a single photon sent through a lossy thermal channel.

    With N = (1-eta) nbar_B the result is the thermal law of N plus the
    correction eta N^(m-1) (m - N) / (1+N)^(m+2).  At m = 0 the N^(m-1) factor
    is a removable singularity and the correction is -eta/(1+N)^2.
    Vectorised over ``m``.
    """
    m_arr = np.asarray(m)
    if np.any(m_arr < 0):
        raise DomainError("photon count must be >= 0")
    N = ch.noise_floor
    eta = ch.eta
    base = thermal_pmf(N, m_arr)
    m_f = m_arr.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if N == 0.0:
            corr = np.where(m_arr == 1, eta, 0.0)
        else:
            corr = eta * np.exp((m_f - 1) * math.log(N) - (m_f + 2) * math.log1p(N)) * (m_f - N)
    corr = np.where(m_arr == 0, -eta / (1.0 + N) ** 2, corr)
    out = base + corr
    return float(out) if np.ndim(out) == 0 else out


def default_cutoff(nbar_max: float) -> int:
    """Starting Fock cutoff, max(20, ceil(10 (1 + nbar_max)))."""
    return max(20, math.ceil(10.0 * (1.0 + nbar_max)))


def _cutoff_for(nbar: float, modes: int, tol: float) -> int:
    # thermal tail above d is (n/(1+n))^d per mode; union bound over modes
    dim = default_cutoff(nbar)
    if nbar > 0:
        ratio = nbar / (1.0 + nbar)
        need = math.ceil(math.log(tol / (2.0 * modes)) / math.log(ratio))
        dim = max(dim, need)
    return dim


def thermal_matrix(nbar: float, dim: int) -> np.ndarray:
    """Diagonal thermal density matrix truncated to ``dim`` levels."""
    return np.diag(thermal_pmf(nbar, np.arange(dim))).astype(complex)


def displaced_thermal_matrix(nbar: float, alpha: complex, dim: int, nodes: int | None = None) -> np.ndarray:
    r"""Fock matrix elements of a displaced thermal state.

    Integrates the P-function ``exp(-|beta-alpha|^2/nbar)/(pi nbar)`` against
    ``|beta><beta|``.  Completing the square merges the coherent-state overlap
    ``exp(-|beta|^2)`` into the Gaussian weight, leaving a polynomial of degree
    ``m + k`` in the quadrature variable, so a tensor Gauss-Hermite rule with
    ``nodes >= dim`` points per axis is exact up to rounding.
    """
    if nbar < 0:
        raise DomainError("thermal photon number must be >= 0")
    if nodes is None:
        nodes = dim + 10
    s2 = nbar / (1.0 + nbar)
    u, wu = np.polynomial.hermite.hermgauss(nodes)
    re, im = np.meshgrid(u, u, indexing="ij")
    w = (re + 1j * im).ravel()
    weights = (np.outer(wu, wu) / math.pi).ravel()
    beta = alpha / (1.0 + nbar) + math.sqrt(s2) * w

    # f_m(beta) = beta^m / sqrt(m!) by recurrence
    f = np.empty((dim, beta.size), dtype=complex)
    f[0] = 1.0
    for m in range(1, dim):
        f[m] = f[m - 1] * beta / math.sqrt(m)
    prefactor = math.exp(-abs(alpha) ** 2 / (1.0 + nbar)) / (1.0 + nbar)
    rho = prefactor * (f * weights) @ f.conj().T
    return 0.5 * (rho + rho.conj().T)


def _kron_power(mat: np.ndarray, power: int) -> np.ndarray:
    out = mat
    for _ in range(power - 1):
        out = np.kron(out, mat)
    return out


def build_willie_mixture(
    probe: ProbeState,
    ch2: ChannelParams,
    tau: float,
    dim: int | None = None,
    trunc_tol: float = 1e-8,
) -> TruncatedState:
    """Willie's state for one symbol slot, in a truncated Fock basis.

    ``probe`` is Bob's return symbol entering channel 2.  Willie sees the
    innocent thermal state ``eta2 nbar_B2`` with probability ``1 - tau`` and,
    with probability ``tau``, a QPSK-averaged displaced thermal state whose
    displacement is spread evenly over the ``M`` modes.

    Parameters
    ----------
    probe : ProbeState
        Bob's output; only ``M`` in {1, 2} is supported.
    ch2 : ChannelParams
        Return channel; Willie holds its complementary output.
    tau : float
        Probability that the slot carries a symbol.
    dim : int, optional
        Fock cutoff per mode.  Chosen from the largest thermal photon number
        when omitted.
    trunc_tol : float
        Allowed trace deficit from the cutoff.

    Returns
    -------
    TruncatedState
    """
    if probe.M not in (1, 2):
        raise DomainError("the Fock oracle supports M = 1 or M = 2 only")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    at_willie = evolve_probe(probe, willie_view(ch2))
    n0 = ch2.eta * ch2.nbar_B
    n_w = at_willie.nbar_S_prime
    amp = math.sqrt(at_willie.nbar_alpha / probe.M)
    M = probe.M
    if dim is None:
        dim = _cutoff_for(max(n0, n_w + amp**2), M, trunc_tol)

    innocent = _kron_power(thermal_matrix(n0, dim), M)
    if tau == 0.0:
        return TruncatedState(innocent, dim, M, trunc_tol, diagonal=True)
    signal = np.zeros_like(innocent)
    for q in range(4):
        alpha = amp * np.exp(0.5j * math.pi * q)
        signal += _kron_power(displaced_thermal_matrix(n_w, alpha, dim), M)
    mix = (1.0 - tau) * innocent + 0.25 * tau * signal
    return TruncatedState(mix, dim, M, trunc_tol)


def innocent_state(ch2: ChannelParams, M: int, dim: int, trunc_tol: float = 1e-8) -> TruncatedState:
    """Willie's no-transmission state, the M-fold thermal state of ``eta2 nbar_B2``."""
    return TruncatedState(
        _kron_power(thermal_matrix(ch2.eta * ch2.nbar_B, dim), M), dim, M, trunc_tol, diagonal=True
    )


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def qre_numeric(rho: TruncatedState, sigma: TruncatedState) -> float:
    """Quantum relative entropy Tr[rho (log rho - log sigma)] in nats.

    Both states are renormalised on the truncated space before the entropy is
    taken, which cancels the first-order effect of the discarded tail.
    ``sigma`` must be full rank on the truncated space.
    """
    if rho.matrix.shape != sigma.matrix.shape:
        raise NumericError("rho and sigma have different dimensions")
    a = rho.matrix / rho.trace
    b = sigma.matrix / sigma.trace

    lam = np.linalg.eigvalsh(a)
    if lam.min() < -PSD_TOL * max(1.0, lam.max()):
        raise NumericError(f"rho is not positive semidefinite (min eigenvalue {lam.min():.3e})")
    first = float(np.sum(_xlogx(np.clip(lam, 0.0, None))))

    if sigma.diagonal or np.count_nonzero(b - np.diag(np.diag(b))) == 0:
        mu = np.diag(b).real
        if mu.min() <= 0:
            raise NumericError("sigma is not full rank on the truncated space")
        second = float(np.sum(np.diag(a).real * np.log(mu)))
    else:
        mu, vec = np.linalg.eigh(b)
        if mu.min() < -PSD_TOL * max(1.0, mu.max()):
            raise NumericError("sigma is not positive semidefinite")
        log_b = (vec * np.log(np.maximum(mu, EIGEN_FLOOR))) @ vec.conj().T
        second = float(np.real(np.sum(a.T * log_b)))
    value = first - second
    if value < -1e-10:
        raise NumericError(f"relative entropy came out negative ({value:.3e})")
    return value
