"""Synthetic instrument records with known ground truth.

Scope samples are standardised per class so that the sample mean and the
unbiased standard deviation equal the requested values exactly; analyses of
these fixtures are therefore smooth functions of the generating parameters.
"""

from __future__ import annotations

import numpy as np

from covertlink.dataio import OsaTrace, ScopeTrace, dbm_to_watts

__all__ = ["power_sweep_fixtures", "synthetic_osa", "synthetic_scope"]


def synthetic_osa(power_dbm: float, peak_nm: float = 1550.0, resolution_r: float = 0.02, points: int = 41) -> OsaTrace:
    """Spectrum whose strongest sample, at ``peak_nm``, reads ``power_dbm``."""
    offsets = (np.arange(points) - points // 2) * resolution_r
    shape_db = -3.0 * (offsets / (4 * resolution_r)) ** 2
    return OsaTrace(np.column_stack([peak_nm + offsets, power_dbm + shape_db]), resolution_r)


def synthetic_scope(V0: float, V1: float, sigma: float, n_per_class: int, seed: int = 0, windows: int = 8, dt: float = 1e-6) -> ScopeTrace:
    """Alternating 0/1 windows with exact per-class mean and standard deviation."""
    if n_per_class % windows:
        raise ValueError("n_per_class must be a multiple of windows")
    rng = np.random.default_rng(seed)
    per = n_per_class // windows
    volts = []
    for level in (V0, V1):
        z = rng.standard_normal(n_per_class)
        z = (z - z.mean()) / z.std(ddof=1) if sigma > 0 else np.zeros(n_per_class)
        volts.append(level + sigma * z)
    samples, labels = [], []
    for w in range(2 * windows):
        bit = w % 2
        samples.append(volts[bit][(w // 2) * per : (w // 2 + 1) * per])
        # window edges sit half a sample away from every timestamp
        labels.append(((w * per - 0.5) * dt, ((w + 1) * per - 0.5) * dt, bit))
    v = np.concatenate(samples)
    return ScopeTrace(np.arange(v.size) * dt, v, labels)


def power_sweep_fixtures(
    powers_dbm,
    volts_per_mw: float = 4e4,
    sigma: float = 1.0,
    noise_dbm: float = -70.0,
    n_per_class: int = 12288,
    seed: int = 0,
):
    """One ``(osa_signal, osa_noise, scope)`` triple per input power.

    The level separation grows linearly with the optical power and the noise
    spread is fixed, so the error rate falls and the photon number rises with
    power.
    """
    noise = synthetic_osa(noise_dbm)
    out = []
    for i, p in enumerate(powers_dbm):
        sep = volts_per_mw * dbm_to_watts(p) * 1e3
        out.append((synthetic_osa(p), noise, synthetic_scope(0.0, sep, sigma, n_per_class, seed + i)))
    return out
