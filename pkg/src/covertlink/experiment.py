"""Batch pipelines: parameter sweeps, ranging tables, the Fock-space QRE check
and the end-to-end analysis of measured traces.

Every pipeline takes a dataclass config and returns ``(columns, rows)`` ready
for :func:`covertlink.dataio.write_table`.  Random draws derive from the
config's master seed and the row index only, so the output does not depend on
how many workers evaluated the rows.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from covertlink.bosonic import (
    ChannelParams,
    ProbeState,
    build_willie_mixture,
    evolve_probe,
    innocent_state,
    qre_numeric,
)
from covertlink.covertness import (
    CovertnessBudget,
    qre_quartic_per_symbol,
    tau_bound,
    tau_times_sqrt_n,
)
from covertlink.dataio import (
    OsaTrace,
    ScopeTrace,
    estimate_levels,
    photons_per_mode_from_osa,
)
from covertlink.errors import (
    ConfigError,
    CovertLinkWarning,
    DegenerateSignalError,
    DomainError,
)
from covertlink.ranging import (
    RangingBoundInputs,
    RangingScenario,
    generative_trial_probabilities,
    monte_carlo_ranging,
    p_match_lower,
    p_mismatch,
    ranging_success_analytic,
    ranging_success_exact,
    simulate_ranging,
)
from covertlink.receivers import (
    CorrelatorModel,
    ber_from_stats,
    bpsk_capacity,
    bpsk_capacity_interval,
    demodulate,
    homodyne_ber,
    ook_symbols,
    optimize_symbol_channel,
    simulate_clicks,
    wilson_interval,
)
from covertlink.signaling import (
    covert_bits_lower_bound,
    covert_capacity_L,
    make_sparse_plan,
)

__all__ = [
    "RANGING_COLUMNS",
    "ExperimentConfig",
    "ExperimentReport",
    "QreOracleConfig",
    "RangingConfig",
    "SweepConfig",
    "analyze_experiment",
    "evaluate_point",
    "experiment_table",
    "point_seed",
    "qre_oracle_table",
    "ranging_table",
    "run_experiment",
    "run_sweep",
    "tau_table",
]

SCHEMES = ("correlator", "bpsk-homodyne")


def point_seed(master_seed, index: int) -> bytes:
    """Seed of sweep point ``index``: SHA-256 of the master seed and the index."""
    return hashlib.sha256(f"{master_seed}:{index}".encode()).digest()


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepConfig:
    """Fixed link parameters plus one swept parameter.

    ``n`` and ``M`` may be given directly or derived as ``round(T W)`` and
    ``round(W / W_M)`` when ``T``, ``W`` and ``W_M`` are set.
    """

    scheme: str = "bpsk-homodyne"
    sweep: str = "nbar_alpha"
    grid: tuple = (1.0,)
    eta1: float = 1.0
    nbar_B1: float = 0.0
    eta2: float = 0.5
    nbar_B2: float = 1.0
    nbar_alpha: float = 1.0
    nbar_S_prime: float = 0.0
    nbar_s: float = 0.01
    p_ook: float = 0.5
    M: int = 1
    n: int | None = 10**6
    T: float | None = None
    W: float | None = None
    W_M: float | None = None
    delta_QRE: float = 0.05
    vartheta: float = 0.0
    master_seed: int = 0
    mc_symbols: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        grid = tuple(float(v) for v in np.atleast_1d(self.grid))
        if not grid or not all(math.isfinite(v) for v in grid):
            raise ConfigError("grid must be non-empty and finite")
        object.__setattr__(self, "grid", grid)
        if self.sweep not in _SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.sweep!r}; choose from {sorted(_SWEEPABLE)}")

    @property
    def modes(self) -> int:
        if self.T is not None and self.W is not None:
            return int(round(self.T * self.W))
        if self.n is None:
            raise ConfigError("give either n or both T and W")
        return int(self.n)

    @property
    def symbol_length(self) -> int:
        if self.W is not None and self.W_M is not None:
            return int(round(self.W / self.W_M))
        return int(self.M)

    def at(self, value: float) -> SweepConfig:
        """This config with the swept parameter pinned to ``value``."""
        kind = type(getattr(self, self.sweep)) if getattr(self, self.sweep) is not None else float
        value = int(round(value)) if kind is int else float(value)
        return replace(self, **{self.sweep: value})


_SWEEPABLE = {
    "eta1", "nbar_B1", "eta2", "nbar_B2", "nbar_alpha", "nbar_S_prime", "nbar_s", "p_ook",
    "M", "n", "T", "W", "W_M", "delta_QRE", "vartheta",
}

SWEEP_COLUMNS = [
    "value", "n", "M", "tau_sqrt_n", "tau", "clamped", "ber", "threshold", "prior",
    "capacity", "L", "total_bits", "point_seed", "mc_p10", "mc_p11",
]


def _tau(probe: ProbeState, ch2: ChannelParams, budget: CovertnessBudget) -> tuple[float, float, bool]:
    try:
        ts = tau_times_sqrt_n(probe, ch2, budget)
    except DegenerateSignalError:
        ts = math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CovertLinkWarning)
        tau = 1.0 if math.isinf(ts) else tau_bound(probe, ch2, budget)
    return ts, tau, ts / math.sqrt(budget.n) > 1.0


def _correlator_model(cfg: SweepConfig) -> CorrelatorModel:
    return CorrelatorModel(cfg.nbar_s, cfg.eta1 * cfg.eta2, cfg.nbar_B2, cfg.symbol_length, cfg.p_ook)


def evaluate_point(cfg: SweepConfig, seed: bytes = b"") -> dict:
    """Covertness, capacity and throughput for one fully specified config.

    ``bpsk-homodyne`` sends a coherent probe read by homodyne detection;
    ``correlator`` sends the signal arm of a two-mode squeezed vacuum and
    reads it with the click correlator at its optimal threshold and prior.
    """
    n, M = cfg.modes, cfg.symbol_length
    ch1 = ChannelParams(cfg.eta1, cfg.nbar_B1)
    ch2 = ChannelParams(cfg.eta2, cfg.nbar_B2)
    budget = CovertnessBudget(cfg.delta_QRE, n)
    out = dict.fromkeys(SWEEP_COLUMNS, math.nan)
    out.update(n=n, M=M, point_seed=seed.hex()[:16])
    if cfg.scheme == "bpsk-homodyne":
        probe = evolve_probe(ProbeState(cfg.nbar_alpha, cfg.nbar_S_prime, M), ch1)
        ber = homodyne_ber(cfg.eta2, probe.nbar_alpha, cfg.nbar_B2, probe.nbar_S_prime)
        out.update(ber=ber, capacity=bpsk_capacity(ber))
    else:
        probe = evolve_probe(ProbeState(0.0, cfg.nbar_s, M), ch1)
        model = _correlator_model(cfg)
        thr, prior, cap = optimize_symbol_channel(model)
        out.update(threshold=thr, prior=prior, capacity=cap)
        if cfg.mc_symbols > 0:
            out.update(_mc_rates(replace(model, p_ook=0.5), thr, cfg.mc_symbols, seed))
    ts, tau, clamped = _tau(probe, ch2, budget)
    out.update(tau_sqrt_n=ts, tau=tau, clamped=clamped)
    out["L"] = covert_capacity_L(tau, out["capacity"], n, M, cfg.vartheta)
    out["total_bits"] = covert_bits_lower_bound(tau, out["capacity"], n, M, cfg.vartheta)
    return out


def _mc_rates(model: CorrelatorModel, threshold: int, symbols: int, seed: bytes) -> dict:
    plan = make_sparse_plan(symbols * model.M, model.M, 1.0, seed)
    D_i, D_s = simulate_clicks(plan, model, seed)
    bits = ook_symbols(plan, model, seed).astype(bool)
    dec = demodulate(D_i, D_s, plan, threshold)
    return {"mc_p10": float(dec[~bits].mean()), "mc_p11": float(dec[bits].mean())}


def _parallel(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_sweep(cfg: SweepConfig):
    """Evaluate every grid point; rows come back in grid order."""

    def one(item):
        i, v = item
        row = evaluate_point(cfg.at(v), point_seed(cfg.master_seed, i))
        row["value"] = v
        return [row[c] for c in SWEEP_COLUMNS]

    rows = _parallel(one, list(enumerate(cfg.grid)), cfg.workers)
    return [cfg.sweep if c == "value" else c for c in SWEEP_COLUMNS], rows


def tau_table(cfg: SweepConfig):
    """Transmission bound per grid point and the QRE it spends (should equal delta_QRE)."""
    columns = [cfg.sweep, "n", "M", "tau_sqrt_n", "tau", "clamped", "qre_total"]
    rows = []
    for v in cfg.grid:
        c = cfg.at(v)
        n, M = c.modes, c.symbol_length
        probe = evolve_probe(ProbeState(c.nbar_alpha, c.nbar_S_prime, M), ChannelParams(c.eta1, c.nbar_B1))
        ch2 = ChannelParams(c.eta2, c.nbar_B2)
        ts, tau, clamped = _tau(probe, ch2, CovertnessBudget(c.delta_QRE, n))
        spent = n / M * qre_quartic_per_symbol(probe, ch2, tau) if probe.nbar_T > 0 and c.eta2 < 1 else 0.0
        rows.append([v, n, M, ts, tau, clamped, spent])
    return columns, rows


# --------------------------------------------------------------------------
# ranging


RANGING_COLUMNS = ["n", "N_B", "N_R", "q0", "q1", "exact_bound", "analytic_bound", "empirical_rate", "trials"]


@dataclass(frozen=True)
class RangingConfig:
    """Ranging scenario swept over the mode budget ``n``.

    ``q_model="closed-form"`` uses the mismatch/match expressions; ``"generative"``
    uses the probabilities realised by the click simulator.  ``mode="clicks"``
    runs full click-level trials (small ``n`` only); ``"binomial"`` samples
    the correlation counts directly.
    """

    n_grid: tuple = (10**5, 10**6, 10**7)
    l_l: float = 0.0
    l_u: float = 0.0149
    W: float = 1e12
    W_M: float = 1e11
    tau_M: float = 0.5
    nbar_s: float = 0.1
    eta: float = 0.8
    nbar_B: float = 0.01
    eta2: float = 0.8
    nbar_B2: float = 1e-5
    delta_QRE: float = 0.05
    tau: float | None = None
    l_true: float | None = None
    trials: int = 200
    master_seed: int = 0
    q_model: str = "closed-form"
    mode: str = "binomial"
    tail: str = "quadratic"

    def __post_init__(self):
        grid = tuple(int(round(float(v))) for v in np.atleast_1d(self.n_grid))
        if not grid or min(grid) < 1:
            raise ConfigError("n_grid must hold positive mode counts")
        object.__setattr__(self, "n_grid", grid)
        if self.q_model not in ("closed-form", "generative"):
            raise ConfigError("q_model must be 'closed-form' or 'generative'")
        if self.mode not in ("binomial", "clicks"):
            raise ConfigError("mode must be 'binomial' or 'clicks'")
        if self.tail not in ("quadratic", "relative_entropy"):
            raise ConfigError("tail must be 'quadratic' or 'relative_entropy'")


def ranging_row(cfg: RangingConfig, n: int, seed: bytes) -> list:
    base = RangingScenario(cfg.l_l, cfg.l_u, cfg.W, cfg.W_M, cfg.tau_M, 1)
    M = base.M
    if n % M:
        raise ConfigError(f"M={M} must divide n={n}")
    tau = cfg.tau
    if tau is None:
        probe = ProbeState(0.0, cfg.nbar_s, M)
        tau = _tau(probe, ChannelParams(cfg.eta2, cfg.nbar_B2), CovertnessBudget(cfg.delta_QRE, n))[1]
    N_B = math.floor(tau * n / M)
    sc = replace(base, N_B=N_B)
    model = CorrelatorModel(cfg.nbar_s, cfg.eta, cfg.nbar_B, M, cfg.tau_M)
    if cfg.q_model == "closed-form":
        q0, q1 = p_mismatch(model, sc), p_match_lower(model, sc)
    else:
        q0, q1 = generative_trial_probabilities(model, sc)
    exact = analytic = rate = math.nan
    if N_B >= 1 and q1 > q0:
        b = RangingBoundInputs(sc.N, sc.N_R, q0, q1)
        try:
            exact = ranging_success_exact(b)
        except DomainError:
            exact = math.nan
        analytic = ranging_success_analytic(b, tail=cfg.tail)
        if cfg.trials > 0:
            if cfg.mode == "binomial":
                wins, _ = monte_carlo_ranging(b, cfg.trials, seed)
            else:
                l_true = cfg.l_true if cfg.l_true is not None else 0.5 * (cfg.l_l + cfg.l_u)
                wins, _ = simulate_ranging(model, sc, n, tau, l_true, cfg.trials, seed)
            rate = wins / cfg.trials
    return [n, N_B, sc.N_R, q0, q1, exact, analytic, rate, cfg.trials]


def ranging_table(cfg: RangingConfig):
    rows = [ranging_row(cfg, n, point_seed(cfg.master_seed, i)) for i, n in enumerate(cfg.n_grid)]
    return RANGING_COLUMNS, rows


# --------------------------------------------------------------------------
# Fock-space check of the quartic expansion


@dataclass(frozen=True)
class QreOracleConfig:
    """Grid for comparing the quartic QRE formula with the truncated-Fock value."""

    M: tuple = (1, 2)
    x: tuple = (0.0, 0.5, 1.0)
    eta2: tuple = (0.3, 0.7)
    nbar_B2: tuple = (0.5, 2.0)
    tau: tuple = (0.05, 0.2)
    nbar_T: tuple = (1e-3, 2e-3, 4e-3)
    trunc_tol: float = 1e-8

    def __post_init__(self):
        for f in fields(self):
            if f.name == "trunc_tol":
                continue
            vals = tuple(np.atleast_1d(getattr(self, f.name)).tolist())
            if not vals:
                raise ConfigError(f"{f.name} grid is empty")
            object.__setattr__(self, f.name, vals)
        if len(self.nbar_T) < 2:
            raise ConfigError("nbar_T needs at least two values for the slope")


QRE_COLUMNS = ["M", "x", "eta2", "nbar_B2", "tau", "nbar_T", "dim", "qre_numeric", "qre_quartic", "rel_err", "loglog_slope"]


def qre_oracle_table(cfg: QreOracleConfig):
    """Per grid point: numeric QRE, quartic formula and their relative gap.

    The log-log slope of the numeric QRE against ``nbar_T`` is fitted over the
    whole ``nbar_T`` list and repeated on each of its rows.
    """
    rows = []
    for M, x, eta2, nb, tau in itertools.product(cfg.M, cfg.x, cfg.eta2, cfg.nbar_B2, cfg.tau):
        ch2 = ChannelParams(eta2, nb)
        block = []
        for nT in cfg.nbar_T:
            probe = ProbeState.from_total(nT, x, int(M))
            rho = build_willie_mixture(probe, ch2, tau, trunc_tol=cfg.trunc_tol)
            sigma = innocent_state(ch2, int(M), rho.dim, cfg.trunc_tol)
            num = qre_numeric(rho, sigma)
            quart = qre_quartic_per_symbol(probe, ch2, tau)
            block.append([int(M), x, eta2, nb, tau, nT, rho.dim, num, quart, abs(quart - num) / num])
        slope = float(np.polyfit(np.log(cfg.nbar_T), np.log([r[7] for r in block]), 1)[0])
        rows += [r + [slope] for r in block]
    return QRE_COLUMNS, rows


# --------------------------------------------------------------------------
# measured data


@dataclass(frozen=True)
class ExperimentReport:
    """One analysed power point of a homodyne BPSK covert link."""

    power_dbm: float
    nbar_alpha: float
    nbar_B2: float
    V0: float
    V1: float
    sigma0: float
    sigma1: float
    n_d: int
    ber: float
    ber_lo: float
    ber_hi: float
    capacity: float
    capacity_lo: float
    capacity_hi: float
    tau_sqrt_n: float
    tau: float
    delta_QRE: float
    L: float
    L_lo: float
    L_hi: float
    flag: str = ""

    def row(self) -> list:
        return list(asdict(self).values())

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def analyze_experiment(
    osa_signal: OsaTrace,
    osa_noise: OsaTrace,
    scope: ScopeTrace,
    budget: CovertnessBudget,
    vartheta: float = 0.0,
    eta2: float = 0.5,
    z_alpha: float = 1.96,
) -> ExperimentReport:
    """From spectra and a labelled homodyne record to the covert-capacity constant.

    Parameters
    ----------
    osa_signal, osa_noise : OsaTrace
        Spectrum of Bob's coherent probe (noise source off) and of the
        injected thermal noise (probe off).
    scope : ScopeTrace
        Homodyne voltages with bit labels.
    budget : CovertnessBudget
    vartheta : float
        Code overhead fraction.
    eta2 : float
        Return-channel transmittance; the splitter that feeds Willie.
    z_alpha : float
        Normal critical value of the interval columns.

    Returns
    -------
    ExperimentReport
        ``L = tau sqrt(n) * C * (1 - vartheta)``, with interval columns from
        the Wilson interval of the error rate.  A probe with zero power makes
        ``tau`` unbounded: ``tau`` is clamped to one, ``L`` is NaN and
        ``flag`` says so.
    """
    nbar_alpha = photons_per_mode_from_osa(osa_signal)
    nbar_B2 = photons_per_mode_from_osa(osa_noise)
    stats = estimate_levels(scope, z_alpha)
    ber = ber_from_stats(stats)
    ber_lo, ber_hi = wilson_interval(ber, stats.n_d, stats.z_alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CovertLinkWarning)
        cap = bpsk_capacity(ber)
    cap_lo, cap_hi = bpsk_capacity_interval(ber_lo, ber_hi)
    probe = ProbeState(nbar_alpha, 0.0, 1)
    ch2 = ChannelParams(eta2, nbar_B2)
    ts, tau, clamped = _tau(probe, ch2, budget)
    flag = ""
    if nbar_alpha == 0.0:
        flag = "no-signal:tau-clamped"
        L = L_lo = L_hi = math.nan
    else:
        scale = ts * (1.0 - vartheta)
        L, L_lo, L_hi = scale * cap, scale * cap_lo, scale * cap_hi
        if clamped:
            flag = "tau-clamped"
    return ExperimentReport(
        osa_signal.peak_power_dbm, nbar_alpha, nbar_B2, stats.V0, stats.V1, stats.sigma0, stats.sigma1,
        stats.n_d, ber, ber_lo, ber_hi, cap, cap_lo, cap_hi, ts, tau, budget.delta_QRE, L, L_lo, L_hi, flag,
    )


def experiment_table(reports):
    return ExperimentReport.columns(), [r.row() for r in reports]


@dataclass(frozen=True)
class ExperimentConfig:
    """Files (or a synthetic power family) for :func:`analyze_experiment`.

    ``osa_signal``, ``scope`` and ``labels`` are parallel lists, one entry per
    input power point.  When ``synthetic_powers_dbm`` is non-empty the files
    are ignored and :func:`covertlink.synthetic.power_sweep_fixtures` is used.
    """

    osa_signal: tuple = ()
    osa_noise: str = ""
    scope: tuple = ()
    labels: tuple = ()
    resolution_r: float = 0.02
    eta2: float = 0.5
    delta_QRE: float = 0.05
    n: int = 10**6
    vartheta: float = 0.0
    z_alpha: float = 1.96
    synthetic_powers_dbm: tuple = ()
    master_seed: int = 0

    def __post_init__(self):
        for name in ("osa_signal", "scope", "labels", "synthetic_powers_dbm"):
            object.__setattr__(self, name, tuple(np.atleast_1d(getattr(self, name)).tolist()))
        if not self.synthetic_powers_dbm:
            if not self.osa_signal:
                raise ConfigError("no input files and no synthetic power grid")
            if not len(self.osa_signal) == len(self.scope) == len(self.labels):
                raise ConfigError("osa_signal, scope and labels must list one file per power point")
            if not self.osa_noise:
                raise ConfigError("osa_noise file is required")


def run_experiment(cfg: ExperimentConfig):
    """Analyse every power point of an experiment config."""
    from covertlink.dataio import read_osa_csv, read_scope_csv
    from covertlink.synthetic import power_sweep_fixtures

    budget = CovertnessBudget(cfg.delta_QRE, cfg.n)
    if cfg.synthetic_powers_dbm:
        triples = power_sweep_fixtures(cfg.synthetic_powers_dbm, seed=cfg.master_seed)
    else:
        noise = read_osa_csv(cfg.osa_noise, cfg.resolution_r)
        triples = [
            (read_osa_csv(o, cfg.resolution_r), noise, read_scope_csv(s, lab))
            for o, s, lab in zip(cfg.osa_signal, cfg.scope, cfg.labels)
        ]
    reports = [
        analyze_experiment(sig, noise, scope, budget, cfg.vartheta, cfg.eta2, cfg.z_alpha)
        for sig, noise, scope in triples
    ]
    return experiment_table(reports)
