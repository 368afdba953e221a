"""Symbol-sparse slot selection and covert-capacity lower bounds.

Alice and Bob split ``n`` modes into ``n / M`` symbol slots and use slot ``u``
iff the ``u``-th uniform of a keyed counter-mode generator (Philox, keyed by a
hash of the shared secret) falls below ``tau``.  Regenerating from the same
``(n, M, tau, seed)`` therefore reproduces the plan exactly, and the plan never
has to be stored coin by coin.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from covertlink.bosonic import ChannelParams
from covertlink.errors import (
    ConfigError,
    DegenerateSignalError,
    DomainError,
    IngestionError,
    SingularNoiseError,
)

__all__ = [
    "SparsePlan",
    "covert_bits_lower_bound",
    "covert_capacity_L",
    "covert_capacity_closed_form",
    "make_sparse_plan",
    "normalize_seed",
    "slot_uniforms",
]

PLAN_FORMAT_VERSION = 1
_MAGIC = b"CLSP"
_CHUNK = 1 << 20


def normalize_seed(seed) -> bytes:
    """Coerce an int, hex string or bytes seed into an opaque 32-byte value."""
    if isinstance(seed, (bytes, bytearray)):
        raw = bytes(seed)
        if len(raw) == 32:
            return raw
        return hashlib.sha256(raw).digest()
    if isinstance(seed, str):
        try:
            raw = bytes.fromhex(seed)
        except ValueError:
            raw = seed.encode()
        return normalize_seed(raw)
    if isinstance(seed, (int, np.integer)):
        seed = int(seed)
        if not 0 <= seed < 1 << 256:
            raise DomainError("integer seeds must lie in [0, 2**256)")
        return seed.to_bytes(32, "big")
    raise DomainError(f"unsupported seed type {type(seed).__name__}")


def _philox(seed: bytes, domain: bytes) -> np.random.Generator:
    key = int.from_bytes(hashlib.sha256(domain + seed).digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def slot_uniforms(seed, n_slots: int, domain: bytes = b"slot-select") -> np.ndarray:
    """The keyed uniform attached to each slot index, in slot order."""
    gen = _philox(normalize_seed(seed), domain)
    return gen.random(n_slots)


@dataclass(frozen=True, eq=False)
class SparsePlan:
    """Shared-secret list of symbol slots Bob transmits on."""

    n: int
    M: int
    tau: float
    seed: bytes
    slots: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.n // self.M

    @property
    def N_B(self) -> int:
        """Realised number of selected slots."""
        return int(self.slots.size)

    @property
    def expected_N_B(self) -> float:
        return self.tau * self.n_slots

    @property
    def floor_N_B(self) -> int:
        """Fixed-count convention floor(tau n / M)."""
        return math.floor(self.tau * self.n_slots)

    def __eq__(self, other):
        if not isinstance(other, SparsePlan):
            return NotImplemented
        return (
            (self.n, self.M, self.tau, self.seed) == (other.n, other.M, other.tau, other.seed)
            and np.array_equal(self.slots, other.slots)
        )

    def contains(self, slot: int) -> bool:
        i = np.searchsorted(self.slots, slot)
        return bool(i < self.slots.size and self.slots[i] == slot)

    def mode_mask(self) -> np.ndarray:
        """Boolean mask over the ``n`` modes marking selected slots."""
        mask = np.zeros(self.n_slots, dtype=bool)
        mask[self.slots] = True
        full = np.zeros(self.n, dtype=bool)
        full[: self.n_slots * self.M] = np.repeat(mask, self.M)
        return full

    def verify(self) -> bool:
        """True if regenerating from the stored parameters gives these slots."""
        return make_sparse_plan(self.n, self.M, self.tau, self.seed) == self

    # serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "covertlink.sparse_plan",
            "version": PLAN_FORMAT_VERSION,
            "n": self.n,
            "M": self.M,
            "tau": self.tau,
            "seed": self.seed.hex(),
            "slots": self.slots.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SparsePlan:
        if data.get("format") != "covertlink.sparse_plan" or data.get("version") != PLAN_FORMAT_VERSION:
            raise IngestionError("not a version-1 sparse plan record")
        slots = np.asarray(data["slots"], dtype=np.int64)
        return cls(int(data["n"]), int(data["M"]), float(data["tau"]), bytes.fromhex(data["seed"]), slots)

    def to_bytes(self) -> bytes:
        head = _MAGIC + struct.pack("<HQQd32sQ", PLAN_FORMAT_VERSION, self.n, self.M, self.tau, self.seed, self.N_B)
        return head + self.slots.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> SparsePlan:
        size = struct.calcsize("<HQQd32sQ")
        if blob[:4] != _MAGIC or len(blob) < 4 + size:
            raise IngestionError("not a sparse plan record")
        version, n, M, tau, seed, count = struct.unpack("<HQQd32sQ", blob[4 : 4 + size])
        if version != PLAN_FORMAT_VERSION:
            raise IngestionError(f"unsupported plan version {version}")
        body = blob[4 + size :]
        if len(body) != 8 * count:
            raise IngestionError("truncated slot list")
        slots = np.frombuffer(body, dtype="<u8").astype(np.int64)
        return cls(n, M, tau, seed, slots)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict()) + "\n")
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> SparsePlan:
        path = Path(path)
        if path.suffix == ".json":
            return cls.from_dict(json.loads(path.read_text()))
        return cls.from_bytes(path.read_bytes())


def make_sparse_plan(n: int, M: int, tau: float, seed) -> SparsePlan:
    """Select each of the ``n / M`` slots independently with probability ``tau``."""
    if M < 1 or n < M or n % M:
        raise ConfigError(f"symbol length M={M} must divide the mode count n={n}")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    seed = normalize_seed(seed)
    n_slots = n // M
    gen = _philox(seed, b"slot-select")
    picked = []
    for start in range(0, n_slots, _CHUNK):
        u = gen.random(min(_CHUNK, n_slots - start))
        picked.append(np.flatnonzero(u < tau) + start)
    slots = np.concatenate(picked).astype(np.int64) if picked else np.empty(0, np.int64)
    return SparsePlan(int(n), int(M), float(tau), seed, slots)


def covert_bits_lower_bound(tau: float, C_per_symbol: float, n: int, M: int, vartheta: float = 0.0) -> float:
    """Total covert bits (1 - vartheta) tau (n / M) C over ``n`` modes."""
    if not 0.0 <= vartheta <= 1.0:
        raise DomainError("vartheta must lie in [0, 1]")
    if C_per_symbol < 0:
        raise DomainError("capacity must be >= 0")
    return (1.0 - vartheta) * tau * (n / M) * C_per_symbol


def covert_capacity_L(tau: float, C_per_symbol: float, n: int, M: int, vartheta: float = 0.0) -> float:
    """The square-root-law constant L = (1 - vartheta) tau C sqrt(n / M).

    For ``M = 1`` this equals ``covert_bits_lower_bound / sqrt(n)``.
    """
    if not 0.0 <= vartheta <= 1.0:
        raise DomainError("vartheta must lie in [0, 1]")
    if C_per_symbol < 0:
        raise DomainError("capacity must be >= 0")
    return (1.0 - vartheta) * tau * C_per_symbol * math.sqrt(n / M)


def covert_capacity_closed_form(
    ch2: ChannelParams,
    nbar_alpha: float,
    delta_QRE: float,
    C_per_symbol: float,
    vartheta: float = 0.0,
) -> float:
    """n-free covert-capacity constant L for a coherent probe (no thermal part).

    ``(1 - vartheta) sqrt(2 n0 (1 + n0)) / ((1 - eta2) nbar_alpha) sqrt(delta_QRE) C``
    with ``n0 = eta2 nbar_B2``.
    """
    if not 0.0 <= vartheta <= 1.0:
        raise DomainError("vartheta must lie in [0, 1]")
    n0 = ch2.eta * ch2.nbar_B
    if n0 <= 0.0:
        raise SingularNoiseError("Willie's thermal floor eta2*nbar_B2 is zero")
    if nbar_alpha <= 0.0:
        raise DegenerateSignalError("nbar_alpha must be positive")
    if ch2.eta >= 1.0:
        return math.inf
    leak = (1.0 - ch2.eta) * nbar_alpha
    return (1.0 - vartheta) * math.sqrt(2.0 * n0 * (1.0 + n0)) / leak * math.sqrt(delta_QRE) * C_per_symbol
