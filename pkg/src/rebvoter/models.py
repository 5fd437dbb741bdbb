"""Transition-rate kernels for the rebellious voter family on a periodic ring.

Every model is described as a list of channels.  A channel is a set of site
offsets relative to an anchor index ``i`` together with a rate expression in
the neighbouring bits.  The same expression is evaluated on a single
configuration (``transitions_at``) and, vectorised over integer-encoded
states, by :mod:`rebvoter.exact`.  Keeping one source of truth for the rates
is what makes the brute-force oracle meaningful.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np


class Family(enum.Enum):
    ONE_SIDED = "one-sided"
    TWO_SIDED = "two-sided"
    DISAGREEMENT = "disagreement"
    SWAPPING = "swapping"
    # voter step looks right, rebellious step looks left
    MIXED_ONE_SIDED = "mixed"


class Representation(enum.Enum):
    SPIN = "spin"
    INTERFACE = "interface"
    MIRROR_DUAL = "mirror"


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    representation: Representation
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.representation is Representation.MIRROR_DUAL and self.family not in (
            Family.ONE_SIDED,
            Family.MIXED_ONE_SIDED,
        ):
            raise ValueError(
                f"{self.family.value} has no separate mirror-dual model; "
                "use its interface representation or the paired family"
            )

    def with_alpha(self, alpha: float) -> "ModelSpec":
        return ModelSpec(self.family, self.representation, float(alpha))

    @property
    def flips_pairs(self) -> bool:
        """True when every transition toggles two sites (parity preserving)."""
        return self.representation is not Representation.SPIN


@dataclass(frozen=True, eq=False)
class RingConfig:
    """Binary configuration on ``Z/NZ`` with a cached particle count."""

    bits: np.ndarray
    ones: int = field(default=-1)

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if bits.size < 4:
            raise ValueError(f"ring needs at least 4 sites, got {bits.size}")
        if np.any(bits > 1):
            raise ValueError("bits must be 0/1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        count = int(bits.sum())
        if self.ones not in (-1, count):
            raise ValueError(f"cached count {self.ones} != actual {count}")
        object.__setattr__(self, "ones", count)

    @classmethod
    def from_string(cls, s: str) -> "RingConfig":
        return cls(np.array([int(c) for c in s], dtype=np.uint8))

    @classmethod
    def from_int(cls, state: int, size: int) -> "RingConfig":
        return cls(((state >> np.arange(size)) & 1).astype(np.uint8))

    @classmethod
    def single(cls, size: int, site: int = 0) -> "RingConfig":
        bits = np.zeros(size, dtype=np.uint8)
        bits[site % size] = 1
        return cls(bits)

    @property
    def size(self) -> int:
        return self.bits.size

    @property
    def parity(self) -> int:
        return self.ones % 2

    def __getitem__(self, i: int) -> int:
        return int(self.bits[i % self.size])

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, RingConfig) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __repr__(self) -> str:
        return f"RingConfig('{self}')"

    def to_int(self) -> int:
        return int(np.dot(self.bits.astype(np.int64), 1 << np.arange(self.size, dtype=np.int64)))

    def rotate(self, k: int) -> "RingConfig":
        """Shift contents so that ``rotate(k)[i + k] == self[i]``."""
        return RingConfig(np.roll(self.bits, k), self.ones)


class FlipEvent(NamedTuple):
    sites: frozenset
    rate: float


# rate expression: (bit getter, alpha) -> rate; the getter maps offset -> bit(s)
RateFn = Callable[[Callable[[int], object], float], object]


class Channel(NamedTuple):
    offsets: tuple
    rate: RateFn


def _one_sided_spin(b, a):
    return a * (b(-1) ^ b(0)) + (1 - a) * (b(-2) ^ b(-1))


def _two_sided_spin(b, a):
    return 0.5 * a * ((b(-1) ^ b(0)) + (b(0) ^ b(1))) + 0.5 * (1 - a) * (
        (b(-2) ^ b(-1)) + (b(1) ^ b(2))
    )


def _voter_part(b, a):
    return a * ((b(-1) ^ b(0)) + (b(0) ^ b(1)))


def _disagreement_spin(b, a):
    return _voter_part(b, a) + (1 - a) * (b(-1) ^ b(1))


def _mixed_spin(b, a):
    return a * (b(0) ^ b(1)) + (1 - a) * (b(-2) ^ b(-1))


_CHANNELS: dict[tuple[Family, Representation], tuple[Channel, ...]] = {
    (Family.ONE_SIDED, Representation.SPIN): (Channel((0,), _one_sided_spin),),
    (Family.TWO_SIDED, Representation.SPIN): (Channel((0,), _two_sided_spin),),
    (Family.DISAGREEMENT, Representation.SPIN): (Channel((0,), _disagreement_spin),),
    (Family.SWAPPING, Representation.SPIN): (
        Channel((0,), _voter_part),
        Channel((0, 1), lambda b, a: (1 - a) * (b(0) ^ b(1))),
    ),
    (Family.MIXED_ONE_SIDED, Representation.SPIN): (Channel((0,), _mixed_spin),),
    (Family.ONE_SIDED, Representation.INTERFACE): (
        Channel((0, 1), lambda b, a: a * b(0) + (1 - a) * b(-1)),
    ),
    (Family.TWO_SIDED, Representation.INTERFACE): (
        Channel(
            (0, 1),
            lambda b, a: 0.5 * a * (b(0) + b(1)) + 0.5 * (1 - a) * (b(-1) + b(2)),
        ),
    ),
    # SARW
    (Family.DISAGREEMENT, Representation.INTERFACE): (
        Channel((0, 1), lambda b, a: a * (b(0) + b(1)) + (1 - a) * (b(0) ^ b(1))),
    ),
    # DBARW
    (Family.SWAPPING, Representation.INTERFACE): (
        Channel((0, 1), lambda b, a: a * (b(0) + b(1))),
        Channel((-1, 1), lambda b, a: (1 - a) * b(0)),
    ),
    (Family.MIXED_ONE_SIDED, Representation.INTERFACE): (
        Channel((-1, 0), lambda b, a: a * b(0) + (1 - a) * b(-2)),
    ),
    (Family.ONE_SIDED, Representation.MIRROR_DUAL): (
        Channel((-1, 0), lambda b, a: a * b(0) + (1 - a) * b(1)),
    ),
    (Family.MIXED_ONE_SIDED, Representation.MIRROR_DUAL): (
        Channel((0, 1), lambda b, a: a * b(0) + (1 - a) * b(2)),
    ),
}

# Cancellative duals under psi(x, y) = (-1)^{|xy|}.
DUAL_PAIRS: dict[Family, ModelSpec] = {
    Family.ONE_SIDED: ModelSpec(Family.ONE_SIDED, Representation.MIRROR_DUAL),
    Family.TWO_SIDED: ModelSpec(Family.TWO_SIDED, Representation.INTERFACE),
    Family.DISAGREEMENT: ModelSpec(Family.SWAPPING, Representation.INTERFACE),
    Family.SWAPPING: ModelSpec(Family.DISAGREEMENT, Representation.INTERFACE),
    Family.MIXED_ONE_SIDED: ModelSpec(Family.MIXED_ONE_SIDED, Representation.MIRROR_DUAL),
}


def dual_of(spec: ModelSpec) -> ModelSpec:
    """The particle model dual to a spin model, at the same alpha."""
    if spec.representation is not Representation.SPIN:
        raise ValueError("dual_of expects a spin-representation spec")
    return DUAL_PAIRS[spec.family].with_alpha(spec.alpha)


def channels(spec: ModelSpec) -> tuple[Channel, ...]:
    return _CHANNELS[(spec.family, spec.representation)]


def _getter(y: RingConfig, i: int):
    bits, n = y.bits, y.size
    return lambda k: int(bits[(i + k) % n])


def spin_flip_rate(spec: ModelSpec, x: RingConfig, i: int) -> float:
    """Rate at which site ``i`` of a spin configuration changes type.

    For the swapping model only the single-site channel is returned; the
    pair swap is reported by :func:`transitions_at`.
    """
    if spec.representation is not Representation.SPIN:
        raise ValueError("spin_flip_rate needs a spin-representation spec")
    b = _getter(x, i)
    return float(sum(ch.rate(b, spec.alpha) for ch in channels(spec) if len(ch.offsets) == 1))


def transitions_at(spec: ModelSpec, y: RingConfig, i: int) -> list[FlipEvent]:
    """All transitions anchored at ``i`` with positive rate, evaluated on ``y``."""
    n = y.size
    b = _getter(y, i)
    out = []
    for ch in channels(spec):
        rate = float(ch.rate(b, spec.alpha))
        if rate > 0.0:
            out.append(FlipEvent(frozenset((i + o) % n for o in ch.offsets), rate))
    return out


def total_rate(spec: ModelSpec, y: RingConfig) -> float:
    return sum(e.rate for i in range(y.size) for e in transitions_at(spec, y, i))


def interface_of(x: RingConfig) -> RingConfig:
    """Kink configuration: ``y(i) = 1`` iff ``x(i) != x(i+1)``."""
    return RingConfig(x.bits ^ np.roll(x.bits, -1))


def apply_flip(y: RingConfig, e: FlipEvent | Sequence[int]) -> RingConfig:
    sites = e.sites if isinstance(e, FlipEvent) else e
    bits = y.bits.copy()
    delta = 0
    for s in sites:
        s %= y.size
        delta += 1 - 2 * int(bits[s])
        bits[s] ^= 1
    return RingConfig(bits, y.ones + delta)


@dataclass(frozen=True)
class ParticleMenu:
    """Per-particle event menu: offsets relative to the particle and probabilities."""

    entries: tuple[tuple[tuple[int, ...], float], ...]
    rate: float = 1.0

    def __post_init__(self):
        total = sum(p for _, p in self.entries)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"menu probabilities sum to {total}")

    def reflected(self) -> "ParticleMenu":
        return ParticleMenu(
            tuple((tuple(sorted(-o for o in offs)), p) for offs, p in self.entries), self.rate
        )


# (offsets, p0, p1) with probability p0 + p1 * alpha
_MENUS: dict[tuple[Family, Representation], tuple[tuple[tuple[int, int], float, float], ...]] = {
    (Family.ONE_SIDED, Representation.INTERFACE): (((0, 1), 0.0, 1.0), ((1, 2), 1.0, -1.0)),
    (Family.ONE_SIDED, Representation.MIRROR_DUAL): (((-1, 0), 0.0, 1.0), ((-2, -1), 1.0, -1.0)),
    (Family.TWO_SIDED, Representation.INTERFACE): (
        ((-1, 0), 0.0, 0.5),
        ((0, 1), 0.0, 0.5),
        ((-2, -1), 0.5, -0.5),
        ((1, 2), 0.5, -0.5),
    ),
    (Family.MIXED_ONE_SIDED, Representation.INTERFACE): (((-1, 0), 0.0, 1.0), ((1, 2), 1.0, -1.0)),
    (Family.MIXED_ONE_SIDED, Representation.MIRROR_DUAL): (((0, 1), 0.0, 1.0), ((-2, -1), 1.0, -1.0)),
}


def has_menu(spec: ModelSpec) -> bool:
    return (spec.family, spec.representation) in _MENUS


def menu_table(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Alpha-linear menu as arrays ``(offsets[M, 2], p0[M], p1[M])`` for the kernels."""
    try:
        rows = _MENUS[(spec.family, spec.representation)]
    except KeyError:
        raise ValueError(
            f"{spec.family.value}/{spec.representation.value} is not a uniform-rate "
            "particle-enabled kernel"
        ) from None
    offs = np.array([r[0] for r in rows], dtype=np.int64)
    p0 = np.array([r[1] for r in rows], dtype=np.float64)
    p1 = np.array([r[2] for r in rows], dtype=np.float64)
    return offs, p0, p1


def particle_menu(spec: ModelSpec, alpha: float | None = None) -> ParticleMenu:
    """Regroup the pair-flip rates by the particle that enables them.

    Every particle carries total rate 1; zero-probability entries are omitted.
    Disagreement and swapping kernels are rejected.
    """
    a = spec.alpha if alpha is None else alpha
    offs, p0, p1 = menu_table(spec)
    entries = []
    for o, c0, c1 in zip(offs, p0, p1):
        p = c0 + c1 * a
        if p > 0.0:
            entries.append((tuple(int(v) for v in o), float(p)))
    return ParticleMenu(tuple(entries), 1.0)


def parse_family(name: str) -> Family:
    aliases = {
        "one-sided": Family.ONE_SIDED,
        "onesided": Family.ONE_SIDED,
        "two-sided": Family.TWO_SIDED,
        "twosided": Family.TWO_SIDED,
        "rv": Family.TWO_SIDED,
        "disagreement": Family.DISAGREEMENT,
        "swapping": Family.SWAPPING,
        "mixed": Family.MIXED_ONE_SIDED,
    }
    try:
        return aliases[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model family {name!r}") from None


def parse_representation(name: str) -> Representation:
    aliases = {
        "spin": Representation.SPIN,
        "interface": Representation.INTERFACE,
        "mirror": Representation.MIRROR_DUAL,
        "mirror-dual": Representation.MIRROR_DUAL,
        "dual": Representation.MIRROR_DUAL,
    }
    try:
        return aliases[name.lower()]
    except KeyError:
        raise ValueError(f"unknown representation {name!r}") from None
