"""Estimators built from per-bin accumulators.

Every estimator accepts either one :class:`~rebvoter.engine.BinStats` or a
sequence of replica accumulators.  With replicas, the point value comes from
the merged accumulators and the error bar is a leave-one-replica-out
jackknife.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, NamedTuple

import numpy as np

DEFAULT_FLOOR_EVENTS = 100.0


class Pattern:
    """A finite 0/1 pattern such as ``1101``, canonicalised by stripping zeros."""

    __slots__ = ("text", "offsets")

    def __init__(self, text: str | "Pattern"):
        if isinstance(text, Pattern):
            text = text.text
        text = str(text).strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"pattern must be a nonempty 0/1 string, got {text!r}")
        stripped = text.strip("0")
        if not stripped:
            raise ValueError("pattern needs at least one 1")
        self.text = stripped
        self.offsets = tuple(i for i, c in enumerate(stripped) if c == "1")

    @classmethod
    def block(cls, n: int) -> "Pattern":
        return cls("1" * n)

    @classmethod
    def gap(cls, n: int) -> "Pattern":
        """``1 0^{n-2} 1``."""
        if n < 2:
            raise ValueError("gap pattern needs n >= 2")
        return cls("1" + "0" * (n - 2) + "1")

    def __len__(self) -> int:
        return len(self.offsets)

    def __eq__(self, other) -> bool:
        return isinstance(other, Pattern) and other.text == self.text

    def __hash__(self) -> int:
        return hash(self.text)

    def __repr__(self) -> str:
        return f"Pattern('{self.text}')"


class CurvePoint(NamedTuple):
    alpha: float
    value: float
    stderr: float


@dataclass
class Curve:
    alpha: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    bins: np.ndarray  # bin indices the points came from

    def __len__(self) -> int:
        return self.alpha.size

    def __iter__(self) -> Iterator[CurvePoint]:
        for a, v, e in zip(self.alpha, self.value, self.stderr):
            yield CurvePoint(float(a), float(v), float(e))

    def __getitem__(self, i) -> CurvePoint:
        return CurvePoint(float(self.alpha[i]), float(self.value[i]), float(self.stderr[i]))


def _as_replicas(bins) -> list:
    return list(bins) if isinstance(bins, (list, tuple)) else [bins]


def _estimate(bins, fn: Callable[[object], np.ndarray], merge=None) -> Curve:
    """Apply ``fn`` (merged stats -> per-bin values, NaN = drop) with jackknife errors."""
    if merge is None:
        from .engine import merge_bins as merge

    reps = _as_replicas(bins)
    merged = merge(reps) if len(reps) > 1 else reps[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        value = np.asarray(fn(merged), dtype=float)
        alpha = merged.alpha_mean
    R = len(reps)
    if R > 1:
        loo = []
        for r in range(R):
            sub = merge(reps[:r] + reps[r + 1:])
            with np.errstate(invalid="ignore", divide="ignore"):
                loo.append(np.asarray(fn(sub), dtype=float))
        loo = np.array(loo)
        stderr = np.sqrt((R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    else:
        stderr = np.zeros_like(value)
    keep = ~merged.empty & np.isfinite(value)
    if R > 1:
        keep &= np.isfinite(stderr)
    where = np.nonzero(keep)[0]
    return Curve(alpha[where], value[where], stderr[where], where)


def rho_hat(bins, N: int | None = None) -> Curve:
    """Per bin ``2 * int|Y| dt / (N * elapsed)``."""
    def fn(s):
        n = s.N if N is None else N
        return 2.0 * s.weighted_ones / (n * s.elapsed)
    return _estimate(bins, fn)


def mu_hat(bins) -> Curve:
    return _estimate(bins, lambda s: s.weighted_ones / s.elapsed)


def chi_k_hat(bins, k: int = 1) -> Curve:
    """Fraction of the bin spent with exactly ``k`` particles."""
    first = _as_replicas(bins)[0]
    if k % 2 != 1 or k < 1:
        raise ValueError("k must be a positive odd integer")
    if k > first.max_k:
        raise ValueError(f"k={k} exceeds tracked max_k={first.max_k}")
    return _estimate(bins, lambda s: s.time_at_k[:, k] / s.elapsed)


def chi_remainder(bins) -> Curve:
    """Fraction of time with more than ``max_k`` (or an even number of) particles."""
    return _estimate(bins, lambda s: 1.0 - s.time_at_k.sum(axis=1) / s.elapsed)


def _floored(s, ks, floor_events):
    ok = np.ones(len(s), dtype=bool)
    for k in ks:
        # expected number of events spent at k particles
        ok &= s.time_at_k[:, k] * k >= floor_events
    return ok


def theta_hat(bins, k: int, floor_events: float = DEFAULT_FLOOR_EVENTS) -> Curve:
    """``chi_{k+2} / chi_k``; bins where either occupation is below the floor are dropped."""
    def fn(s):
        v = s.time_at_k[:, k + 2] / s.time_at_k[:, k]
        return np.where(_floored(s, (k, k + 2), floor_events), v, np.nan)
    _check_k(bins, k + 2)
    return _estimate(bins, fn)


def phi_hat(bins, k: int, floor_events: float = DEFAULT_FLOOR_EVENTS) -> Curve:
    """``theta_{k+2} / theta_k = chi_{k+4} chi_k / chi_{k+2}^2``."""
    def fn(s):
        a, b, c = s.time_at_k[:, k], s.time_at_k[:, k + 2], s.time_at_k[:, k + 4]
        v = (c * a) / (b * b)
        return np.where(_floored(s, (k, k + 2, k + 4), floor_events), v, np.nan)
    _check_k(bins, k + 4)
    return _estimate(bins, fn)


def _check_k(bins, kmax):
    if kmax > _as_replicas(bins)[0].max_k:
        raise ValueError(f"k={kmax} exceeds tracked max_k")


def _ratio(num: Curve, den: Curve, floor: float = 0.0):
    if not np.array_equal(num.bins, den.bins):
        common = np.intersect1d(num.bins, den.bins)
        num = _select(num, common)
        den = _select(den, common)
    ok = (den.value > floor) & (num.value >= 0) & np.isfinite(num.value)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num.value / den.value
        err = np.hypot(num.stderr, r * den.stderr) / np.abs(den.value)
    return Curve(num.alpha[ok], r[ok], err[ok], num.bins[ok]), int((~ok).sum())


def _select(c: Curve, which: np.ndarray) -> Curve:
    m = np.isin(c.bins, which)
    return Curve(c.alpha[m], c.value[m], c.stderr[m], c.bins[m])


@dataclass
class ThetaPhi:
    theta: Curve
    theta_next: Curve
    phi: Curve
    dropped: int


def theta_phi(chi_k: Curve, chi_k2: Curve, chi_k4: Curve, floor: float = 0.0) -> ThetaPhi:
    """Ratios ``theta_k``, ``theta_{k+2}`` and ``phi_k`` from three chi curves.

    Errors propagate to first order assuming independent inputs.  Points whose
    denominator does not exceed ``floor`` are dropped and counted.
    """
    th, d1 = _ratio(chi_k2, chi_k, floor)
    th2, d2 = _ratio(chi_k4, chi_k2, floor)
    ph, d3 = _ratio(th2, th, 0.0)
    return ThetaPhi(th, th2, ph, d1 + d2 + d3)


def harmonic_hat(bins, pattern: str | Pattern) -> Curve:
    """Translate-averaged ``P[|x Y| odd] / P[Y(0) = 1]`` per bin.

    The run must use the dual model (mirror model for one-sided, interface
    model for two-sided) and must have tracked ``pattern``.
    """
    p = _as_replicas(bins)[0].pattern_index(pattern)
    return _estimate(bins, lambda s: s.pattern_odd_time[:, p] / s.normalizer)


BALANCE_PATTERNS = ("1", "11", "101", "111", "1101")


def harmonic_residuals(table: Mapping[str, float], alpha: float) -> tuple[float, float]:
    """Balance residuals of ``G f_1 = 0`` and ``G f_11 = 0`` for the one-sided model."""
    f = {Pattern(k).text: v for k, v in table.items() if set(str(k)) <= {"0", "1"} and "1" in str(k)}
    missing = [p for p in ("11", "101", "111", "1101") if p not in f]
    if missing:
        raise KeyError(f"harmonic table lacks {missing}")
    f_empty = float(table.get("", 0.0))
    f1 = f.get("1", 1.0)
    r1 = alpha * (f_empty - f1) + (f["11"] - f1) + (1 - alpha) * (f["101"] - f1)
    r11 = (alpha * (f["111"] - f["11"]) + (f1 - f["11"])
           + (1 - alpha) * (f["1101"] - f["11"]))
    return r1, r11


def balance_residuals(bins) -> tuple[Curve, Curve]:
    """Per-bin residual curves with jackknife error bars."""
    first = _as_replicas(bins)[0]
    idx = {p: first.pattern_index(p) for p in ("11", "101", "111", "1101")}

    def table(s):
        with np.errstate(invalid="ignore", divide="ignore"):
            return {p: s.pattern_odd_time[:, i] / s.normalizer for p, i in idx.items()}

    def r(which):
        def fn(s):
            res = harmonic_residuals(table(s), s.alpha_mean)
            return res[which]
        return fn

    return _estimate(bins, r(0)), _estimate(bins, r(1))


def g_block(n: int) -> int:
    """``d/d alpha f_{1^n}`` at ``alpha = 1`` via the integer recursion (equals ``2(n-1)``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    # g_empty = g_1 = 0; g_{m+1} = 2 g_m - g_{m-1} + (2 if m == 1 else 0)
    prev, cur = 0, 0
    for m in range(1, n):
        prev, cur = cur, 2 * cur - prev + (2 if m == 1 else 0)
    return cur
