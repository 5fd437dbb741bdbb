"""Event-driven simulation of the ring models, the slow-alpha sweep, and bitmaps."""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _kernels as K
from .models import (
    FlipEvent,
    ModelSpec,
    RingConfig,
    has_menu,
    menu_table,
    transitions_at,
)
from .observables import Pattern

logger = logging.getLogger(__name__)

BUFFER_SIZE = 1 << 18


class Extinct(RuntimeError):
    """The particle system (or the spin system) reached an absorbing state."""


class Initial(enum.Enum):
    SINGLE_PARTICLE = "single"
    PARTICLE_COUNT = "count"
    PRODUCT_HALF = "product-half"


@dataclass(frozen=True)
class SweepPlan:
    spec: ModelSpec
    N: int
    T: float
    n: int
    alpha_b: float
    alpha_e: float
    seed: int = 0
    initial: Initial = Initial.SINGLE_PARTICLE
    initial_count: int = 1
    burn_in: float | None = None
    max_k: int = 21
    patterns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.n < 1:
            raise ValueError("need at least one bin")
        if self.N < 4:
            raise ValueError("ring needs N >= 4")
        for a in (self.alpha_b, self.alpha_e):
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"sweep endpoint {a} outside [0, 1]")
        if self.max_k % 2 != 1:
            raise ValueError("max_k must be odd")
        if self.initial is Initial.PARTICLE_COUNT:
            if not 1 <= self.initial_count <= self.N:
                raise ValueError("initial particle count out of range")
            if self.spec.flips_pairs and self.initial_count % 2 == 0:
                raise ValueError("interface runs need an odd initial particle count")
        if not 0 <= self.burn_time < self.T:
            raise ValueError("burn-in must lie in [0, T)")
        object.__setattr__(self, "patterns", tuple(Pattern(p).text for p in self.patterns))

    @property
    def burn_time(self) -> float:
        return 0.01 * self.T if self.burn_in is None else float(self.burn_in)

    def alpha_at(self, t: float) -> float:
        return self.alpha_b + (self.alpha_e - self.alpha_b) * t / self.T

    def bin_edges(self) -> np.ndarray:
        edges = self.burn_time + (self.T - self.burn_time) / self.n * np.arange(self.n + 1)
        edges[-1] = self.T
        return edges


@dataclass
class BinStats:
    """Per-bin time integrals, stored column-wise (one entry per bin).

    ``time_at_k[b, k]`` is the time spent with exactly ``k`` particles,
    ``pattern_odd_time[b, p]`` the time integral of the fraction of translates
    of pattern ``p`` with odd overlap, and ``normalizer[b]`` the time integral
    of the particle density.
    """

    N: int
    patterns: tuple[str, ...]
    alpha_integral: np.ndarray
    elapsed: np.ndarray
    weighted_ones: np.ndarray
    time_at_k: np.ndarray
    pattern_odd_time: np.ndarray
    normalizer: np.ndarray
    events: np.ndarray
    extinct: bool = False

    @classmethod
    def zeros(cls, N: int, n: int, max_k: int, patterns: Sequence[str]) -> "BinStats":
        return cls(
            N=N,
            patterns=tuple(patterns),
            alpha_integral=np.zeros(n),
            elapsed=np.zeros(n),
            weighted_ones=np.zeros(n),
            time_at_k=np.zeros((n, max_k + 1)),
            pattern_odd_time=np.zeros((n, len(patterns))),
            normalizer=np.zeros(n),
            events=np.zeros(n, dtype=np.int64),
        )

    def __len__(self) -> int:
        return self.elapsed.size

    @property
    def max_k(self) -> int:
        return self.time_at_k.shape[1] - 1

    @property
    def alpha_mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.alpha_integral / self.elapsed

    @property
    def empty(self) -> np.ndarray:
        return self.elapsed <= 0.0

    def pattern_index(self, pattern: str | Pattern) -> int:
        text = pattern.text if isinstance(pattern, Pattern) else Pattern(pattern).text
        return self.patterns.index(text)


_SUMMED = ("alpha_integral", "elapsed", "weighted_ones", "time_at_k",
           "pattern_odd_time", "normalizer", "events")


def merge_bins(replicas: Sequence[BinStats]) -> BinStats:
    """Field-wise sum of replica accumulators.

    Values are sorted along the replica axis before summing, so the result does
    not depend on the order in which replicas are supplied.
    """
    if not replicas:
        raise ValueError("nothing to merge")
    first = replicas[0]
    for r in replicas[1:]:
        if r.N != first.N or r.patterns != first.patterns or len(r) != len(first):
            raise ValueError("replicas come from incompatible plans")
    out = {}
    for name in _SUMMED:
        stack = np.stack([getattr(r, name) for r in replicas])
        out[name] = np.sort(stack, axis=0).sum(axis=0)
    return BinStats(N=first.N, patterns=first.patterns,
                    extinct=any(r.extinct for r in replicas), **out)


def replica_seed(seed: int, replica: int) -> np.random.SeedSequence:
    """Seed of replica ``r``: a fixed function of ``(seed, r)``."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(replica),))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seed(seed, replica)))


def initial_config(plan: SweepPlan, rng: np.random.Generator) -> np.ndarray:
    y = np.zeros(plan.N, dtype=np.uint8)
    if plan.initial is Initial.SINGLE_PARTICLE:
        y[0] = 1
    elif plan.initial is Initial.PARTICLE_COUNT:
        y[rng.choice(plan.N, size=plan.initial_count, replace=False)] = 1
    else:
        y[:] = rng.integers(0, 2, size=plan.N, dtype=np.uint8)
    return y


def _pattern_tables(patterns: Sequence[str], y: np.ndarray):
    N = y.size
    offs, start = [], [0]
    for text in patterns:
        offs.extend(Pattern(text).offsets)
        start.append(len(offs))
    pat_offs = np.array(offs, dtype=np.int64)
    pat_start = np.array(start, dtype=np.int64)
    par = np.zeros((len(patterns), N), dtype=np.uint8)
    for p, text in enumerate(patterns):
        for m in Pattern(text).offsets:
            par[p] ^= np.roll(y, -m)  # translate i sees y(i + m)
    oddcount = par.sum(axis=1).astype(np.int64)
    return pat_offs, pat_start, par, oddcount


class ParticleIndex:
    """Dense array of particle positions plus a site -> slot map."""

    def __init__(self, y: np.ndarray):
        N = y.size
        self.y = y
        self.pos = np.zeros(N, dtype=np.int64)
        self.slot = np.full(N, -1, dtype=np.int64)
        self.cnt = np.zeros(1, dtype=np.int64)
        for s in np.nonzero(y)[0]:
            self.pos[self.cnt[0]] = s
            self.slot[s] = self.cnt[0]
            self.cnt[0] += 1

    def __len__(self) -> int:
        return int(self.cnt[0])

    def __contains__(self, s: int) -> bool:
        return self.slot[s] >= 0

    def toggle(self, s: int) -> None:
        K.toggle_site(self.y, self.pos, self.slot, self.cnt, s)

    def sites(self) -> np.ndarray:
        return np.sort(self.pos[: self.cnt[0]])


class SimState:
    """A single trajectory advanced one event at a time.

    Uses the particle menu when the model has one, otherwise scans every
    anchor with :func:`transitions_at` (small rings only).
    """

    def __init__(self, y: RingConfig | np.ndarray, t: float = 0.0):
        bits = y.bits if isinstance(y, RingConfig) else np.asarray(y, dtype=np.uint8)
        self.y = bits.copy()
        self.index = ParticleIndex(self.y)
        self.t = t

    @property
    def config(self) -> RingConfig:
        return RingConfig(self.y.copy())

    @property
    def ones(self) -> int:
        return len(self.index)

    def total_rate(self, spec: ModelSpec, alpha: float) -> float:
        if has_menu(spec):
            return float(self.ones)
        cfg = RingConfig(self.y.copy())
        spec = spec.with_alpha(alpha)
        return sum(e.rate for i in range(self.y.size) for e in transitions_at(spec, cfg, i))

    def step(self, spec: ModelSpec, alpha: float, rng: np.random.Generator):
        """Advance by one event; returns ``(dt, FlipEvent)``."""
        N = self.y.size
        if has_menu(spec):
            k = self.ones
            if k == 0:
                raise Extinct("no particles left")
            dt = rng.standard_exponential() / k
            j = int(self.index.pos[rng.integers(k)])
            offs, p0, p1 = menu_table(spec)
            probs = np.clip(p0 + p1 * alpha, 0.0, None)
            m = rng.choice(len(probs), p=probs / probs.sum())
            sites = frozenset(int((j + o) % N) for o in offs[m])
            event = FlipEvent(sites, 1.0 * probs[m])
        else:
            cfg = RingConfig(self.y.copy())
            spec_a = spec.with_alpha(alpha)
            events = [e for i in range(N) for e in transitions_at(spec_a, cfg, i)]
            rates = np.array([e.rate for e in events])
            total = rates.sum() if events else 0.0
            if total <= 0.0:
                raise Extinct("absorbing configuration")
            dt = rng.standard_exponential() / total
            event = events[rng.choice(len(events), p=rates / total)]
        for s in sorted(event.sites):
            self.index.toggle(s)
        self.t += dt
        return dt, event


def _run_menu(plan: SweepPlan, rng, y, stats: BinStats, debug: bool, t_end: float | None = None,
              tstate=None):
    offs, p0, p1 = menu_table(plan.spec)
    idx = ParticleIndex(y)
    pat_offs, pat_start, par, oddcount = _pattern_tables(plan.patterns, y)
    tnow = np.zeros(1) if tstate is None else tstate
    ibuf = np.zeros(1, dtype=np.int64)
    target = plan.T if t_end is None else t_end
    while True:
        exps = rng.standard_exponential(BUFFER_SIZE)
        unifs = rng.random(BUFFER_SIZE)
        ibuf[0] = 0
        status = K.sweep_kernel(
            idx.y, idx.pos, idx.slot, idx.cnt, tnow, target,
            offs, p0, p1, plan.N, float(plan.T), plan.burn_time, plan.n,
            plan.alpha_b, plan.alpha_e,
            pat_offs, pat_start, par, oddcount,
            exps, unifs, ibuf,
            stats.alpha_integral, stats.elapsed, stats.weighted_ones, stats.time_at_k,
            stats.pattern_odd_time, stats.normalizer, stats.events,
            debug,
        )
        if status == K.PARITY_VIOLATION:
            raise AssertionError(f"parity changed at t={tnow[0]}")
        if debug:
            alpha = plan.alpha_at(tnow[0])
            cfg = RingConfig(idx.y.copy())
            spec_a = plan.spec.with_alpha(alpha)
            scanned = sum(e.rate for i in range(plan.N) for e in transitions_at(spec_a, cfg, i))
            if abs(scanned - len(idx)) > 1e-9 * max(1.0, scanned):
                raise AssertionError(f"menu rate {len(idx)} != scanned rate {scanned}")
        if status == K.EXTINCT:
            raise Extinct(f"extinct at t={tnow[0]}")
        if status == K.REACHED_END:
            return idx


def _run_generic(plan: SweepPlan, rng, y, stats: BinStats):
    state = SimState(y)
    pat_offs, pat_start, par, oddcount = _pattern_tables(plan.patterns, state.y)
    while state.t < plan.T:
        alpha = plan.alpha_at(state.t)
        k = state.ones
        t0 = state.t
        try:
            dt, event = state.step(plan.spec, alpha, rng)
        except Extinct:
            stats.extinct = True
            return state
        stop = min(state.t, plan.T)
        K.accumulate(t0, stop, k, plan.N, float(plan.T), plan.burn_time, plan.n,
                     plan.alpha_b, plan.alpha_e, oddcount, stats.alpha_integral,
                     stats.elapsed, stats.weighted_ones, stats.time_at_k,
                     stats.pattern_odd_time, stats.normalizer)
        if state.t >= plan.T:
            break
        for s in event.sites:
            K.update_patterns(s, plan.N, pat_offs, pat_start, par, oddcount)
        b = K.bin_of(state.t, float(plan.T), plan.burn_time, plan.n)
        if b >= 0:
            stats.events[b] += 1
    return state


def run_sweep(plan: SweepPlan, replica: int = 0, debug: bool = False) -> BinStats:
    """Run one trajectory of the sweep and return its per-bin accumulators.

    Alpha moves linearly from ``alpha_b`` to ``alpha_e`` over ``[0, T]`` and is
    read at the start of each holding interval.  Holding intervals straddling
    a bin edge are split exactly.  If an even-parity run dies out, the
    remaining bins stay empty and ``extinct`` is set.
    """
    rng = replica_rng(plan.seed, replica)
    y = initial_config(plan, rng)
    stats = BinStats.zeros(plan.N, plan.n, plan.max_k, plan.patterns)
    if has_menu(plan.spec):
        try:
            _run_menu(plan, rng, y, stats, debug)
        except Extinct:
            if y.sum() % 2 == 1 and plan.spec.flips_pairs:
                raise
            stats.extinct = True
    else:
        _run_generic(plan, rng, y, stats)
    return stats


def run_replicas(plan: SweepPlan, replicas: int, workers: int | None = None,
                 debug: bool = False) -> list[BinStats]:
    """Independent trajectories with derived seeds, in replica order."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    if workers is None or workers <= 1 or replicas == 1:
        return [run_sweep(plan, r, debug) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: run_sweep(plan, r, debug), range(replicas)))


def fixed_alpha_plan(spec: ModelSpec, N: int, T: float, alpha: float, **kw) -> SweepPlan:
    return SweepPlan(spec=spec, N=N, T=T, n=kw.pop("n", 1), alpha_b=alpha, alpha_e=alpha, **kw)


def simulate_until(spec: ModelSpec, y0: np.ndarray, alpha: float, duration: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Final configuration after running at fixed ``alpha`` for ``duration``."""
    plan = SweepPlan(spec=spec, N=len(y0), T=max(duration, 1e-300), n=1,
                     alpha_b=alpha, alpha_e=alpha, burn_in=0.0)
    y = np.array(y0, dtype=np.uint8)
    stats = BinStats.zeros(plan.N, 1, 1, ())
    if duration <= 0:
        return y
    if has_menu(spec):
        idx = _run_menu(plan, rng, y, stats, False)
        return idx.y
    state = _run_generic(plan, rng, y, stats)
    return state.y


def render_spacetime(plan: SweepPlan, width: int, duration: float, sample_dt: float,
                     replica: int = 0) -> np.ndarray:
    """Rows of ``width`` sites sampled every ``sample_dt`` (row ``r`` at ``r * sample_dt``).

    The window is centred on site 0, where a single-particle run starts.
    Alpha follows the plan's schedule with ``T`` replaced by ``duration``.
    """
    if width > plan.N:
        raise ValueError("window wider than the ring")
    rows = int(np.floor(duration / sample_dt + 1e-9)) + 1 if duration > 0 else 1
    rng = replica_rng(plan.seed, replica)
    y = initial_config(plan, rng)
    sites = (np.arange(width) - width // 2) % plan.N
    out = np.zeros((rows, width), dtype=np.uint8)
    out[0] = y[sites]
    if rows == 1:
        return out
    run_plan = replace(plan, T=float(duration), n=1, burn_in=0.0, patterns=())
    stats = BinStats.zeros(plan.N, 1, 1, ())
    offs, p0, p1 = menu_table(plan.spec)
    idx = ParticleIndex(y)
    pat = _pattern_tables((), y)
    tnow = np.zeros(1)
    ibuf = np.zeros(1, dtype=np.int64)
    exps = unifs = np.zeros(0)
    ibuf[0] = 0
    for r in range(1, rows):
        target = min(r * sample_dt, duration)
        while tnow[0] < target:
            if ibuf[0] >= exps.size:
                exps = rng.standard_exponential(BUFFER_SIZE)
                unifs = rng.random(BUFFER_SIZE)
                ibuf[0] = 0
            status = K.sweep_kernel(
                idx.y, idx.pos, idx.slot, idx.cnt, tnow, target,
                offs, p0, p1, plan.N, float(run_plan.T), 0.0, 1,
                plan.alpha_b, plan.alpha_e, *pat, exps, unifs, ibuf,
                stats.alpha_integral, stats.elapsed, stats.weighted_ones, stats.time_at_k,
                stats.pattern_odd_time, stats.normalizer, stats.events, False,
            )
            if status == K.EXTINCT:
                tnow[0] = target
        out[r] = idx.y[sites]
    return out


def write_pgm(path, bitmap: np.ndarray) -> None:
    """Binary PGM (P5): 0 where a particle sits, 255 elsewhere."""
    img = np.where(np.asarray(bitmap) > 0, 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pixels = np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
    return (pixels == 0).astype(np.uint8)
