"""The interface process seen from its leftmost particle, and edge speeds.

The frame keeps a window of ``W`` sites whose site 0 always holds the
leftmost particle.  Particles pushed past the right end of the window are
forgotten, which breaks parity; if the window ever empties, a single
particle is restarted at the origin and the restart is counted.

The right edge is handled by running the reflected model (offsets negated)
and flipping the sign of the displacement.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .engine import BUFFER_SIZE, SweepPlan, replica_rng
from .models import ModelSpec, menu_table
from .observables import Curve, _estimate

DEFAULT_WINDOW = 1 << 11
MIN_WINDOW = 64


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


def _oriented_menu(spec: ModelSpec, side: Side):
    offs, p0, p1 = menu_table(spec)
    if side is Side.RIGHT:
        offs = -offs
    return offs, p0, p1


class _Frame:
    """Kernel-side layout: circular buffer plus particle index."""

    def __init__(self, window: np.ndarray):
        W = window.size
        self.z = np.array(window, dtype=np.uint8)
        self.pos = np.zeros(W, dtype=np.int64)
        self.slot = np.full(W, -1, dtype=np.int64)
        self.cnt = np.zeros(1, dtype=np.int64)
        for s in np.nonzero(self.z)[0]:
            self.pos[self.cnt[0]] = s
            self.slot[s] = self.cnt[0]
            self.cnt[0] += 1
        self.state_i = np.zeros(4, dtype=np.int64)  # base, displacement, dropped, restarts
        self.tnow = np.zeros(1)
        self.ibuf = np.zeros(1, dtype=np.int64)

    def logical(self) -> np.ndarray:
        return np.roll(self.z, -int(self.state_i[0]))


@dataclass
class FrameState:
    """Window ``Z_t(i) = Y_t(l_t + i)`` for ``0 <= i < W``, with bookkeeping."""

    window: np.ndarray
    displacement: int = 0
    t: float = 0.0
    dropped: int = 0
    restarts: int = 0

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=np.uint8)
        if self.window.size < MIN_WINDOW:
            raise ValueError(f"window must have at least {MIN_WINDOW} sites")
        if self.window.any() and not self.window[0]:
            raise ValueError("site 0 of the window must hold the leftmost particle")

    @classmethod
    def single(cls, W: int = DEFAULT_WINDOW) -> "FrameState":
        z = np.zeros(W, dtype=np.uint8)
        z[0] = 1
        return cls(z)

    @property
    def W(self) -> int:
        return self.window.size

    @property
    def ones(self) -> int:
        return int(self.window.sum())


def frame_step(state: FrameState, spec: ModelSpec, alpha: float, rng: np.random.Generator,
               side: Side = Side.LEFT) -> tuple[float, int]:
    """Apply one event of the interface dynamics in window coordinates.

    Returns ``(dt, shift)`` where ``shift`` is the change of the anchor.  The
    state is updated in place.  Runs the same compiled code as
    :func:`edge_speed_sweep`, one event at a time.
    """
    if not state.window.any():
        from .engine import Extinct
        raise Extinct("empty window")
    offs, p0, p1 = _oriented_menu(spec, side)
    fr = _Frame(state.window)
    exps = np.array([rng.standard_exponential()])
    unifs = np.array([rng.random()])
    one = np.zeros(1)
    K.frame_kernel(fr.z, fr.pos, fr.slot, fr.cnt, fr.state_i, fr.tnow, np.inf,
                   offs, p0, p1, state.W, 1.0, np.inf, 1, float(alpha), float(alpha),
                   exps, unifs, fr.ibuf, one, one.copy(), np.zeros(1, np.int64),
                   np.zeros(1, np.int64), np.zeros(1, np.int64))
    dt = float(fr.tnow[0])
    shift = int(fr.state_i[1])
    state.window = fr.logical()
    state.displacement += shift
    state.t += dt
    state.dropped += int(fr.state_i[2])
    state.restarts += int(fr.state_i[3])
    return dt, shift


@dataclass
class EdgeStats:
    """Per-bin accumulators of one edge run (displacement already oriented)."""

    side: Side
    alpha_integral: np.ndarray
    elapsed: np.ndarray
    displacement: np.ndarray
    events: np.ndarray
    restarts: np.ndarray
    dropped: int = 0

    def __len__(self) -> int:
        return self.elapsed.size

    @property
    def alpha_mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.alpha_integral / self.elapsed

    @property
    def empty(self) -> np.ndarray:
        return self.elapsed <= 0.0


def merge_edges(runs) -> EdgeStats:
    runs = list(runs)
    first = runs[0]
    if any(r.side is not first.side or len(r) != len(first) for r in runs):
        raise ValueError("edge runs come from incompatible plans")

    def total(name):
        return np.sort(np.stack([getattr(r, name) for r in runs]), axis=0).sum(axis=0)

    return EdgeStats(first.side, total("alpha_integral"), total("elapsed"),
                     total("displacement"), total("events"), total("restarts"),
                     sum(r.dropped for r in runs))


def run_edge(plan: SweepPlan, side: Side | str = Side.LEFT, W: int = DEFAULT_WINDOW,
             replica: int = 0) -> EdgeStats:
    """One frame trajectory following the plan's alpha schedule and bins."""
    side = Side(side)
    if W < MIN_WINDOW:
        raise ValueError(f"window must have at least {MIN_WINDOW} sites")
    offs, p0, p1 = _oriented_menu(plan.spec, side)
    rng = replica_rng(plan.seed, replica)
    z = np.zeros(W, dtype=np.uint8)
    z[0] = 1
    fr = _Frame(z)
    n = plan.n
    acc_el, acc_al = np.zeros(n), np.zeros(n)
    acc_disp = np.zeros(n, dtype=np.int64)
    acc_ev = np.zeros(n, dtype=np.int64)
    acc_rs = np.zeros(n, dtype=np.int64)
    T = float(plan.T)
    while True:
        exps = rng.standard_exponential(BUFFER_SIZE)
        unifs = rng.random(BUFFER_SIZE)
        fr.ibuf[0] = 0
        status = K.frame_kernel(fr.z, fr.pos, fr.slot, fr.cnt, fr.state_i, fr.tnow, T,
                                offs, p0, p1, W, T, plan.burn_time, n,
                                float(plan.alpha_b), float(plan.alpha_e),
                                exps, unifs, fr.ibuf, acc_el, acc_al, acc_disp, acc_ev, acc_rs)
        if status == K.REACHED_END:
            break
    sign = -1 if side is Side.RIGHT else 1
    return EdgeStats(side, acc_al, acc_el, sign * acc_disp, acc_ev, acc_rs, int(fr.state_i[2]))


def edge_replicas(plan: SweepPlan, side: Side | str = Side.LEFT, replicas: int = 1,
                  W: int = DEFAULT_WINDOW, workers: int | None = None) -> list[EdgeStats]:
    if workers is None or workers <= 1 or replicas == 1:
        return [run_edge(plan, side, W, r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: run_edge(plan, side, W, r), range(replicas)))


def edge_speed(runs) -> Curve:
    """Displacement per unit time in each bin, with jackknife errors over replicas."""
    return _estimate(runs, lambda s: s.displacement / s.elapsed, merge=merge_edges)


def edge_speed_sweep(plan: SweepPlan, side: Side | str = Side.LEFT, W: int = DEFAULT_WINDOW,
                     replicas: int = 1, workers: int | None = None) -> tuple[Curve, EdgeStats]:
    """Speed curve ``v(alpha)`` of the chosen edge plus the merged accumulators.

    The merged stats carry per-bin restart counts so a too-small window shows up.
    """
    runs = edge_replicas(plan, side, replicas, W, workers)
    return edge_speed(runs), merge_edges(runs)
