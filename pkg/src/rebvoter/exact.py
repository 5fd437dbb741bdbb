"""Brute-force oracle on small rings.

States are encoded as integers with bit ``i`` holding site ``i``.  Generators
are assembled from the same channel table that drives
:func:`rebvoter.models.transitions_at`, vectorised over all states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .models import ModelSpec, Representation, channels
from .observables import Pattern

MAX_SITES = 22
DENSE_LIMIT = 1 << 16


class ReducibleSectorError(ValueError):
    """Raised when a sector has more than one closed communicating class."""

    def __init__(self, classes):
        self.classes = classes
        shown = ", ".join(f"[{len(c)} states, first {c[0]:b}]" for c in classes[:6])
        super().__init__(f"sector has {len(classes)} closed classes: {shown}")


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(a, dtype=np.uint64)).astype(np.int64)


def sector_states(N: int, sector: str) -> np.ndarray:
    states = np.arange(1 << N, dtype=np.int64)
    if sector == "full":
        return states
    par = _popcount(states) % 2
    if sector == "odd":
        return states[par == 1]
    if sector == "even":
        return states[par == 0]
    raise ValueError(f"unknown sector {sector!r}")


@dataclass
class ExactSystem:
    spec: ModelSpec
    N: int
    sector: str
    states: np.ndarray
    Q: sp.csr_matrix

    def index_of(self, state: int) -> int:
        k = int(np.searchsorted(self.states, state))
        if k >= self.states.size or self.states[k] != state:
            raise KeyError(f"state {state:b} not in {self.sector} sector")
        return k


def build_generator(spec: ModelSpec, N: int, sector: str = "odd") -> ExactSystem:
    """Assemble the rate matrix of ``spec`` on the ring ``Z/NZ`` restricted to a sector."""
    if not 4 <= N <= MAX_SITES:
        raise ValueError(f"N must lie in [4, {MAX_SITES}], got {N}")
    if spec.representation is Representation.SPIN and sector != "full":
        raise ValueError("spin models flip single sites; only the full sector is closed")
    states = sector_states(N, sector)
    rows, cols, vals = [], [], []
    for i in range(N):
        def bit(k, _i=i):
            return (states >> ((_i + k) % N)) & 1

        for ch in channels(spec):
            rate = np.broadcast_to(np.asarray(ch.rate(bit, spec.alpha), dtype=float), states.shape)
            mask = 0
            for o in ch.offsets:
                mask ^= 1 << ((i + o) % N)
            live = rate > 0
            if not np.any(live):
                continue
            src = np.nonzero(live)[0]
            dst_states = states[live] ^ mask
            dst = np.searchsorted(states, dst_states)
            ok = (dst < states.size) & (states[np.minimum(dst, states.size - 1)] == dst_states)
            if not np.all(ok):
                raise AssertionError("transition leaves the sector")
            rows.append(src)
            cols.append(dst)
            vals.append(rate[live])
    size = states.size
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    off = sp.coo_matrix((v, (r, c)), shape=(size, size)).tocsr()
    off.setdiag(0)  # toggling an empty set never happens, but keep the diagonal clean
    off.eliminate_zeros()
    out = np.asarray(off.sum(axis=1)).ravel()
    Q = (off - sp.diags(out)).tocsr()
    return ExactSystem(spec, N, sector, states, Q)


def closed_classes(system: ExactSystem) -> list[np.ndarray]:
    """Closed communicating classes, as arrays of positions into ``system.states``."""
    adj = system.Q.copy()
    adj.setdiag(0)
    adj.eliminate_zeros()
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    # a class is closed if no edge leaves it
    coo = adj.tocoo()
    leaving = np.zeros(ncomp, dtype=bool)
    leaving[labels[coo.row][labels[coo.row] != labels[coo.col]]] = True
    return [np.nonzero(labels == c)[0] for c in range(ncomp) if not leaving[c]]


@dataclass
class StationaryLaw:
    system: ExactSystem
    pi: np.ndarray
    residual: float

    @property
    def states(self) -> np.ndarray:
        return self.system.states


def stationary(system: ExactSystem, support: Sequence[int] | None = None) -> StationaryLaw:
    """Solve ``pi Q = 0, sum(pi) = 1``.

    Without ``support`` the sector must have a unique closed class (transient
    states get mass zero); several closed classes raise
    :class:`ReducibleSectorError`.  ``support`` restricts the solve to an
    explicitly chosen set of states, given as integer configurations, which
    must be closed under the dynamics.
    """
    size = system.states.size
    if support is not None:
        idx = np.sort(np.array([system.index_of(int(s)) for s in support], dtype=np.int64))
        sub = system.Q[idx][:, idx]
        leak = np.abs(np.asarray(sub.sum(axis=1)).ravel()).max() if idx.size else 0.0
        if leak > 1e-12:
            raise ValueError("support is not closed under the dynamics")
    else:
        classes = closed_classes(system)
        if len(classes) != 1:
            raise ReducibleSectorError([system.states[c] for c in classes])
        idx = classes[0]
    pi = np.zeros(size)
    if idx.size == 1:
        pi[idx] = 1.0
    else:
        sub = system.Q[idx][:, idx]
        if idx.size <= DENSE_LIMIT:
            A = sub.toarray().T
            A[-1, :] = 1.0
            rhs = np.zeros(idx.size)
            rhs[-1] = 1.0
            sol = scipy.linalg.solve(A, rhs)
        else:
            import scipy.sparse.linalg as spla

            A = sub.T.tolil()
            A[-1, :] = 1.0
            rhs = np.zeros(idx.size)
            rhs[-1] = 1.0
            sol = spla.spsolve(A.tocsc(), rhs)
        pi[idx] = np.clip(sol, 0.0, None)
        pi /= pi.sum()
    residual = float(np.abs(system.Q.T @ pi).max())
    return StationaryLaw(system, pi, residual)


def law_residual(system: ExactSystem, pi: np.ndarray) -> float:
    return float(np.abs(system.Q.T @ np.asarray(pi, dtype=float)).max())


@dataclass
class ExactObservables:
    mean_ones: float
    prob_k: dict[int, float]
    harmonic: dict[str, float]


def exact_observables(law: StationaryLaw, patterns: Iterable[str | Pattern] = ()) -> ExactObservables:
    """Exact ``E|Y|``, ``P[|Y| = k]`` and translate-averaged ``f_{x,N}`` under ``law``."""
    states, pi = law.states, law.pi
    N = law.system.N
    ones = _popcount(states)
    mean = float(pi @ ones)
    prob_k = {int(k): float(pi[ones == k].sum()) for k in np.unique(ones)}
    harmonic = {}
    for p in patterns:
        pat = p if isinstance(p, Pattern) else Pattern(p)
        odd = 0.0
        for i in range(N):
            mask = 0
            for m in pat.offsets:
                mask |= 1 << ((i + m) % N)
            odd += float(pi @ (_popcount(states & mask) % 2))
        harmonic[pat.text] = (odd / N) / (mean / N) if mean > 0 else float("nan")
    return ExactObservables(mean, prob_k, harmonic)


def _dense_full(spec: ModelSpec, N: int) -> np.ndarray:
    return build_generator(spec, N, "full").Q.toarray()


def check_duality(specX: ModelSpec, specY: ModelSpec, N: int) -> float:
    """Max over all ``(x, y)`` of ``|G_X psi(., y)(x) - G_Y psi(x, .)(y)|``.

    ``psi(x, y) = (-1)^{|xy|}``; exhaustive, so ``N <= 12``.
    """
    if N > 12:
        raise ValueError("exhaustive duality check is limited to N <= 12")
    QX = _dense_full(specX, N)
    QY = _dense_full(specY, N)
    s = np.arange(1 << N, dtype=np.int64)
    psi = 1.0 - 2.0 * (_popcount((s[:, None] & s[None, :]).ravel()) % 2).reshape(s.size, s.size)
    return float(np.abs(QX @ psi - psi @ QY.T).max())


def check_pushforward(spin_spec: ModelSpec, interface_spec: ModelSpec, N: int) -> float:
    """Compare the kink image of the spin generator with the interface generator.

    For every spin state ``x`` the outgoing rates, mapped through
    ``interface_of``, must equal the interface model's rates out of
    ``interface_of(x)``.  Returns the max absolute discrepancy.
    """
    spin = build_generator(spin_spec, N, "full")
    kink = build_generator(interface_spec, N, "full")
    s = spin.states
    ys = s ^ (((s >> 1) | ((s & 1) << (N - 1))))  # y(i) = x(i) ^ x(i+1)
    Qs = spin.Q.tocoo()
    worst = 0.0
    Qk = kink.Q.tocsr()
    pushed: dict[tuple[int, int], float] = {}
    for r, c, v in zip(Qs.row, Qs.col, Qs.data):
        if r == c:
            continue
        key = (int(r), int(ys[c]))
        pushed[key] = pushed.get(key, 0.0) + v
    by_source: dict[int, dict[int, float]] = {}
    for (r, yc), v in pushed.items():
        by_source.setdefault(r, {})[yc] = v
    for x in range(s.size):
        yx = int(ys[x])
        row = Qk.getrow(yx)
        expect = {int(c): float(v) for c, v in zip(row.indices, row.data) if c != yx and v != 0}
        got = {c: v for c, v in by_source.get(x, {}).items() if c != yx}
        for key in set(expect) | set(got):
            worst = max(worst, abs(expect.get(key, 0.0) - got.get(key, 0.0)))
    return worst
