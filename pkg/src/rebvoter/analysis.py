"""Post-processing of estimated curves: fits, critical-point scans, derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

END_FRACTION = 0.25
MIN_SCAN_POINTS = 5


@dataclass(frozen=True)
class FitResult:
    """``rho(alpha) = (1 - c1 alpha) / (1 - c2 alpha)`` with ``alpha_c = 1 / c1``.

    ``cov_diag`` is the diagonal of ``s^2 (A^T A)^{-1}`` for the linearised
    system, a dispersion proxy rather than a confidence statement.
    """

    c1: float
    c2: float
    alpha_c: float
    residual_rms: float
    cov_diag: tuple[float, float]
    degenerate: bool = False

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return (1.0 - self.c1 * a) / (1.0 - self.c2 * a)


def fit_linear_fractional(alpha: Sequence[float], rho: Sequence[float]) -> FitResult:
    """Least squares on the linear identity ``rho - 1 = -c1 alpha + c2 alpha rho``.

    The identity holds exactly when the data follow the model, so noiseless
    input is recovered to rounding error.  Constant ``rho = 1`` makes the two
    columns collinear; that degenerate family (``c1 = c2``) is returned with
    ``degenerate=True`` and ``alpha_c = inf``.
    """
    a = np.asarray(alpha, dtype=float)
    r = np.asarray(rho, dtype=float)
    if a.shape != r.shape or a.ndim != 1:
        raise ValueError("alpha and rho must be 1-d arrays of equal length")
    if a.size < 3:
        raise ValueError("need at least 3 points")
    if np.unique(a).size != a.size:
        raise ValueError("alpha values must be distinct")
    if np.any(r <= 0):
        raise ValueError("rho must be positive")
    A = np.column_stack([-a, a * r])
    b = r - 1.0
    G = A.T @ A
    if np.linalg.cond(G) > 1e14:
        if np.allclose(b, 0.0, atol=1e-14):
            return FitResult(0.0, 0.0, float("inf"), 0.0, (float("inf"), float("inf")), True)
        raise np.linalg.LinAlgError("singular normal matrix")
    # QR-based solve of the same least-squares problem keeps the full precision
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    c1, c2 = (float(c) for c in coef)
    resid = r - (1.0 - c1 * a) / (1.0 - c2 * a)
    lin = b - A @ coef
    dof = max(a.size - 2, 1)
    s2 = float(lin @ lin) / dof
    cov = s2 * np.diag(np.linalg.inv(G))
    alpha_c = 1.0 / c1 if c1 != 0 else float("inf")
    return FitResult(c1, c2, alpha_c, float(np.sqrt(np.mean(resid ** 2))),
                     (float(cov[0]), float(cov[1])))


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    xm = x - x.mean()
    return float(xm @ (y - y.mean()) / (xm @ xm))


def _end_window(n: int, frac: float) -> int:
    return max(2, int(np.ceil(frac * n)))


@dataclass(frozen=True)
class ScanResult:
    alpha0: np.ndarray
    score: np.ndarray  # nan where the candidate was skipped
    npoints: np.ndarray
    best: float
    bracket: tuple[float, float]


def critical_scan(alpha: Sequence[float], value: Sequence[float], alpha0: Sequence[float],
                  side: str = "rho", frac: float = END_FRACTION, scale: str = "log") -> ScanResult:
    """Score each candidate ``alpha0`` by how flat ``value / |alpha - alpha0|`` ends up.

    ``side="rho"`` uses points with ``alpha < alpha0`` (the curve vanishes
    from the left), ``side="chi"`` points with ``alpha > alpha0``.  The score
    is the absolute OLS slope over the ``frac`` of usable points closest to
    ``alpha0``.  With ``scale="log"`` the line is fitted to
    ``log ratio`` against ``log|alpha - alpha0|``, so a ratio with a finite
    nonzero limit scores near zero while a wrong ``alpha0`` leaves a residual
    power of about one; ``scale="linear"`` fits ``ratio`` against ``alpha``.
    Candidates with fewer than five usable points are skipped.
    """
    a = np.asarray(alpha, dtype=float)
    v = np.asarray(value, dtype=float)
    grid = np.asarray(alpha0, dtype=float)
    if side not in ("rho", "chi"):
        raise ValueError("side must be 'rho' or 'chi'")
    if scale not in ("log", "linear"):
        raise ValueError("scale must be 'log' or 'linear'")
    order = np.argsort(a)
    a, v = a[order], v[order]
    score = np.full(grid.size, np.nan)
    npts = np.zeros(grid.size, dtype=int)
    for g, a0 in enumerate(grid):
        if side == "rho":
            m = (a < a0) & (v > 0)
            dist = a0 - a[m]
        else:
            m = (a > a0) & (v > 0)
            dist = a[m] - a0
        npts[g] = int(m.sum())
        if npts[g] < MIN_SCAN_POINTS:
            continue
        ratio = v[m] / dist
        keep = np.argsort(dist)[:_end_window(npts[g], frac)]
        if scale == "log":
            score[g] = abs(_ols_slope(np.log(dist[keep]), np.log(ratio[keep])))
        else:
            score[g] = abs(_ols_slope(a[m][keep], ratio[keep]))
    if np.all(np.isnan(score)):
        raise ValueError("no candidate had enough usable points")
    i = int(np.nanargmin(score))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    return ScanResult(grid, score, npts, float(grid[i]), (float(lo), float(hi)))


def joint_critical_scan(alpha: Sequence[float], rho: Sequence[float], chi: Sequence[float],
                        alpha0: Sequence[float], frac: float = END_FRACTION,
                        scale: str = "log") -> ScanResult:
    """Scan both ratios at once: the score is the sum of the two side scores.

    Near a finite ring the ``rho`` side keeps a plateau that drags its own
    minimum above the true point, while ``chi`` vanishes from the other
    side; requiring both ratios to flatten at the same ``alpha0`` balances
    the two biases.  Candidates skipped by either side are skipped here.
    """
    r = critical_scan(alpha, rho, alpha0, "rho", frac, scale)
    c = critical_scan(alpha, chi, alpha0, "chi", frac, scale)
    score = r.score + c.score
    if np.all(np.isnan(score)):
        raise ValueError("no candidate had enough usable points on both sides")
    grid = r.alpha0
    i = int(np.nanargmin(score))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    return ScanResult(grid, score, np.minimum(r.npoints, c.npoints), float(grid[i]),
                      (float(lo), float(hi)))


@dataclass(frozen=True)
class BetaScan:
    beta: np.ndarray
    slope: np.ndarray
    x: np.ndarray  # -log(alpha_c - alpha), shared by all curves
    curves: np.ndarray  # one row per beta: log rho - beta log(alpha_c - alpha)

    @property
    def best(self) -> float:
        return float(self.beta[int(np.argmin(np.abs(self.slope)))])


def beta_scan(alpha: Sequence[float], rho: Sequence[float], alpha_c: float,
              betas: Sequence[float], frac: float = END_FRACTION) -> BetaScan:
    """Curves ``log rho - beta log(alpha_c - alpha)`` against ``-log(alpha_c - alpha)``.

    The slope over the last ``frac`` of points (those closest to ``alpha_c``)
    should vanish for the right exponent.
    """
    a = np.asarray(alpha, dtype=float)
    r = np.asarray(rho, dtype=float)
    m = (a < alpha_c) & (r > 0)
    if m.sum() < 3:
        raise ValueError("need at least 3 points with alpha < alpha_c and rho > 0")
    d = alpha_c - a[m]
    order = np.argsort(-d)
    d, lr = d[order], np.log(r[m][order])
    x = -np.log(d)
    bs = np.asarray(betas, dtype=float)
    curves = lr[None, :] - bs[:, None] * np.log(d)[None, :]
    w = _end_window(x.size, frac)
    slopes = np.array([_ols_slope(x[-w:], c[-w:]) for c in curves])
    return BetaScan(bs, slopes, x, curves)


def savgol_derivative(series: Sequence[float], window: int = 11, degree: int = 2,
                      dx: float | None = None, x: Sequence[float] | None = None) -> np.ndarray:
    """First derivative by local polynomial least squares (Savitzky-Golay).

    Abscissae must be uniform: pass the spacing ``dx`` or the points ``x``.
    The first and last ``window // 2`` points use the polynomial fitted to
    the outermost full window.
    """
    y = np.asarray(series, dtype=float)
    if window % 2 != 1 or window < degree + 1:
        raise ValueError("window must be odd and at least degree + 1")
    if y.size < window:
        raise ValueError(f"series of length {y.size} is shorter than the window {window}")
    if x is not None:
        xs = np.asarray(x, dtype=float)
        steps = np.diff(xs)
        if xs.size != y.size or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("abscissae must be uniformly spaced and match the series")
        dx = float(steps[0])
    if dx is None:
        dx = 1.0
    return savgol_filter(y, window, degree, deriv=1, delta=dx, mode="interp")
