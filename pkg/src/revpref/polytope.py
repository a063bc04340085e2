"""Polytopes inside the unit box: linear programs, widths and sampling.

A :class:`HalfspaceSystem` holds constraints ``a . z >= b`` on top of the
implicit box ``0 <= z_i <= 1``.  Linear programs are solved by a small dense
two-phase simplex with Bland's rule, which is plenty for the handful of
dimensions and constraints the exogenous learner produces.  Approximately
uniform points come from a hit-and-run walk compiled with numba.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike

from .core import FloatArray

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
# Widths below this make the body too thin to sample.
DEGENERATE_WIDTH = 1e-9
# Chords shorter than this leave the walk in place.
MIN_CHORD = 1e-15


class Infeasible(RuntimeError):
    """The polytope is empty."""


class Unbounded(RuntimeError):
    """The objective is unbounded; cannot happen inside the box."""


class DegenerateInterior(RuntimeError):
    """Some coordinate has (near) zero width, so there is no interior to sample."""


# -- simplex ----------------------------------------------------------------


def _pivot(T: FloatArray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run_simplex(T: FloatArray, basis: list[int], ncols: int) -> None:
    """Maximize the objective stored in the last row of ``T`` (Bland's rule).

    The last row holds reduced costs as ``-c``, so a negative entry means
    the column improves the objective.  Only the first ``ncols`` columns
    may enter.
    """
    m = T.shape[0] - 1
    while True:
        col = next((j for j in range(ncols) if T[-1, j] < -PIVOT_TOL), None)
        if col is None:
            return
        best = None
        for r in range(m):
            if T[r, col] > PIVOT_TOL:
                ratio = T[r, -1] / T[r, col]
                key = (ratio, basis[r])
                if best is None or key < best[0]:
                    best = (key, r)
        if best is None:
            raise Unbounded("objective is unbounded")
        _, row = best
        _pivot(T, row, col)
        basis[row] = col


def simplex(c: ArrayLike, A: ArrayLike, b: ArrayLike) -> tuple[FloatArray, float]:
    """Maximize ``c . z`` subject to ``A z <= b`` and ``z >= 0``.

    Rows with negative right-hand side get an artificial variable and are
    cleared in a first phase.  Raises :class:`Infeasible` or
    :class:`Unbounded`.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    m, d = A.shape
    neg = np.flatnonzero(b < 0)
    k = len(neg)
    # columns: z (d), slacks (m), artificials (k), rhs
    T = np.zeros((m + 1, d + m + k + 1))
    T[:m, :d] = A
    T[:m, d : d + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(d, d + m))
    for a, r in enumerate(neg):
        T[r, : d + m] *= -1.0
        T[r, -1] *= -1.0
        T[r, d + m + a] = 1.0
        basis[r] = d + m + a
    if k:
        # phase 1: maximize -(sum of artificials)
        T[-1, d + m : d + m + k] = 1.0
        for r in neg:
            T[-1] -= T[r]
        _run_simplex(T, basis, d + m + k)
        if T[-1, -1] < -FEAS_TOL:
            raise Infeasible("no point satisfies all constraints")
        for r in range(m):
            if basis[r] >= d + m:
                col = next(
                    (j for j in range(d + m) if abs(T[r, j]) > PIVOT_TOL), None
                )
                if col is not None:
                    _pivot(T, r, col)
                    basis[r] = col
        T[:, d + m : d + m + k] = 0.0
    T[-1] = 0.0
    T[-1, :d] = -c
    for r in range(m):
        if basis[r] < d:
            T[-1] -= T[-1, basis[r]] * T[r]
    _run_simplex(T, basis, d + m)
    z = np.zeros(d)
    for r in range(m):
        if basis[r] < d:
            z[basis[r]] = T[r, -1]
    return z, float(c @ z)


# -- halfspace systems ------------------------------------------------------


@dataclass
class HalfspaceSystem:
    """Constraints ``A z >= b`` intersected with the unit box.

    Rows are scaled to unit max-norm and exact duplicates are dropped.
    """

    dims: int
    A: FloatArray
    b: FloatArray

    @classmethod
    def box(cls, dims: int) -> "HalfspaceSystem":
        return cls(dims, np.zeros((0, dims)), np.zeros(0))

    def __len__(self) -> int:
        return self.A.shape[0]

    def copy(self) -> "HalfspaceSystem":
        return HalfspaceSystem(self.dims, self.A.copy(), self.b.copy())

    def add(self, a: ArrayLike, b: float = 0.0) -> bool:
        """Add ``a . z >= b``.  Returns False if it was trivial or a duplicate."""
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        if a.shape[0] != self.dims:
            raise ValueError(f"constraint has {a.shape[0]} coefficients, expected {self.dims}")
        scale = float(np.abs(a).max())
        if scale == 0.0:
            if b > FEAS_TOL:
                raise Infeasible(f"constraint 0 >= {b}")
            return False
        a = a / scale
        b = float(b) / scale
        if len(self):
            same = np.all(np.abs(self.A - a) <= 1e-12, axis=1) & (np.abs(self.b - b) <= 1e-12)
            if same.any():
                return False
        self.A = np.vstack([self.A, a])
        self.b = np.append(self.b, b)
        return True

    def full_rows(self) -> tuple[FloatArray, FloatArray]:
        """All constraints including the box, as ``G z >= h``."""
        eye = np.eye(self.dims)
        G = np.vstack([self.A, eye, -eye])
        h = np.concatenate([self.b, np.zeros(self.dims), -np.ones(self.dims)])
        return G, h

    def slack(self, z: ArrayLike) -> FloatArray:
        G, h = self.full_rows()
        return G @ np.asarray(z, dtype=np.float64) - h

    def contains(self, z: ArrayLike, tol: float = FEAS_TOL) -> bool:
        return bool(np.all(self.slack(z) >= -tol))


def solve_lp(
    system: HalfspaceSystem, objective: ArrayLike, sense: str = "max"
) -> tuple[FloatArray, float]:
    """Optimize ``objective . z`` over the polytope; ``sense`` is ``max`` or ``min``."""
    obj = np.asarray(objective, dtype=np.float64)
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
    sign = 1.0 if sense == "max" else -1.0
    A = np.vstack([-system.A, np.eye(system.dims)])
    b = np.concatenate([-system.b, np.ones(system.dims)])
    z, val = simplex(sign * obj, A, b)
    return z, sign * val


def extreme_points(system: HalfspaceSystem) -> tuple[FloatArray, FloatArray]:
    """Minimizers and maximizers of each coordinate, as two ``d x d`` arrays."""
    d = system.dims
    lo = np.empty((d, d))
    hi = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        lo[i] = solve_lp(system, e, "min")[0]
        hi[i] = solve_lp(system, e, "max")[0]
    return lo, hi


def widths_from(lo: FloatArray, hi: FloatArray) -> FloatArray:
    idx = np.arange(lo.shape[0])
    return np.maximum(hi[idx, idx] - lo[idx, idx], 0.0)


def width(system: HalfspaceSystem, i: int) -> float:
    """``max z_i - min z_i`` over the polytope."""
    e = np.zeros(system.dims)
    e[i] = 1.0
    return max(solve_lp(system, e, "max")[1] - solve_lp(system, e, "min")[1], 0.0)


def widths(system: HalfspaceSystem) -> FloatArray:
    return widths_from(*extreme_points(system))


# -- sampling ---------------------------------------------------------------


@numba.njit(cache=True)
def _hit_and_run(G, h, x0, dirs, us):  # pragma: no cover - compiled
    x = x0.copy()
    m, d = G.shape
    for step in range(dirs.shape[0]):
        u = dirs[step]
        norm = 0.0
        for k in range(d):
            norm += u[k] * u[k]
        norm = np.sqrt(norm)
        if norm == 0.0:
            continue
        lo = -np.inf
        hi = np.inf
        for r in range(m):
            gd = 0.0
            s = -h[r]
            for k in range(d):
                gd += G[r, k] * u[k] / norm
                s += G[r, k] * x[k]
            if s < 0.0:
                s = 0.0
            if gd > 1e-15:
                t = -s / gd
                if t > lo:
                    lo = t
            elif gd < -1e-15:
                t = -s / gd
                if t < hi:
                    hi = t
        if not (hi - lo > 1e-15):
            continue
        t = lo + us[step] * (hi - lo)
        for k in range(d):
            x[k] += t * u[k] / norm
    return x


def default_steps(d: int) -> int:
    return 1000 + 100 * d * d


def start_point(system: HalfspaceSystem) -> FloatArray:
    """Average of the per-coordinate LP optimizers (a crude central point)."""
    lo, hi = extreme_points(system)
    return np.vstack([lo, hi]).mean(axis=0)


def sample_uniform(
    system: HalfspaceSystem,
    rng: np.random.Generator,
    steps: int | None = None,
    start: ArrayLike | None = None,
) -> FloatArray:
    """Approximately uniform point of the polytope via hit-and-run.

    ``start`` warm-starts the walk if it is feasible; otherwise the walk
    starts from :func:`start_point`.  Raises :class:`DegenerateInterior` if
    some coordinate is pinned.
    """
    d = system.dims
    steps = default_steps(d) if steps is None else steps
    x0 = None
    if start is not None and system.contains(start):
        x0 = np.asarray(start, dtype=np.float64)
    if x0 is None:
        lo, hi = extreme_points(system)
        if np.any(widths_from(lo, hi) < DEGENERATE_WIDTH):
            raise DegenerateInterior(f"widths {widths_from(lo, hi).tolist()}")
        x0 = np.vstack([lo, hi]).mean(axis=0)
    dirs = rng.standard_normal((steps, d))
    us = rng.random(steps)
    G, h = system.full_rows()
    x = _hit_and_run(G, h, x0, dirs, us)
    return x


def sample_many(
    system: HalfspaceSystem,
    rng: np.random.Generator,
    count: int,
    steps: int | None = None,
) -> FloatArray:
    """``count`` points, each the end of a fresh walk from the central point."""
    x0 = start_point(system)
    out = np.empty((count, system.dims))
    for k in range(count):
        out[k] = sample_uniform(system, rng, steps, start=x0)
    return out
