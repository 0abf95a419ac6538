"""Fenchel conjugation over polytope domains and brute-force grid oracles.

The central operation maximizes the concave objective p |-> <p, x> - g(p)
over a polytope K of dual vectors.  Three routes are implemented:

* an exact KKT route when K is a (scaled) coordinate simplex with origin and
  g is a weighted coordinate seminorm ``sqrt(sum w_k p_k^2)`` -- the family
  every canonical construction in this package lives in;
* exact vertex enumeration when g is linear (the objective is then linear);
* Frank-Wolfe with the vertex set as linear maximization oracle otherwise.

``fenchel_conjugate_grid`` and ``polytope_weight_grid_max`` are deliberately
naive grid sweeps: they serve as independent oracles for the solver routes
and never call them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, linprog

from .errors import (
    BudgetExceeded,
    DimensionError,
    GridTooLarge,
    NonFiniteObjective,
)
from .spaces import SpaceTag, TruncatedVector, norm, pairing, vec, zeros


@dataclass(frozen=True)
class PolytopeDomain:
    """Convex hull of finitely many dual vectors, optionally with the origin.

    ``dim`` and ``space`` may be omitted when at least one vertex is given.
    """

    vertices: tuple
    include_origin: bool = True
    dim: Optional[int] = None
    space: Optional[SpaceTag] = None

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if verts:
            n = verts[0].n
            tag = verts[0].space
            for v in verts:
                if v.n != n or v.space != tag:
                    raise DimensionError("polytope vertices must share a space")
            if self.dim is not None and self.dim != n:
                raise DimensionError("dim does not match the vertices")
            object.__setattr__(self, "dim", n)
            object.__setattr__(self, "space", tag)
        else:
            if not self.include_origin:
                raise ValueError("an empty vertex list needs the origin")
            if self.dim is None or self.space is None:
                raise ValueError("an empty vertex list needs dim and space")
        object.__setattr__(
            self, "max_vertex_norm",
            max((norm(v) for v in verts), default=0.0),
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def vertex_matrix(self) -> np.ndarray:
        if not self.vertices:
            return np.zeros((0, self.dim))
        return np.array([v.coords for v in self.vertices])

    def origin(self) -> TruncatedVector:
        return zeros(self.dim, self.space)

    def scaled_basis(self):
        """Return (axis indices, scales) when every vertex is alpha_k e_k
        with positive alpha and distinct axes; otherwise None."""
        if not self.vertices or not self.include_origin:
            return None
        axes, scales = [], []
        for v in self.vertices:
            nz = np.nonzero(v.coords)[0]
            if nz.size != 1 or v.coords[nz[0]] <= 0:
                return None
            axes.append(int(nz[0]))
            scales.append(float(v.coords[nz[0]]))
        if len(set(axes)) != len(axes):
            return None
        return np.array(axes), np.array(scales)

    def membership_distance(self, p: TruncatedVector) -> float:
        """Sup-norm distance from p to the best convex combination of the
        vertices (with origin slack when included), computed by an LP."""
        if p.n != self.dim or p.space != self.space:
            raise DimensionError("point does not live in the polytope's space")
        m = self.n_vertices
        if m == 0:
            return float(np.max(np.abs(p.coords)))
        V = self.vertex_matrix()  # (m, N)
        N = self.dim
        # variables: lambda (m), t (1); minimize t
        c = np.zeros(m + 1)
        c[-1] = 1.0
        A_ub = np.zeros((2 * N + 1, m + 1))
        b_ub = np.zeros(2 * N + 1)
        A_ub[:N, :m] = V.T
        A_ub[:N, -1] = -1.0
        b_ub[:N] = p.coords
        A_ub[N:2 * N, :m] = -V.T
        A_ub[N:2 * N, -1] = -1.0
        b_ub[N:2 * N] = -p.coords
        A_ub[2 * N, :m] = 1.0
        b_ub[2 * N] = 1.0
        A_eq = b_eq = None
        if not self.include_origin:
            A_ub = A_ub[:-1]
            b_ub = b_ub[:-1]
            A_eq = np.zeros((1, m + 1))
            A_eq[0, :m] = 1.0
            b_eq = np.ones(1)
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(0, None)] * m + [(0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"membership LP failed: {res.message}")
        return float(res.fun)

    def contains(self, p: TruncatedVector, tol: float = 1e-9) -> bool:
        return self.membership_distance(p) <= tol


@dataclass(frozen=True)
class SolverBudget:
    """Iteration / accuracy budget for the polytope conjugation solver."""

    max_iters: int = 2000
    tol: float = 1e-8
    oracle_grid_points: int = 41

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class ConvexFn:
    """An evaluatable convex function with optional structure metadata.

    ``evaluator`` maps a TruncatedVector to a float (+inf allowed outside the
    effective domain).  ``coordinate_weights`` marks the function as the
    weighted coordinate seminorm sqrt(sum w_k p_k^2), which unlocks the exact
    conjugation route.  ``linear_coeffs`` marks it as <coeffs, .>.
    """

    evaluator: Callable[[TruncatedVector], float]
    lipschitz_bound: Optional[float] = None
    known_conjugate: Optional["ConvexFn"] = None
    domain_hint: Optional[PolytopeDomain] = None
    known_minimizer: Optional[TruncatedVector] = None
    gradient: Optional[Callable[[TruncatedVector], np.ndarray]] = None
    coordinate_weights: Optional[np.ndarray] = None
    linear_coeffs: Optional[np.ndarray] = None
    name: str = ""

    def __call__(self, v: TruncatedVector) -> float:
        return float(self.evaluator(v))


class ConjugateValue(NamedTuple):
    value: float
    argmax: TruncatedVector


# ---------------------------------------------------------------------------
# built-in convex functions

def sup_norm_fn(space: SpaceTag = None) -> ConvexFn:
    return ConvexFn(lambda v: float(np.max(np.abs(v.coords))),
                    lipschitz_bound=1.0, name="supnorm")


def half_sq_two_norm_fn() -> ConvexFn:
    return ConvexFn(lambda v: 0.5 * float(v.coords @ v.coords),
                    gradient=lambda v: v.coords.copy(), name="half-two-sq")


def linear_fn(coeffs) -> ConvexFn:
    c = np.asarray(coeffs, dtype=float)
    return ConvexFn(lambda v: float(c @ v.coords),
                    lipschitz_bound=float(np.sum(np.abs(c))),
                    gradient=lambda v: c.copy(),
                    linear_coeffs=c, name="linear")


def quadratic_fn(center=None, n: int = None) -> ConvexFn:
    """0.5 * ||x - center||_2^2 with an analytic gradient."""
    if center is None:
        center = np.zeros(n)
    c = np.asarray(center, dtype=float)
    return ConvexFn(lambda v: 0.5 * float(np.sum((v.coords - c) ** 2)),
                    gradient=lambda v: v.coords - c, name="custom-quadratic")


# ---------------------------------------------------------------------------
# exact route: weighted coordinate seminorm over a (scaled) basis simplex

def _simplex_waterfilling(c: np.ndarray, w: np.ndarray):
    """Maximize <c, p> - sqrt(sum w_k p_k^2) over the standard simplex
    (p >= 0, sum p = 1).  Returns (value, p).

    KKT reduces to the scalar root of B(mu) = sum (c_k - mu)_+^2 / w_k = 1,
    which is strictly decreasing with a sign change on (lo, max c).
    """
    cmax = float(np.max(c))
    w_at = float(w[int(np.argmax(c))])

    def B(mu):
        r = np.clip(c - mu, 0.0, None)
        return float(np.sum(r * r / w)) - 1.0

    lo = cmax - np.sqrt(w_at) * (1.0 + 1e-9) - 1e-300
    for _ in range(200):
        if B(lo) > 0:
            break
        lo = cmax - 2.0 * (cmax - lo)
    mu = brentq(B, lo, cmax, xtol=5e-16, rtol=8.9e-16, maxiter=300)
    r = np.clip(c - mu, 0.0, None) / w
    total = float(np.sum(r))
    p = r / total
    value = float(c @ p) - float(np.sqrt(np.sum(w * p * p)))
    return value, p


def _conjugate_exact_basis(weights, K: PolytopeDomain, x: TruncatedVector):
    axes, scales = K.scaled_basis()
    # substitute p = scale * q on the vertex axes; q ranges over the simplex
    c = x.coords[axes] * scales
    w = np.asarray(weights, dtype=float)[axes] * scales ** 2
    v, q = _simplex_waterfilling(c, w)
    if v <= 0.0:
        return 0.0, K.origin()
    p = np.zeros(K.dim)
    p[axes] = scales * q
    return v, TruncatedVector(p, K.space)


# ---------------------------------------------------------------------------
# general route: Frank-Wolfe over the vertex set

def _numeric_gradient(g: ConvexFn, p: TruncatedVector, h: float = 1e-6):
    base = p.coords
    grad = np.zeros_like(base)
    for k in range(base.size):
        step = np.zeros_like(base)
        step[k] = h
        fp = g(TruncatedVector(base + step, p.space))
        fm = g(TruncatedVector(base - step, p.space))
        grad[k] = (fp - fm) / (2 * h)
    return grad


def _frank_wolfe(g: ConvexFn, K: PolytopeDomain, x: TruncatedVector,
                 budget: SolverBudget):
    cand = list(K.vertices)
    if K.include_origin:
        cand.append(K.origin())
    vals = []
    for v in cand:
        gv = g(v)
        vals.append(-np.inf if not np.isfinite(gv) else float(x.coords @ v.coords) - gv)
    if all(v == -np.inf for v in vals):
        raise NonFiniteObjective("objective is +inf on every probed feasible point")
    finite = [(v, c) for v, c in zip(vals, cand) if v > -np.inf]
    best_val, p = max(finite, key=lambda t: t[0])
    best_pt = p
    grad_fn = g.gradient if g.gradient is not None else (
        lambda q: _numeric_gradient(g, q))
    Vm = np.array([c.coords for _, c in finite])
    for k in range(budget.max_iters):
        grad_obj = x.coords - np.asarray(grad_fn(p), dtype=float)
        scores = Vm @ grad_obj
        i = int(np.argmax(scores))
        s_coords = Vm[i]
        gap = float(grad_obj @ (s_coords - p.coords))
        fp = float(x.coords @ p.coords) - g(p)
        if fp > best_val:
            best_val, best_pt = fp, p
        if gap <= budget.tol:
            return best_val, best_pt
        step = 2.0 / (k + 2.0)
        p = TruncatedVector(p.coords + step * (s_coords - p.coords), p.space)
    raise BudgetExceeded(best_val, best_pt, budget.max_iters)


def conjugate_over_polytope(g: ConvexFn, K: PolytopeDomain,
                            x: TruncatedVector,
                            budget: SolverBudget = None) -> ConjugateValue:
    """max over p in K of <p, x> - g(p), with the maximizing point.

    The optimum is certified to ``budget.tol``: exactly for the seminorm /
    linear routes, via the Frank-Wolfe gap otherwise.  Raises
    :class:`BudgetExceeded` when the iterative route runs out of budget and
    :class:`NonFiniteObjective` when g is +inf on every probed feasible point.
    """
    if budget is None:
        budget = SolverBudget()
    if x.n != K.dim:
        raise DimensionError("x has the wrong length for this polytope")
    if K.n_vertices == 0:
        gv = g(K.origin())
        if not np.isfinite(gv):
            raise NonFiniteObjective("objective is +inf at the only feasible point")
        return ConjugateValue(-gv, K.origin())
    if g.coordinate_weights is not None and K.scaled_basis() is not None:
        v, p = _conjugate_exact_basis(g.coordinate_weights, K, x)
        return ConjugateValue(v, p)
    if g.linear_coeffs is not None:
        cand = list(K.vertices) + ([K.origin()] if K.include_origin else [])
        vals = [float(x.coords @ c.coords) - float(g.linear_coeffs @ c.coords)
                for c in cand]
        i = int(np.argmax(vals))
        return ConjugateValue(vals[i], cand[i])
    v, p = _frank_wolfe(g, K, x, budget)
    return ConjugateValue(v, p)


# ---------------------------------------------------------------------------
# independent grid oracles

def _axis_grid(box_radius: float, grid: int) -> np.ndarray:
    if grid < 3 or grid % 2 == 0:
        raise ValueError("grid must be an odd integer >= 3 so 0 is a grid point")
    return np.linspace(-box_radius, box_radius, grid)


def _box_points(n: int, box_radius: float, grid: int,
                max_points: int) -> np.ndarray:
    if grid ** n > max_points:
        raise GridTooLarge(f"grid^N = {grid}^{n} exceeds the cap {max_points}")
    ax = _axis_grid(box_radius, grid)
    pts = np.array(np.meshgrid(*([ax] * n), indexing="ij"))
    return pts.reshape(n, -1).T


def fenchel_conjugate_grid(f: ConvexFn, p: TruncatedVector,
                           box_radius: float, grid: int,
                           max_points: int = 2_000_000,
                           flag_unbounded: bool = False):
    """Brute-force estimate of f*(p) = sup over a box grid of <p,x> - f(x).

    Monotone nondecreasing under grid refinement; intended for small N as an
    oracle for the polytope solver.  With ``flag_unbounded`` the return value
    is ``(value, hit_boundary)`` where the flag marks a maximizer on the box
    boundary (the true supremum then likely grows with ``box_radius``).
    """
    primal = p.space.dual_of if p.space.is_dual else p.space
    if primal is None:
        raise DimensionError("p must carry a dual-side tag")
    X = _box_points(p.n, box_radius, grid, max_points)
    F = np.array([f(TruncatedVector(row, primal)) for row in X])
    scores = X @ p.coords - F
    i = int(np.argmax(scores))
    value = float(scores[i])
    if flag_unbounded:
        on_edge = bool(np.any(np.isclose(np.abs(X[i]), box_radius)))
        return value, on_edge
    return value


def _grid_conjugate_table(f: ConvexFn, space: SpaceTag, n: int,
                          box_radius: float, grid: int, max_points: int):
    """Values of the grid conjugate on the grid itself: (points, F, Fstar)."""
    X = _box_points(n, box_radius, grid, max_points)
    F = np.array([f(TruncatedVector(row, space)) for row in X])
    G = X.shape[0]
    Fstar = np.empty(G)
    chunk = max(1, int(5_000_000 // max(G, 1)))
    for lo in range(0, G, chunk):
        hi = min(lo + chunk, G)
        Fstar[lo:hi] = (X[lo:hi] @ X.T - F[None, :]).max(axis=1)
    return X, F, Fstar


def biconjugate_check(f: ConvexFn, sample_points, box_radius: float,
                      grid: int, max_points: int = 2_000_000) -> float:
    """max over samples of |f**(x) - f(x)| with f** from two nested grid sweeps.

    The sample points must lie strictly inside the box; samples aligned with
    the grid make the estimate one-sided (f** <= f).  The gap shrinks as the
    grid refines for any convex lower semicontinuous f.
    """
    samples = list(sample_points)
    if not samples:
        raise ValueError("need at least one sample point")
    n = samples[0].n
    space = samples[0].space
    for s in samples:
        if np.max(np.abs(s.coords)) >= box_radius:
            raise ValueError("sample points must be strictly inside the box")
    X, _, Fstar = _grid_conjugate_table(f, space, n, box_radius, grid, max_points)
    worst = 0.0
    for s in samples:
        fss = float(np.max(X @ s.coords - Fstar))
        worst = max(worst, abs(fss - f(s)))
    return worst


def _weight_tuples(m: int, resolution: int, forced_sum: bool):
    for combo in itertools.product(range(resolution + 1), repeat=m):
        t = sum(combo)
        if forced_sum and t != resolution:
            continue
        if not forced_sum and t > resolution:
            continue
        yield combo


def polytope_weight_grid_max(g: ConvexFn, K: PolytopeDomain,
                             x: TruncatedVector, resolution: int = 24,
                             max_points: int = 2_000_000) -> ConjugateValue:
    """Dense sweep over convex-combination weights of the vertices.

    Independent of the solver routes; used to cross-check
    :func:`conjugate_over_polytope` on small instances.
    """
    m = K.n_vertices
    if m == 0:
        return ConjugateValue(-g(K.origin()), K.origin())
    count = (resolution + 1) ** m
    if count > max_points:
        raise GridTooLarge(f"(res+1)^m = {count} exceeds the cap {max_points}")
    V = K.vertex_matrix()
    best, arg = -np.inf, None
    for combo in _weight_tuples(m, resolution, not K.include_origin):
        lam = np.array(combo, dtype=float) / resolution
        p = TruncatedVector(lam @ V, K.space)
        gv = g(p)
        if not np.isfinite(gv):
            continue
        v = float(x.coords @ p.coords) - gv
        if v > best:
            best, arg = v, p
    if arg is None:
        raise NonFiniteObjective("objective is +inf on every probed feasible point")
    return ConjugateValue(best, arg)
