"""Weak* machinery: separating families, the dyadic seminorm and metric,
coordinate JN-sequence generators, and strong-minimum classification.

In coordinate sequence spaces the separating family defaults to the
coordinate basis with weights 2^-k, which keeps two regression values in
closed form: the seminorm of a basis functional is 2^(-n/2) and its metric
distance to the origin is 2^(-n-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .conjugate import ConvexFn, PolytopeDomain
from .errors import DimensionError, NotInDomain, UnsupportedTag
from .spaces import SUP, SpaceTag, TruncatedVector, basis, norm, pairing, zeros


@dataclass(frozen=True)
class SeparatingFamily:
    """Unit primal vectors x_k with positive weights following the 2^-k pattern."""

    vectors: tuple
    weights: np.ndarray

    def __post_init__(self):
        vs = tuple(self.vectors)
        object.__setattr__(self, "vectors", vs)
        w = np.asarray(self.weights, dtype=float)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if len(vs) != w.size:
            raise DimensionError("one weight per family vector")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")
        for v in vs:
            if abs(norm(v) - 1.0) > 1e-12:
                raise ValueError("family vectors must have unit norm")
            if v.space.is_dual:
                raise ValueError("family vectors live on the primal side")

    @property
    def size(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors[0].n

    def is_coordinate_basis(self) -> bool:
        for k, v in enumerate(self.vectors):
            c = np.zeros(self.dim)
            if k >= self.dim:
                return False
            c[k] = 1.0
            if not np.array_equal(v.coords, c):
                return False
        return True

    def brackets(self, p: TruncatedVector) -> np.ndarray:
        """The pairings <p, x_k> for all family vectors."""
        X = np.array([v.coords for v in self.vectors])
        return X @ p.coords

    def separates(self, K: PolytopeDomain, tol: float = 0.0) -> bool:
        """Check the separation property over all vertex pairs (and the origin)."""
        pts = [v.coords for v in K.vertices]
        if K.include_origin:
            pts.append(np.zeros(K.dim))
        X = np.array([v.coords for v in self.vectors])
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                diff = pts[i] - pts[j]
                if np.max(np.abs(X @ diff)) <= tol:
                    return False
        return True


def basis_family(N: int, space: SpaceTag = SUP) -> SeparatingFamily:
    """Coordinate basis family x_k = e_k with weights 2^-k."""
    vs = tuple(basis(k, N, space) for k in range(N))
    w = 2.0 ** (-np.arange(N, dtype=float))
    return SeparatingFamily(vs, w)


def _check_dual_input(family: SeparatingFamily, p: TruncatedVector):
    if p.n != family.dim:
        raise DimensionError(f"length mismatch {p.n} vs {family.dim}")
    if not p.space.is_dual:
        raise DimensionError("expected a dual-tagged vector")


def seminorm_h(family: SeparatingFamily, p: TruncatedVector) -> float:
    """sqrt( sum_k w_k <p, x_k>^2 ) -- the separating seminorm.

    A seminorm dominated by the dual norm whenever the weights stay <= 1;
    weak*-sequentially continuous at truncation because the series converges
    uniformly on bounded sets.
    """
    _check_dual_input(family, p)
    b = family.brackets(p)
    return float(np.sqrt(np.sum(family.weights * b * b)))


def seminorm_fn(family: SeparatingFamily) -> ConvexFn:
    """The separating seminorm packaged as a ConvexFn.

    When the family is the coordinate basis the returned function carries
    ``coordinate_weights``, unlocking the exact conjugation route.
    """
    weights = family.weights
    if family.is_coordinate_basis():
        def grad(p):
            h = np.sqrt(np.sum(weights * p.coords ** 2))
            if h == 0.0:
                return np.zeros(p.n)
            return weights * p.coords / h

        return ConvexFn(lambda p: seminorm_h(family, p),
                        lipschitz_bound=float(np.sqrt(np.max(weights))),
                        gradient=grad,
                        coordinate_weights=weights,
                        name="separating-seminorm")
    X = np.array([v.coords for v in family.vectors])

    def grad_general(p):
        b = X @ p.coords
        h = np.sqrt(np.sum(weights * b * b))
        if h == 0.0:
            return np.zeros(p.n)
        return (weights * b) @ X / h

    return ConvexFn(lambda p: seminorm_h(family, p),
                    lipschitz_bound=float(np.sqrt(np.sum(weights))),
                    gradient=grad_general,
                    name="separating-seminorm")


def weakstar_metric(family: SeparatingFamily, p: TruncatedVector,
                    q: TruncatedVector) -> float:
    """sum_k w_k * nu_k / (1 + nu_k) with nu_k = |<p - q, x_k>|.

    A metric on any set the family separates; always < sum_k w_k.
    """
    _check_dual_input(family, p)
    _check_dual_input(family, q)
    nu = np.abs(family.brackets(TruncatedVector(p.coords - q.coords, p.space)))
    return float(np.sum(family.weights * nu / (1.0 + nu)))


@dataclass(frozen=True)
class JNSequenceSpec:
    """Generator of a candidate JN-sequence: dual vectors with norms bounded
    below that pair to zero against every fixed primal vector eventually."""

    generator: Callable[[int], TruncatedVector]
    norm_floor: float
    length: Optional[int] = None
    label: str = ""

    def take(self, horizon: int) -> List[TruncatedVector]:
        if self.length is not None and horizon > self.length:
            raise DimensionError(
                f"horizon {horizon} exceeds the {self.length} generated terms")
        return [self.generator(n) for n in range(horizon)]


def jn_basis_sequence(N: int, dual_tag: SpaceTag) -> JNSequenceSpec:
    """The coordinate-basis generator n -> e_n with norm floor 1.

    At truncation N it satisfies both JN requirements: every term has unit
    dual norm, and <e_n, e_k> vanishes for n != k.  Sup-tagged duals are not
    supported (their predual is a one-norm space, outside the modeled pairs).
    """
    if N < 1:
        raise DimensionError("N must be >= 1")
    if not dual_tag.is_dual or dual_tag.norm_kind not in ("one", "two"):
        raise UnsupportedTag(f"JN basis sequence needs a one- or two-tagged dual, got {dual_tag!r}")
    return JNSequenceSpec(lambda n: basis(n, N, dual_tag),
                          norm_floor=1.0, length=N, label="basis")


def validate_jn(spec: JNSequenceSpec, horizon: int,
                family: SeparatingFamily = None) -> bool:
    """Check the two JN invariants on the first ``horizon`` terms."""
    terms = spec.take(horizon)
    if any(norm(t) < spec.norm_floor - 1e-12 for t in terms):
        return False
    if spec.norm_floor <= 0:
        return False
    if family is None:
        family = basis_family(terms[0].n)
    B = np.array([family.brackets(t) for t in terms])  # (n, k)
    # coordinate-wise decay: for each fixed k the bracket must die out
    tail = B[-max(1, horizon // 4):]
    return bool(np.all(np.abs(tail) <= 1e-9))


def build_K(spec: JNSequenceSpec, N: int) -> PolytopeDomain:
    """Hull of the first N generated terms together with the origin (the
    weak* limit point of the sequence)."""
    if N < 1:
        raise DimensionError("N must be >= 1")
    return PolytopeDomain(tuple(spec.take(N)), include_origin=True)


# ---------------------------------------------------------------------------
# tail rules shared with the limited module

def tail_slice(values: np.ndarray) -> np.ndarray:
    n = len(values)
    return values[n - max(1, -(-n // 4)):]


def tail_converges(values, tol: float, decay_ratio: float = 0.1) -> bool:
    """Finite-horizon reading of "tends to 0".

    True when the last quarter stays below ``tol`` (the absolute rule), or
    when the whole run is nonincreasing and the tail has decayed below
    ``decay_ratio`` times the peak (geometric-decay rule; needed because
    closed forms like 2^(-n/2) never dip under a fixed tol at desk horizons).
    """
    v = np.abs(np.asarray(values, dtype=float))
    tail = tail_slice(v)
    if np.max(tail) <= tol:
        return True
    peak = np.max(v)
    if peak == 0.0:
        return True
    nonincreasing = bool(np.all(np.diff(v) <= 1e-12 * max(1.0, peak)))
    return nonincreasing and np.max(tail) <= decay_ratio * peak


def tail_bounded_below(values, tol: float, floor_ratio: float = 0.5) -> bool:
    """True when the last quarter stays above 10*tol and above half the peak."""
    v = np.abs(np.asarray(values, dtype=float))
    tail = tail_slice(v)
    peak = np.max(v)
    return bool(np.min(tail) >= 10.0 * tol and np.min(tail) >= floor_ratio * peak)


@dataclass
class MinSeqReport:
    """Traces of the supplied sequences and the resulting classification.

    Each list holds one row per supplied sequence; rows share the horizon
    length.  ``dual_norms`` records norm distances to the minimizer (plain
    dual norms when the minimizer is 0).
    """

    values: List[List[float]]
    d_distances: List[List[float]]
    dual_norms: List[List[float]]
    classification: str
    minimizing: List[bool] = field(default_factory=list)
    minimum_value: float = 0.0

    def to_dict(self):
        return {
            "values": [[float(x) for x in row] for row in self.values],
            "d_distances": [[float(x) for x in row] for row in self.d_distances],
            "dual_norms": [[float(x) for x in row] for row in self.dual_norms],
            "classification": self.classification,
            "minimizing": list(self.minimizing),
            "minimum_value": float(self.minimum_value),
        }


def classify_minimum(fn_on_K: ConvexFn, K: PolytopeDomain,
                     family: SeparatingFamily,
                     minimizer: TruncatedVector,
                     sequences, horizon: int, tol: float = 1e-6,
                     norm_tol: float = 1e-3,
                     decay_ratio: float = 0.1,
                     membership_tol: float = 1e-9) -> MinSeqReport:
    """Classify the minimum of ``fn_on_K`` at ``minimizer`` from supplied
    minimizing-sequence candidates.

    weak*-strong: every minimizing sequence has d(., minimizer) -> 0;
    norm-strong: additionally the norm distances tend to 0;
    neither: some minimizing sequence keeps d bounded away from 0;
    inconclusive: no supplied sequence minimizes at the horizon.
    """
    if K.membership_distance(minimizer) > max(membership_tol, tol):
        raise NotInDomain("minimizer is not a point of K")
    fmin = fn_on_K(minimizer)
    values, dists, norms_, minimizing = [], [], [], []
    for seq in sequences:
        vrow, drow, nrow = [], [], []
        for n in range(horizon):
            p = seq(n)
            if K.membership_distance(p) > max(membership_tol, tol):
                raise NotInDomain(f"sequence point at index {n} leaves K")
            vrow.append(fn_on_K(p))
            drow.append(weakstar_metric(family, p, minimizer))
            nrow.append(norm(p - minimizer))
        values.append(vrow)
        dists.append(drow)
        norms_.append(nrow)
        gaps = np.abs(np.asarray(vrow) - fmin)
        minimizing.append(tail_converges(gaps, tol, decay_ratio))
    if not any(minimizing):
        cls = "inconclusive"
    else:
        d_ok, d_stuck, n_ok = [], [], []
        for mz, drow, nrow in zip(minimizing, dists, norms_):
            if not mz:
                continue
            d_ok.append(tail_converges(drow, tol, decay_ratio))
            d_stuck.append(tail_bounded_below(drow, tol))
            n_ok.append(tail_converges(nrow, norm_tol, decay_ratio))
        if any(d_stuck):
            cls = "neither"
        elif all(d_ok):
            cls = "norm-strong" if all(n_ok) else "weak*-strong"
        else:
            cls = "inconclusive"
    return MinSeqReport(values, dists, norms_, cls, minimizing, float(fmin))
