"""Truncated sequence-space vectors, norms, dual pairings, and linear operators.

Every infinite-dimensional space is modeled as a family of truncations R^N
carrying a norm tag.  A tag records which norm the coordinates are measured
in (``sup``, ``one`` or ``two``) and, for dual-side tags, which primal tag it
is the dual of.  The supported dual pairings are sup <-> one (the c0 / l1
pairing in either orientation) and two <-> two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, TagError

_NORM_KINDS = ("sup", "one", "two")

# (dual kind, primal kind) pairs accepted by the pairing bracket.
_DUAL_PAIRS = {("one", "sup"), ("sup", "one"), ("two", "two")}


@dataclass(frozen=True)
class SpaceTag:
    """Norm semantics of a truncated space.

    ``dual_of`` is None for primal spaces and points back to the primal tag
    for dual-side tags.
    """

    norm_kind: str
    dual_of: Optional["SpaceTag"] = None

    def __post_init__(self):
        if self.norm_kind not in _NORM_KINDS:
            raise TagError(f"unknown norm kind {self.norm_kind!r}")

    @property
    def is_dual(self) -> bool:
        return self.dual_of is not None

    def __repr__(self):
        side = f" dual of {self.dual_of.norm_kind}" if self.is_dual else ""
        return f"SpaceTag({self.norm_kind}{side})"


#: sup-norm primal space (truncated c0).
SUP = SpaceTag("sup")
#: two-norm primal space (truncated l2).
TWO = SpaceTag("two")
#: one-norm primal space (truncated l1).  Its own dual is a sup-tagged
#: dual-side space; see :func:`dual` for what is and is not representable.
ONE = SpaceTag("one")


def dual(tag: SpaceTag) -> SpaceTag:
    """Return the dual tag of ``tag``.

    Allowed requests: the dual of a sup primal (giving a one-tagged dual),
    and the dual of any two-tagged space (self-dual; asking twice pops back
    to the primal).  The dual of a one-norm primal is rejected: sup-tagged
    dual spaces may be constructed directly as ``SpaceTag("sup", dual_of=...)``
    but are never accepted as a domain whose own dual is needed.
    """
    if tag.norm_kind == "two":
        if tag.dual_of is not None:
            return tag.dual_of
        return SpaceTag("two", dual_of=tag)
    if tag.norm_kind == "sup" and tag.dual_of is None:
        return SpaceTag("one", dual_of=tag)
    raise TagError(f"the dual of {tag!r} is not modeled")


@dataclass(frozen=True, eq=False)
class TruncatedVector:
    """A point of a truncated sequence space together with its norm tag."""

    coords: np.ndarray
    space: SpaceTag

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionError("coords must be a 1-D array of length >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("all coordinates must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.size

    def norm(self) -> float:
        return norm(self)

    def _same_space(self, other: "TruncatedVector"):
        if self.n != other.n or self.space != other.space:
            raise DimensionError("vectors live in different spaces")

    def __add__(self, other):
        self._same_space(other)
        return TruncatedVector(self.coords + other.coords, self.space)

    def __sub__(self, other):
        self._same_space(other)
        return TruncatedVector(self.coords - other.coords, self.space)

    def __mul__(self, scalar):
        return TruncatedVector(self.coords * float(scalar), self.space)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncatedVector(-self.coords, self.space)

    def allclose(self, other, tol=1e-12) -> bool:
        self._same_space(other)
        return bool(np.allclose(self.coords, other.coords, rtol=0, atol=tol))

    def __repr__(self):
        return f"TruncatedVector({np.array2string(self.coords, threshold=8)}, {self.space!r})"


def vec(coords, space: SpaceTag) -> TruncatedVector:
    """Build a :class:`TruncatedVector` from any array-like."""
    return TruncatedVector(np.asarray(coords, dtype=float), space)


def zeros(n: int, space: SpaceTag) -> TruncatedVector:
    return TruncatedVector(np.zeros(n), space)


def basis(k: int, n: int, space: SpaceTag) -> TruncatedVector:
    """The k-th coordinate vector of R^n with the given tag."""
    if not 0 <= k < n:
        raise DimensionError(f"basis index {k} out of range for length {n}")
    c = np.zeros(n)
    c[k] = 1.0
    return TruncatedVector(c, space)


def norm(v: TruncatedVector) -> float:
    """Norm of ``v`` according to its tag (sup, one or two)."""
    c = v.coords
    if v.space.norm_kind == "sup":
        return float(np.max(np.abs(c)))
    if v.space.norm_kind == "one":
        return float(np.sum(np.abs(c)))
    return float(np.linalg.norm(c))


def pairing(p: TruncatedVector, x: TruncatedVector) -> float:
    """Dual bracket <p, x> = sum_i p_i x_i.

    ``p`` must carry a dual-side tag and ``x`` a primal tag, and the two
    norm kinds must form a dual pair.  Bilinear, and bounded by
    ``norm(p) * norm(x)``.
    """
    if p.n != x.n:
        raise DimensionError(f"length mismatch {p.n} vs {x.n}")
    if not p.space.is_dual or x.space.is_dual:
        raise DimensionError("pairing takes (dual vector, primal vector)")
    if (p.space.norm_kind, x.space.norm_kind) not in _DUAL_PAIRS:
        raise DimensionError(
            f"tags {p.space!r} / {x.space!r} are not a dual pair"
        )
    return float(np.dot(p.coords, x.coords))


@dataclass(frozen=True)
class LinearOp:
    """A linear operator between truncated spaces with an exact adjoint.

    ``kind`` is one of ``dense`` (explicit matrix), ``diagonal`` (diagonal
    action) or ``embedding`` (identity between tags).
    """

    kind: str
    domain: SpaceTag
    codomain: SpaceTag
    matrix: Optional[np.ndarray] = field(default=None)
    diag: Optional[np.ndarray] = field(default=None)
    n_in: int = 0
    n_out: int = 0

    def __post_init__(self):
        if self.kind not in ("dense", "diagonal", "embedding"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.domain.is_dual or self.codomain.is_dual:
            raise TagError("operators act between primal spaces")

    def __repr__(self):
        return f"LinearOp({self.kind}, {self.n_in}->{self.n_out})"


def dense_op(matrix, domain: SpaceTag, codomain: SpaceTag) -> LinearOp:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise DimensionError("dense operator needs a 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    m = m.copy()
    m.setflags(write=False)
    return LinearOp("dense", domain, codomain, matrix=m,
                    n_in=m.shape[1], n_out=m.shape[0])


def diagonal_op(diag, domain: SpaceTag, codomain: SpaceTag) -> LinearOp:
    d = np.asarray(diag, dtype=float)
    if d.ndim != 1:
        raise DimensionError("diagonal operator needs a 1-D array")
    if not np.all(np.isfinite(d)):
        raise ValueError("diagonal entries must be finite")
    d = d.copy()
    d.setflags(write=False)
    return LinearOp("diagonal", domain, codomain, diag=d,
                    n_in=d.size, n_out=d.size)


def embedding_op(n: int, domain: SpaceTag, codomain: SpaceTag) -> LinearOp:
    """Identity map of R^n viewed as a change of norm tag."""
    return LinearOp("embedding", domain, codomain, n_in=n, n_out=n)


def apply(T: LinearOp, y: TruncatedVector) -> TruncatedVector:
    """Apply ``T`` to ``y``; the result carries ``T.codomain``."""
    if y.space != T.domain:
        raise DimensionError(f"vector tag {y.space!r} is not {T.domain!r}")
    if y.n != T.n_in:
        raise DimensionError(f"length mismatch {y.n} vs {T.n_in}")
    if T.kind == "dense":
        out = T.matrix @ y.coords
    elif T.kind == "diagonal":
        out = T.diag * y.coords
    else:
        out = y.coords
    return TruncatedVector(out, T.codomain)


def adjoint_apply(T: LinearOp, p: TruncatedVector) -> TruncatedVector:
    """Apply the adjoint T* to a functional on the codomain.

    Satisfies <T* p, y> = <p, T y> for every y in the domain.
    """
    expected = dual(T.codomain)
    if p.space != expected:
        raise DimensionError(
            f"adjoint input tag {p.space!r} is not the codomain dual {expected!r}"
        )
    if p.n != T.n_out:
        raise DimensionError(f"length mismatch {p.n} vs {T.n_out}")
    if T.kind == "dense":
        out = T.matrix.T @ p.coords
    elif T.kind == "diagonal":
        out = T.diag * p.coords
    else:
        out = p.coords
    return TruncatedVector(out, dual(T.domain))


def operator_norm_bound(T: LinearOp) -> float:
    """An upper bound on ||T|| between the tagged norms.

    Exact induced-norm formulas are used where they are cheap to state
    (domain one or codomain sup, and the spectral two->two case); the
    remaining combinations return a safe upper bound.
    """
    if T.kind == "dense":
        m = T.matrix
    elif T.kind == "diagonal":
        m = np.diag(T.diag)
    else:
        m = np.eye(T.n_in)
    a, b = T.domain.norm_kind, T.codomain.norm_kind
    if a == "one":
        if b == "sup":
            return float(np.max(np.abs(m)))
        if b == "one":
            return float(np.max(np.sum(np.abs(m), axis=0)))
        return float(np.max(np.linalg.norm(m, axis=0)))
    if b == "sup":
        if a == "sup":
            return float(np.max(np.sum(np.abs(m), axis=1)))
        return float(np.max(np.linalg.norm(m, axis=1)))
    if a == "two" and b == "two":
        return float(np.linalg.norm(m, 2))
    if a == "two" and b == "one":
        return float(np.sum(np.linalg.norm(m, axis=1)))
    if a == "sup" and b == "two":
        return float(np.sqrt(np.sum(np.sum(np.abs(m), axis=1) ** 2)))
    # sup -> one: exact value is NP-hard; total absolute mass is an upper bound
    return float(np.sum(np.abs(m)))
