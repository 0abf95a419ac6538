"""Limited-set and limited-operator testers plus end-to-end theorem runners.

"Limited" is always asserted relative to the supplied test sequences: at
truncation one cannot quantify over all weak*-null sequences, so a null
classification reads "limited at truncation against the supplied specs" and
bounded-below reads "not limited, witnessed by spec i".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .conjugate import (
    ConvexFn,
    PolytopeDomain,
    SolverBudget,
    conjugate_over_polytope,
)
from .differentiability import ProbeConfig, classify_point
from .errors import DimensionError
from .spaces import (
    SUP,
    LinearOp,
    SpaceTag,
    TruncatedVector,
    adjoint_apply,
    apply,
    basis,
    dense_op,
    diagonal_op,
    dual,
    embedding_op,
    norm,
    pairing,
    zeros,
)
from .weakstar import (
    JNSequenceSpec,
    SeparatingFamily,
    basis_family,
    build_K,
    classify_minimum,
    seminorm_fn,
    tail_bounded_below,
    tail_converges,
    tail_slice,
)


@dataclass
class LimitedReport:
    """Decay trace of sup |<p_n, .>| over a set (or of ||T* p_n||)."""

    sup_values: List[float]
    decay_classification: str
    floor_estimate: float
    horizon: int
    witness_spec: Optional[int] = None
    per_spec_values: Optional[List[List[float]]] = None

    def to_dict(self):
        out = {
            "sup_values": [float(v) for v in self.sup_values],
            "decay_classification": self.decay_classification,
            "floor_estimate": float(self.floor_estimate),
            "horizon": int(self.horizon),
        }
        if self.witness_spec is not None:
            out["witness_spec"] = int(self.witness_spec)
        if self.per_spec_values is not None:
            out["per_spec_values"] = [[float(v) for v in row]
                                      for row in self.per_spec_values]
        return out


def classify_decay(values, tol: float = 1e-9, decay_ratio: float = 0.1,
                   floor_ratio: float = 0.5) -> str:
    """null / bounded-below / inconclusive by the shared tail rules."""
    v = np.asarray(values, dtype=float)
    if tail_converges(v, tol, decay_ratio):
        return "null"
    if tail_bounded_below(v, tol, floor_ratio):
        return "bounded-below"
    return "inconclusive"


def _floor_estimate(values) -> float:
    return float(np.min(tail_slice(np.asarray(values, dtype=float))))


def limited_set_test(A_vertices: Sequence[TruncatedVector],
                     spec: JNSequenceSpec, horizon: int,
                     tol: float = 1e-9) -> LimitedReport:
    """Uniform-convergence test of the spec's terms over a vertex-described set.

    By convexity the sup of |<p, .>| over the hull equals the max over the
    vertices, so the trace is exact for the described set.
    """
    verts = list(A_vertices)
    if not verts:
        raise DimensionError("the set needs at least one vertex")
    values = []
    for p in spec.take(horizon):
        values.append(max(abs(pairing(p, v)) for v in verts))
    return LimitedReport(values, classify_decay(values, tol),
                         _floor_estimate(values), horizon)


def limited_operator_test(T: LinearOp, specs: Sequence[JNSequenceSpec],
                          horizon: int, tol: float = 1e-9) -> LimitedReport:
    """Trace n -> ||T* p_n|| against each supplied spec.

    null means limited at truncation against the supplied specs; a
    bounded-below trace is a non-limitedness witness and its spec index is
    recorded.
    """
    specs = list(specs)
    if not specs:
        raise DimensionError("need at least one test-sequence spec")
    per_spec, labels = [], []
    for spec in specs:
        vals = [norm(adjoint_apply(T, p)) for p in spec.take(horizon)]
        per_spec.append(vals)
        labels.append(classify_decay(vals, tol))
    witness = next((i for i, c in enumerate(labels) if c == "bounded-below"), None)
    if witness is not None:
        overall, head = "bounded-below", witness
    elif all(c == "null" for c in labels):
        overall, head = "null", 0
    else:
        overall, head = "inconclusive", labels.index("inconclusive")
    return LimitedReport(per_spec[head], overall, _floor_estimate(per_spec[head]),
                         horizon, witness_spec=witness, per_spec_values=per_spec)


def unit_ball_vertices(space: SpaceTag, N: int, seed: int = 0,
                       exact_exponent: int = 12,
                       n_random: int = 4096) -> List[TruncatedVector]:
    """Extreme points (sampled beyond 2^12) of the unit ball of a truncation.

    sup: sign patterns, exact for N <= exact_exponent, random afterward;
    one: the +-e_k; two: +-e_k plus random unit two-norm samples (the sphere
    has no finite vertex set, so this is a surrogate).
    """
    rng = np.random.default_rng(seed)
    if space.norm_kind == "sup":
        if N <= exact_exponent:
            out = []
            for bits in range(2 ** N):
                signs = np.array([1.0 if (bits >> k) & 1 else -1.0
                                  for k in range(N)])
                out.append(TruncatedVector(signs, space))
            return out
        return [TruncatedVector(rng.choice([-1.0, 1.0], size=N), space)
                for _ in range(n_random)]
    out = []
    for k in range(N):
        e = basis(k, N, space)
        out.extend([e, -e])
    if space.norm_kind == "two":
        for _ in range(min(n_random, 256)):
            c = rng.standard_normal(N)
            out.append(TruncatedVector(c / np.linalg.norm(c), space))
    return out


def compose_with_operator(f: ConvexFn, T: LinearOp) -> ConvexFn:
    """The pullback f o T as a ConvexFn on T's domain."""
    grad = None
    if f.gradient is not None:
        def grad(y, _f=f, _T=T):
            gx = _f.gradient(apply(_T, y))
            gx_vec = TruncatedVector(np.asarray(gx, dtype=float), dual(_T.codomain))
            return adjoint_apply(_T, gx_vec).coords
    lip = None
    if f.lipschitz_bound is not None:
        from .spaces import operator_norm_bound
        lip = f.lipschitz_bound * operator_norm_bound(T)
    return ConvexFn(lambda y: f(apply(T, y)), lipschitz_bound=lip,
                    gradient=grad, name=f"{f.name or 'f'}-composed")


def pgnf_construct(spec: JNSequenceSpec, N: int, family: SeparatingFamily,
                   budget: SolverBudget = None) -> ConvexFn:
    """Canonical convex function that is Gateaux but not Frechet at 0.

    Built as the conjugate of the separating seminorm restricted to the hull
    of the spec's terms and the origin, evaluated on the primal side:
    f(x) = max over that hull of <p, x> - h(p).  Nonnegative, vanishing at 0,
    convex, and Lipschitz with the hull's largest vertex norm.
    """
    if budget is None:
        budget = SolverBudget()
    K = build_K(spec, N)
    if family.dim != K.dim:
        raise DimensionError("family and spec dimensions disagree")
    g = seminorm_fn(family)
    h_eval = g.evaluator

    def conj_eval(p: TruncatedVector, _K=K, _h=h_eval):
        if _K.contains(p, tol=1e-9):
            return float(_h(p))
        return float("inf")

    primal_space = family.vectors[0].space
    dual_space = K.space
    conjugate_side = ConvexFn(conj_eval, domain_hint=K,
                              known_minimizer=zeros(K.dim, dual_space),
                              coordinate_weights=g.coordinate_weights,
                              name="seminorm-plus-indicator")

    def evaluator(x: TruncatedVector, _g=g, _K=K, _budget=budget):
        return conjugate_over_polytope(_g, _K, x, _budget).value

    return ConvexFn(evaluator,
                    lipschitz_bound=K.max_vertex_norm,
                    known_conjugate=conjugate_side,
                    name="pgnf")


# ---------------------------------------------------------------------------
# operator factories (shared with the CLI)

def identity_operator(N: int, space: SpaceTag = SUP) -> LinearOp:
    return embedding_op(N, space, space)


def zero_operator(N: int, space: SpaceTag = SUP) -> LinearOp:
    return dense_op(np.zeros((N, N)), space, space)


def diag_operator(N: int, pattern: str = "harmonic",
                  space: SpaceTag = SUP) -> LinearOp:
    if pattern == "harmonic":
        d = 1.0 / (np.arange(N) + 1.0)
    elif pattern == "dyadic":
        d = 2.0 ** (-np.arange(N, dtype=float))
    elif pattern == "ones":
        d = np.ones(N)
    else:
        raise ValueError(f"unknown diagonal pattern {pattern!r}")
    return diagonal_op(d, space, space)


def _diag_entries(T: LinearOp) -> Optional[np.ndarray]:
    if T.kind == "diagonal":
        return T.diag
    if T.kind == "embedding":
        return np.ones(T.n_in)
    if T.kind == "dense" and np.allclose(T.matrix, np.diag(np.diag(T.matrix))):
        return np.diag(T.matrix)
    return None


def pgnf_scale_grid(N: int, bound_floor: float = 1.0) -> np.ndarray:
    """Dyadic scales that keep a coordinate witness available at every scale.

    Scales below 2^(1 - N/2) / floor lose their witnesses (the hull's
    smallest seminorm level is about 2^-(N/2)) and would flip the
    classification to Frechet, which is the truncation artifact the reports
    warn about.
    """
    j_max = int(np.floor((N - 1) / 2.0 + np.log2(max(bound_floor, 1e-9))))
    j_max = max(3, j_max)
    return 2.0 ** (-np.arange(0, j_max + 1, dtype=float))


# ---------------------------------------------------------------------------
# convex test instances for the "if" direction

def random_convex_instances(T: LinearOp, count: int, seed: int = 0):
    """Seeded convex functions with a known Gateaux derivative at T(y).

    Returns tuples (name, f, y, Q) with f: X -> R convex, y a point of Yid,
    and Q the derivative of f at T(y).  Kinds cycle through a smooth
    quadratic, a log-sum-exp, and a max-affine function arranged to have a
    unique active piece at T(y).
    """
    rng = np.random.default_rng(seed)
    X = T.codomain
    Y = T.domain
    Xd = dual(X)
    out = []
    for i in range(count):
        kind = ("quadratic", "logsumexp", "maxaffine")[i % 3]
        y = TruncatedVector(rng.uniform(-1.0, 1.0, size=T.n_in), Y)
        x = apply(T, y)
        if kind == "quadratic":
            a = rng.uniform(-1.0, 1.0, size=T.n_out)
            b = rng.uniform(-0.5, 0.5, size=T.n_out)
            f = ConvexFn(
                lambda v, a=a, b=b: 0.5 * float(np.sum((v.coords - a) ** 2))
                + float(b @ v.coords),
                gradient=lambda v, a=a, b=b: (v.coords - a) + b,
                name="quadratic")
            Q = TruncatedVector((x.coords - a) + b, Xd)
        elif kind == "logsumexp":
            tau = 0.7
            a = rng.uniform(-0.5, 0.5, size=T.n_out)
            def ev(v, a=a, tau=tau):
                z = (v.coords - a) / tau
                m = np.max(z)
                return float(tau * (m + np.log(np.sum(np.exp(z - m)))))
            def gr(v, a=a, tau=tau):
                z = (v.coords - a) / tau
                z = z - np.max(z)
                w = np.exp(z)
                return w / np.sum(w)
            f = ConvexFn(ev, gradient=gr, lipschitz_bound=1.0, name="logsumexp")
            Q = TruncatedVector(gr(x), Xd)
        else:
            i0 = int(rng.integers(0, T.n_out))
            gap = 0.3
            c = x.coords.copy()
            c[i0] -= gap
            f = ConvexFn(
                lambda v, c=c: float(np.max(v.coords - c)),
                lipschitz_bound=1.0, name="maxaffine")
            Q = basis(i0, T.n_out, Xd)
        out.append((kind, f, y, Q))
    return out


# ---------------------------------------------------------------------------
# experiment runners

@dataclass
class TheoremConfig:
    """Settings shared by the theorem runners."""

    tol: float = 1e-6
    seed: int = 0
    n_instances: int = 20
    m_random: int = 64
    horizon: Optional[int] = None
    spec_kind: str = "basis"        # or "degenerate" for the K = {0} probe
    za2_instances: int = 6

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _witness_quotients(f_T: ConvexFn, N: int, domain_space: SpaceTag,
                       diag: np.ndarray, weights: np.ndarray):
    """Quotients of f o T at 0 along e_n at the threshold-doubling scales."""
    rows = []
    f0 = f_T(zeros(N, domain_space))
    for n in range(2, N):
        lam = float(diag[n])
        if lam <= 0:
            continue
        t = 2.0 * float(np.sqrt(weights[n])) / lam
        if t > 1.0:
            continue
        d = basis(n, N, domain_space)
        quot = (f_T(t * d) - f0) / t
        rows.append({"n": n, "t": t, "quotient": float(quot)})
    return rows


def theorem_main_experiment(T: LinearOp, N_sweep: Sequence[int],
                            config: TheoremConfig = None) -> dict:
    """Run the limited test and the matching differentiability direction.

    Non-limited operators get the counterexample construction: the canonical
    conjugate function composed with T must classify gateaux-only at 0.
    Limited operators get the upgrade check: on sampled convex instances,
    every Gateaux pass must upgrade to a Frechet pass within the window.
    """
    if config is None:
        config = TheoremConfig()
    per_N = []
    all_pass = True
    for N in N_sweep:
        if T.n_in != N:
            Tn = _resize_operator(T, N)
        else:
            Tn = T
        spec = _basis_spec_for(Tn, N)
        horizon = config.horizon or N
        lim = limited_operator_test(Tn, [spec], min(horizon, N))
        entry = {"N": int(N), "limited": lim.to_dict()}
        if lim.decay_classification == "bounded-below":
            entry["direction"] = "only-if"
            family = basis_family(N, Tn.codomain)
            f = pgnf_construct(spec, N, family)
            f_T = compose_with_operator(f, Tn)
            diag = _diag_entries(Tn)
            floor_est = max(lim.floor_estimate, 1e-9)
            grid = pgnf_scale_grid(N, floor_est)
            probe = ProbeConfig(tol=config.tol, m_random=config.m_random,
                                seed=config.seed, t_grid=grid)
            rep = classify_point(f_T, zeros(N, Tn.domain),
                                 zeros(N, dual(Tn.domain)), probe)
            entry["classification"] = rep.classification
            entry["frechet_modulus_floor"] = rep.frechet_modulus_floor
            entry["scale_window"] = list(rep.scale_window)
            if diag is not None:
                entry["witness_quotients"] = _witness_quotients(
                    f_T, N, Tn.domain, diag, family.weights)
            entry["pass"] = rep.classification == "gateaux-only"
        else:
            entry["direction"] = "if"
            labels = []
            for name, f, y, Q in random_convex_instances(
                    Tn, config.n_instances, config.seed + N):
                f_T = compose_with_operator(f, Tn)
                qY = adjoint_apply(Tn, Q)
                rep = classify_point(
                    f_T, y, qY,
                    ProbeConfig(tol=config.tol, m_random=config.m_random,
                                seed=config.seed))
                labels.append({"instance": name,
                               "classification": rep.classification})
            entry["instances"] = labels
            entry["pass"] = (lim.decay_classification == "null"
                             and all(l["classification"] == "frechet"
                                     for l in labels))
        all_pass = all_pass and entry["pass"]
        per_N.append(entry)
    return {"operator": T.kind, "N_sweep": [int(n) for n in N_sweep],
            "per_N": per_N, "pass": all_pass}


def _resize_operator(T: LinearOp, N: int) -> LinearOp:
    if T.kind == "embedding":
        return embedding_op(N, T.domain, T.codomain)
    if T.kind == "diagonal":
        d = np.resize(T.diag, N) if T.n_in < N else T.diag[:N]
        return diagonal_op(d, T.domain, T.codomain)
    if T.kind == "dense" and not np.any(T.matrix):
        return dense_op(np.zeros((N, N)), T.domain, T.codomain)
    raise DimensionError(f"{T!r} cannot be resized to N={N}")


def _basis_spec_for(T: LinearOp, N: int) -> JNSequenceSpec:
    from .weakstar import jn_basis_sequence
    return jn_basis_sequence(N, dual(T.codomain))


def _leg(name: str, status: str, **details) -> dict:
    d = {"leg": name, "status": status}
    d.update(details)
    return d


def bbf_equivalence_suite(N_sweep: Sequence[int],
                          config: TheoremConfig = None) -> dict:
    """Exercise the five equivalence legs at each truncation in the sweep.

    Legs: a coordinate JN spec yields the weak*-strong-but-not-norm-strong
    minimum (2=>3); the stuck minimizing sequence is itself a JN witness
    (3=>2); the identity is not limited (2=>4); the counterexample function
    classifies gateaux-only (4=>5); the conjugate's minimizing sequence has
    norms bounded below (5=>2).  With the degenerate spec (K = {0}) the legs
    that presuppose a JN sequence report inconclusive rather than failing.
    A dense-range limited diagonal upgrade check rides along as an optional
    companion leg.
    """
    if config is None:
        config = TheoremConfig()
    from .weakstar import jn_basis_sequence
    per_N = []
    all_ok = True
    for N in N_sweep:
        legs = []
        degenerate = config.spec_kind == "degenerate"
        dual_tag = dual(SUP)
        family = basis_family(N, SUP)
        if degenerate:
            K = PolytopeDomain((), include_origin=True, dim=N, space=dual_tag)
        else:
            spec = jn_basis_sequence(N, dual_tag)
            K = build_K(spec, N)
        h = seminorm_fn(family)
        minimizer = zeros(N, dual_tag)

        # (2) => (3): weak*-strong but not norm-strong minimum at 0
        if degenerate:
            legs.append(_leg("2=>3", "inconclusive",
                             note="no JN sequence supplied; K = {0}"))
            legs.append(_leg("3=>2", "inconclusive", note="no JN witness"))
        else:
            verts = list(K.vertices)
            seq = lambda n, v=verts: v[min(n, len(v) - 1)]
            rep = classify_minimum(h, K, family, minimizer, [seq], horizon=N,
                                   tol=config.tol)
            ok = rep.classification == "weak*-strong"
            legs.append(_leg("2=>3", "pass" if ok else "fail",
                             classification=rep.classification))
            # (3) => (2): the stuck sequence is a JN witness
            norms_tail = tail_slice(np.asarray(rep.dual_norms[0]))
            d_ok = tail_converges(rep.d_distances[0], config.tol)
            floor = float(np.min(norms_tail))
            if rep.minimizing[0] and d_ok and floor > 10 * config.tol:
                legs.append(_leg("3=>2", "pass", norm_floor=floor))
            else:
                legs.append(_leg("3=>2", "fail", norm_floor=floor))

        # (2) => (4): the identity is not limited
        if degenerate:
            legs.append(_leg("2=>4", "inconclusive", note="no JN witness"))
            legs.append(_leg("4=>5", "inconclusive", note="no JN witness"))
            legs.append(_leg("5=>2", "inconclusive", note="no JN witness"))
        else:
            I = identity_operator(N, SUP)
            lim = limited_operator_test(I, [spec], N)
            ok = lim.decay_classification == "bounded-below"
            legs.append(_leg("2=>4", "pass" if ok else "fail",
                             floor=lim.floor_estimate))

            # (4) => (5): the counterexample classifies gateaux-only
            main = theorem_main_experiment(I, [N], config)
            entry = main["per_N"][0]
            ok = entry.get("classification") == "gateaux-only"
            legs.append(_leg("4=>5", "pass" if ok else "fail",
                             classification=entry.get("classification"),
                             floor=entry.get("frechet_modulus_floor")))

            # (5) => (2): conjugate-side minimizing sequence with norm floor
            f = pgnf_construct(spec, N, family)
            g = f.known_conjugate
            vals = [g(v) for v in K.vertices]
            gmin = g(minimizer)
            minimizing = tail_converges(np.abs(np.asarray(vals) - gmin),
                                        config.tol)
            norm_floor = float(np.min([norm(v) for v in K.vertices]))
            d_vals = [  # weak* decay of the extracted sequence
                float(np.sum(family.weights *
                             np.abs(v.coords) / (1 + np.abs(v.coords))))
                for v in K.vertices]
            d_ok = tail_converges(d_vals, config.tol)
            ok = minimizing and d_ok and norm_floor > 10 * config.tol
            legs.append(_leg("5=>2", "pass" if ok else "fail",
                             norm_floor=norm_floor))

        entry = {"N": int(N), "legs": legs}

        if config.za2_instances > 0:
            Tz = diag_operator(N, "dyadic", SUP)
            za = theorem_main_experiment(
                Tz, [N],
                TheoremConfig(tol=config.tol, seed=config.seed,
                              n_instances=config.za2_instances,
                              m_random=config.m_random))
            entry["za2_dense_range_upgrade"] = {
                "status": "pass" if za["pass"] else "fail",
                "instances": za["per_N"][0].get("instances", []),
            }
        per_N.append(entry)
        for leg in legs:
            if leg["status"] == "fail":
                all_ok = False
        if "za2_dense_range_upgrade" in entry and \
                entry["za2_dense_range_upgrade"]["status"] == "fail":
            all_ok = False
    return {"N_sweep": [int(n) for n in N_sweep], "per_N": per_N,
            "pass": all_ok}
