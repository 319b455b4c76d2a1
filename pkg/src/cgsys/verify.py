"""Residual verification, classification and normal form of gradient systems.

A gradient system of dimension k on a chart is the data of vector fields
xi_1..xi_k and functions u_1..u_k subject to

    du_a(xi_b) = 0,   d^c u_a(xi_b) = delta_ab,

with {xi_a, J xi_a} pointwise independent and spanning an involutive
distribution.  Every identity that follows from these axioms (bracket
closure, the dd^c bracket identities, commutation of the complexified
fields, dimension splittings of the tangent space, the CR type of level
sets) is checked here as a numerical residual at seeded sample points with
an explicit tolerance; verdicts are residual-based, never symbolic proofs.

Sampling draws from the box [-2, 2]^(2N) filtered by the system's domain
predicate, so identical seed and configuration reproduce identical residual
tables bit for bit.  Checks are pure and can fan out over points
concurrently; reports merge deterministically by point index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, evaluate, diff
from .flow import DEFAULT_CONFIG, FlowConfig, flow_real
from .geometry import (
    ComplexChart, VectorField, apply_J, complexify, d_of, dc_of, env_at,
    field_matrix, is_holomorphic, j_matrix, laplacian, lie_bracket,
)

__all__ = [
    "GradientSystem", "CheckResult", "VerificationReport", "Classification",
    "DecompositionRecord", "LevelSetRecord", "NormalForm", "GridSpec",
    "SamplingError", "NormalFormRefusal",
    "sample_points", "check_axioms", "check_decompositions",
    "check_bracket_relations", "check_commutation", "classify",
    "check_level_set", "normal_form",
]


class SamplingError(RuntimeError):
    """No sample points satisfy the domain predicate."""


class NormalFormRefusal(RuntimeError):
    """The system is not holomorphic abelian, so no normal form exists here."""


@dataclass(frozen=True, eq=False)
class GradientSystem:
    """Symbolic gradient system: k fields and k gradient components on one
    chart, with an optional domain predicate (each expression must be > 0)."""

    chart: ComplexChart
    fields: tuple[VectorField, ...]
    grads: tuple[Expr, ...]
    domain: tuple[Expr, ...] = ()
    name: str = ""

    def __post_init__(self):
        if len(self.fields) != len(self.grads) or not self.fields:
            raise ValueError("need equally many fields and gradient components")
        if self.k > self.chart.N:
            raise ValueError("system dimension k cannot exceed the complex dimension")
        for f in self.fields:
            if f.chart != self.chart:
                raise ValueError("all fields must live on the system chart")

    @property
    def k(self) -> int:
        return len(self.fields)

    def in_domain(self, p) -> bool:
        env = env_at(self.chart, p)
        return all(evaluate(g, env) > 0.0 for g in self.domain)


@dataclass
class CheckResult:
    """One named residual check over a set of sample points."""

    name: str
    anchor: str
    residuals: np.ndarray
    tolerance: float
    points: int
    note: str = ""

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if np.size(self.residuals) else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


@dataclass
class Classification:
    holomorphic: bool
    abelian: bool
    harmonic: bool
    residuals: dict[str, float]

    def as_dict(self) -> dict[str, bool]:
        return {"holomorphic": self.holomorphic, "abelian": self.abelian,
                "harmonic": self.harmonic}


@dataclass
class VerificationReport:
    """Named residual checks with tolerances and verdicts; reproducible from
    the recorded seed and point count."""

    system: str
    seed: int
    n_points: int
    checks: list[CheckResult] = field(default_factory=list)
    classification: Classification | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, more) -> "VerificationReport":
        self.checks.extend(more)
        return self


def sample_points(sys: GradientSystem, n: int, seed: int,
                  box: float = 2.0) -> np.ndarray:
    """Seeded uniform samples from [-box, box]^(2N) filtered by the domain
    predicate; resamples until n are accepted or 100 n draws are spent."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < n and attempts < 100 * n:
        p = rng.uniform(-box, box, size=sys.chart.dim)
        attempts += 1
        if sys.in_domain(p):
            out.append(p)
    if len(out) < n:
        raise SamplingError(
            f"found {len(out)}/{n} domain points in {attempts} draws")
    return np.array(out)


# ---------------------------------------------------------------------------
# axiom checks


def _pair_exprs(sys: GradientSystem):
    """Symbolic du_a(xi_b) and d^c u_a(xi_b) for all pairs."""
    d_tab = [[d_of(g, f) for f in sys.fields] for g in sys.grads]
    dc_tab = [[dc_of(g, f) for f in sys.fields] for g in sys.grads]
    return d_tab, dc_tab


def check_axioms(sys: GradientSystem, n_points: int = 100, seed: int = 0,
                 tol: float = 1e-9) -> VerificationReport:
    """Residuals of the two defining identities plus pointwise independence
    and involutivity of the 2k-frame."""
    pts = sample_points(sys, n_points, seed)
    k = sys.k
    d_tab, dc_tab = _pair_exprs(sys)
    frame = list(sys.fields) + [apply_J(f) for f in sys.fields]
    brackets = _pair_brackets(frame)

    r_d = np.empty((len(pts), k, k))
    r_dc = np.empty((len(pts), k, k))
    r_rank = np.empty(len(pts))
    r_inv = np.empty(len(pts))
    for i, p in enumerate(pts):
        env = env_at(sys.chart, p)
        for a in range(k):
            for b in range(k):
                r_d[i, a, b] = abs(evaluate(d_tab[a][b], env))
                r_dc[i, a, b] = abs(evaluate(dc_tab[a][b], env)
                                    - (1.0 if a == b else 0.0))
        S = field_matrix(frame, p)
        r_rank[i] = 2 * k - np.linalg.matrix_rank(S)
        r_inv[i] = _span_defect(S, brackets, p)

    report = VerificationReport(sys.name, seed, n_points)
    report.checks = [
        CheckResult("axioms.gradient-annihilation", "gradient-annihilation",
                    r_d.reshape(len(pts), -1).max(axis=1), tol, n_points),
        CheckResult("axioms.normalization", "twisted-gradient-normalization",
                    r_dc.reshape(len(pts), -1).max(axis=1), tol, n_points),
        CheckResult("axioms.independence", "frame-pointwise-independence",
                    r_rank, 0.5, n_points),
        CheckResult("axioms.integrability", "span-involutivity",
                    r_inv, max(tol, 1e-9), n_points),
    ]
    return report


def _pair_brackets(fields):
    out = {}
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            out[(i, j)] = lie_bracket(fields[i], fields[j])
    return out


def _span_defect(S, brackets, p) -> float:
    worst = 0.0
    for b in brackets.values():
        v = b.values(p)
        coef, *_ = np.linalg.lstsq(S, v, rcond=None)
        worst = max(worst, float(np.linalg.norm(v - S @ coef)))
    return worst


# ---------------------------------------------------------------------------
# tangent-space decompositions


@dataclass
class DecompositionRecord:
    """Rank arithmetic of the tangent splittings at one point."""

    rank_representation: int     # expect k
    rank_span: int               # expect 2k
    rank_gradient: int           # expect k  (kernel has dimension 2n + k)
    dim_horizontal: int          # expect 2n
    rank_total: int              # expect 2N from representation + J + horizontal
    residual_gradient_on_rep: float
    expected: dict[str, int]
    warning: str = ""

    @property
    def ok(self) -> bool:
        return (self.rank_representation == self.expected["rank_representation"]
                and self.rank_span == self.expected["rank_span"]
                and self.rank_gradient == self.expected["rank_gradient"]
                and self.dim_horizontal == self.expected["dim_horizontal"]
                and self.rank_total == self.expected["rank_total"]
                and self.residual_gradient_on_rep < 1e-8)


def _gradient_matrices(sys: GradientSystem, p):
    """Rows of dU and d^c U in chart coordinates at p."""
    env = env_at(sys.chart, p)
    G = np.array([[evaluate(diff(g, name), env) for name in sys.chart.names]
                  for g in sys.grads])
    C = np.empty_like(G)
    for nu in range(sys.chart.N):
        C[:, 2 * nu] = -G[:, 2 * nu + 1]
        C[:, 2 * nu + 1] = G[:, 2 * nu]
    return G, C


def _nullspace(M, rtol=None):
    u, s, vt = np.linalg.svd(M)
    if rtol is None:
        rtol = max(M.shape) * np.finfo(float).eps
    cutoff = rtol * (s[0] if len(s) else 1.0)
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T, rank


def check_decompositions(sys: GradientSystem, p) -> DecompositionRecord:
    """Verify the splittings of the tangent space at one point by rank
    arithmetic: the representation span sits inside ker dU, the span plus its
    J-rotation is 2k-dimensional, and the horizontal space ker dU cap
    ker d^c U supplies the remaining 2n directions."""
    k, N = sys.k, sys.chart.N
    n = N - k
    Xi = field_matrix(sys.fields, p)
    JXi = field_matrix([apply_J(f) for f in sys.fields], p)
    G, C = _gradient_matrices(sys, p)
    H, rank_G = _nullspace(np.vstack([G, C]))[0], int(np.linalg.matrix_rank(G))
    rec = DecompositionRecord(
        rank_representation=int(np.linalg.matrix_rank(Xi)),
        rank_span=int(np.linalg.matrix_rank(np.hstack([Xi, JXi]))),
        rank_gradient=rank_G,
        dim_horizontal=H.shape[1],
        rank_total=int(np.linalg.matrix_rank(np.hstack([Xi, JXi, H]))),
        residual_gradient_on_rep=float(np.max(np.abs(G @ Xi))),
        expected={"rank_representation": k, "rank_span": 2 * k,
                  "rank_gradient": k, "dim_horizontal": 2 * n,
                  "rank_total": 2 * N},
    )
    # flag rank decisions sitting close to the SVD cutoff
    s = np.linalg.svd(np.hstack([Xi, JXi]), compute_uv=False)
    if len(s) > 1 and s[-1] > 0 and s[0] / s[-1] > 1e10:
        rec.warning = "rank decision is close to the singular-value cutoff"
    return rec


def decomposition_check_result(sys: GradientSystem, pts) -> CheckResult:
    """Aggregate decomposition records over points into a residual check."""
    residuals = []
    note = ""
    for p in pts:
        rec = check_decompositions(sys, p)
        residuals.append(0.0 if rec.ok else 1.0)
        if rec.warning:
            note = rec.warning
    return CheckResult("decompositions", "tangent-splitting",
                       np.array(residuals), 0.5, len(pts), note)


# ---------------------------------------------------------------------------
# bracket relations


def check_bracket_relations(sys: GradientSystem, n_points: int = 100,
                            seed: int = 0, tol: float = 1e-9) -> list[CheckResult]:
    """All bracket consequences of the axioms:

    * brackets of frame fields stay in the representation span,
    * the dd^c three-term identity collapses onto bracket evaluation,
    * applying the representation to dd^c U(X, Y) recovers -[X, Y],
    * the representation span itself is involutive,
    * J-rotated brackets satisfy [JX, JY] = [X, Y] and [JX, Y] = -[X, JY].
    """
    pts = sample_points(sys, n_points, seed)
    k = sys.k
    xs = list(sys.fields)
    jxs = [apply_J(f) for f in sys.fields]

    # pair types: (X, Y, reference bracket for the displayed identities)
    pair_list = []
    for a in range(k):
        for b in range(k):
            if a < b:
                pair_list.append((xs[a], xs[b], lie_bracket(xs[a], xs[b])))
                pair_list.append((jxs[a], jxs[b], lie_bracket(xs[a], xs[b])))
            pair_list.append((xs[a], jxs[b], lie_bracket(xs[a], jxs[b])))

    # symbolic preparation
    rep_brackets = _pair_brackets(xs)
    sym_JJ = [(lie_bracket(jxs[a], jxs[b]), rep_brackets[(a, b)])
              for a in range(k) for b in range(k) if a < b]
    sym_mixed = [(lie_bracket(jxs[a], xs[b]), lie_bracket(xs[a], jxs[b]))
                 for a in range(k) for b in range(k)]

    # dd^c u_c(X, Y) through the three-term identity, symbolically
    ddc_terms = []
    closure_brackets = []
    for X, Y, B in pair_list:
        bxy = lie_bracket(X, Y)
        closure_brackets.append(bxy)
        per_c = []
        for g in sys.grads:
            t1 = d_of(dc_of(g, Y), X)
            t2 = d_of(dc_of(g, X), Y)
            t3 = dc_of(g, bxy)
            ref = dc_of(g, B)
            per_c.append((t1, t2, t3, ref))
        ddc_terms.append((X, Y, B, per_c))

    closure = np.empty(len(pts))
    identity = np.empty(len(pts))
    recovery = np.empty(len(pts))
    rep_involutive = np.empty(len(pts))
    j_symmetry = np.empty(len(pts))

    for i, p in enumerate(pts):
        env = env_at(sys.chart, p)
        S = field_matrix(xs, p)

        worst_closure = 0.0
        for bxy in closure_brackets:
            v = bxy.values(p)
            coef, *_ = np.linalg.lstsq(S, v, rcond=None)
            worst_closure = max(worst_closure, float(np.linalg.norm(v - S @ coef)))
        closure[i] = worst_closure

        worst_id = 0.0
        worst_rec = 0.0
        for X, Y, B, per_c in ddc_terms:
            coeffs = []
            for t1, t2, t3, ref in per_c:
                val = evaluate(t1, env) - evaluate(t2, env) - evaluate(t3, env)
                coeffs.append(val)
                worst_id = max(worst_id, abs(val + evaluate(ref, env)))
            recovered = sum(c * f.values(p) for c, f in zip(coeffs, xs))
            worst_rec = max(worst_rec, float(np.max(np.abs(recovered + B.values(p)))))
        identity[i] = worst_id
        recovery[i] = worst_rec

        rep_involutive[i] = (_span_defect(S, rep_brackets, p)
                             if len(rep_brackets) else 0.0)

        worst_j = 0.0
        for lhs, rhs in sym_JJ:
            worst_j = max(worst_j, float(np.max(np.abs(lhs.values(p) - rhs.values(p)))))
        for lhs, rhs in sym_mixed:
            worst_j = max(worst_j, float(np.max(np.abs(lhs.values(p) + rhs.values(p)))))
        j_symmetry[i] = worst_j

    n = len(pts)
    return [
        CheckResult("brackets.closure", "bracket-closure-in-representation",
                    closure, tol, n),
        CheckResult("brackets.exterior-identity",
                    "exterior-derivative-bracket-identity", identity, tol, n),
        CheckResult("brackets.recovery", "bracket-recovery-through-representation",
                    recovery, tol, n),
        CheckResult("brackets.representation-involutivity",
                    "representation-involutivity", rep_involutive, tol, n),
        CheckResult("brackets.J-symmetry", "structure-rotation-bracket-symmetry",
                    j_symmetry, tol, n),
    ]


def check_commutation(sys: GradientSystem, n_points: int = 100, seed: int = 0,
                      tol: float = 1e-9) -> CheckResult:
    """Commutation of the complexified fields: with Z_a = (xi_a - i J xi_a)/2,
    [Z_a, Z_b] = 0.  Expanded over real brackets the real part is
    ([X_a, X_b] - [JX_a, JX_b])/4 and the imaginary part
    -([X_a, JX_b] + [JX_a, X_b])/4."""
    pts = sample_points(sys, n_points, seed)
    k = sys.k
    xs = list(sys.fields)
    jxs = [apply_J(f) for f in sys.fields]
    parts = []
    for a in range(k):
        for b in range(a + 1, k):
            re = lie_bracket(xs[a], xs[b]) - lie_bracket(jxs[a], jxs[b])
            im = lie_bracket(xs[a], jxs[b]) + lie_bracket(jxs[a], xs[b])
            parts.append((re, im))
    residuals = np.zeros(len(pts))
    for i, p in enumerate(pts):
        worst = 0.0
        for re, im in parts:
            rv = re.values(p) / 4.0
            iv = im.values(p) / 4.0
            worst = max(worst, float(np.max(np.hypot(rv, iv))))
        residuals[i] = worst
    note = "single-field system commutes identically" if k == 1 else ""
    return CheckResult("commutation", "complexified-fields-commute",
                       residuals, tol, len(pts), note)


# ---------------------------------------------------------------------------
# classification


def classify(sys: GradientSystem, n_points: int = 50, seed: int = 0,
             tol: float = 1e-9) -> Classification:
    """Flags: holomorphic (every complexified field satisfies Cauchy-Riemann),
    abelian (all real brackets among {xi_a, J xi_a} vanish, the real form of
    [Z_a, conj Z_b] = 0), harmonic (flat Laplacian of every gradient
    component vanishes)."""
    pts = sample_points(sys, n_points, seed)
    k = sys.k
    xs = list(sys.fields)
    jxs = [apply_J(f) for f in sys.fields]

    holo = 0.0
    for f in xs:
        _, worst = is_holomorphic(complexify(f), pts, tol)
        holo = max(holo, worst)

    abel = 0.0
    abelian_brackets = []
    for a in range(k):
        for b in range(k):
            if a < b:
                abelian_brackets.append(lie_bracket(xs[a], xs[b]))
                abelian_brackets.append(lie_bracket(jxs[a], jxs[b]))
            abelian_brackets.append(lie_bracket(xs[a], jxs[b]))
    for br in abelian_brackets:
        for p in pts:
            abel = max(abel, float(np.max(np.abs(br.values(p)))))

    harm = 0.0
    for g in sys.grads:
        lap = laplacian(g, sys.chart)
        for p in pts:
            harm = max(harm, abs(evaluate(lap, env_at(sys.chart, p))))

    return Classification(
        holomorphic=holo < tol, abelian=abel < tol, harmonic=harm < tol,
        residuals={"holomorphic": holo, "abelian": abel, "harmonic": harm})


# ---------------------------------------------------------------------------
# level sets


@dataclass
class LevelSetRecord:
    """Sampled CR-type verification of one level set of the gradient map."""

    target: np.ndarray
    points: np.ndarray          # on-level samples found (possibly none)
    rank_gradient: list[int]    # expect k at each sample
    holomorphic_dim: list[int]  # complex dimension of T cap JT, expect n
    note: str = ""

    @property
    def ok(self) -> bool:
        k = len(self.target)
        if len(self.points) == 0:
            return True  # empty level set: pass with note
        return (all(r == k for r in self.rank_gradient)
                and len(set(self.holomorphic_dim)) == 1)


def check_level_set(sys: GradientSystem, V, n_points: int = 8, seed: int = 0,
                    tol: float = 1e-9) -> LevelSetRecord:
    """Find points with U = V by Gauss-Newton from nearby seeds, then check
    that dU has rank k there and the level set's tangent meets its J-rotation
    in a space of complex dimension n."""
    V = np.asarray(V, dtype=float)
    k, N = sys.k, sys.chart.N
    n = N - k
    try:
        seeds = sample_points(sys, max(4 * n_points, 16), seed)
    except SamplingError:
        return LevelSetRecord(V, np.empty((0, sys.chart.dim)), [], [],
                              note="no domain samples")
    found = []
    for p0 in seeds:
        p = np.array(p0)
        ok = False
        for _ in range(60):
            env = env_at(sys.chart, p)
            r = np.array([evaluate(g, env) for g in sys.grads]) - V
            if np.max(np.abs(r)) < 1e-11:
                ok = True
                break
            G, _ = _gradient_matrices(sys, p)
            step, *_ = np.linalg.lstsq(G, -r, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            p = p + step
            if np.max(np.abs(p)) > 50.0:
                break
        if ok and sys.in_domain(p):
            if not any(np.linalg.norm(p - q) < 1e-6 for q in found):
                found.append(p)
        if len(found) >= n_points:
            break
    if not found:
        return LevelSetRecord(V, np.empty((0, sys.chart.dim)), [], [],
                              note="level set appears empty for this target")
    ranks = []
    hdims = []
    for p in found:
        G, _ = _gradient_matrices(sys, p)
        ranks.append(int(np.linalg.matrix_rank(G)))
        T, _ = _nullspace(G)
        J = j_matrix(sys.chart)
        span = np.hstack([T, J @ T])
        inter = 2 * T.shape[1] - int(np.linalg.matrix_rank(span))
        hdims.append(inter // 2)
    note = "" if all(h == n for h in hdims) else \
        f"holomorphic tangent dimension {hdims} differs from {n}"
    return LevelSetRecord(V, np.array(found), ranks, hdims, note=note)


# ---------------------------------------------------------------------------
# normal form


@dataclass(frozen=True)
class GridSpec:
    nx: int = 11
    ny: int = 11
    extent: float = 0.5
    w_extent: float = 0.25
    n_w_samples: int = 4


@dataclass
class NormalForm:
    """Numerically straightened coordinates for a holomorphic abelian system.

    ``F`` tabulates the recovered profile F_a(x, y) = U_a(phi(z, w)) + u_a on
    the slice grid; by construction it must not depend on w, and the
    straightened fields must push to coordinate translations.
    """

    system: str
    base_point: np.ndarray
    slice_pair: int | None      # complex coordinate index spanning the grid
    xs: np.ndarray
    ys: np.ndarray
    F: np.ndarray               # shape (k, nx, ny)
    pushforward_residual: float
    independence_residual: float
    time_cr_residual: float
    phi: object                 # callable ((x, y), w complex k-vector) -> point


def _pick_slice_pairs(sys: GradientSystem, p, n: int) -> list[int]:
    """Greedy pivoted choice of n complex coordinate lines most orthogonal to
    the span of {xi_a(p), J xi_a(p)}."""
    frame = field_matrix(list(sys.fields) + [apply_J(f) for f in sys.fields], p)
    basis = np.linalg.qr(frame)[0]
    dim = sys.chart.dim
    chosen: list[int] = []
    for _ in range(n):
        best, best_score = None, -1.0
        for mu in range(sys.chart.N):
            if mu in chosen:
                continue
            score = 0.0
            for idx in (2 * mu, 2 * mu + 1):
                e = np.zeros(dim)
                e[idx] = 1.0
                r = e - basis @ (basis.T @ e)
                score += float(r @ r)
            if score > best_score:
                best, best_score = mu, score
        chosen.append(best)
        for idx in (2 * best, 2 * best + 1):
            e = np.zeros(dim)
            e[idx] = 1.0
            r = e - basis @ (basis.T @ e)
            nrm = np.linalg.norm(r)
            if nrm > 1e-12:
                basis = np.column_stack([basis, r / nrm])
    return chosen


def normal_form(sys: GradientSystem, p, grid: GridSpec = GridSpec(),
                cfg: FlowConfig = DEFAULT_CONFIG,
                class_tol: float = 1e-8) -> NormalForm:
    """Straighten a holomorphic abelian system near p.

    The commuting flows of xi_a and J xi_a build the coordinate map
    phi(z, w) = G^1_{w_1} ... G^k_{w_k}(slice(z)); in the new coordinates the
    fields become d/dt_a and U_a + u_a collapses to a function F_a of the
    slice variables alone.  Systems that are not holomorphic abelian are
    refused.
    """
    cls = classify(sys, n_points=25, seed=1, tol=class_tol)
    if not (cls.holomorphic and cls.abelian):
        raise NormalFormRefusal(
            f"system {sys.name or '<anonymous>'} is not holomorphic abelian "
            f"(holomorphic={cls.holomorphic}, abelian={cls.abelian}); "
            "no straightening exists")
    p = np.asarray(p, dtype=float)
    k, N = sys.k, sys.chart.N
    n = N - k
    jfields = [apply_J(f) for f in sys.fields]

    pairs = _pick_slice_pairs(sys, p, n) if n > 0 else []
    slice_pair = pairs[0] if pairs else None

    def slice_point(x: float, y: float) -> np.ndarray:
        q = p.copy()
        if slice_pair is not None:
            q[2 * slice_pair] += x
            q[2 * slice_pair + 1] += y
        return q

    def phi(zxy, w) -> np.ndarray:
        q = slice_point(*zxy)
        w = np.asarray(w, dtype=complex)
        for a in reversed(range(k)):
            if w[a].real != 0.0:
                q = flow_real(sys.fields[a], q, float(w[a].real), cfg)
            if w[a].imag != 0.0:
                q = flow_real(jfields[a], q, float(w[a].imag), cfg)
        return q

    def profile(zxy, w) -> np.ndarray:
        q = phi(zxy, w)
        env = env_at(sys.chart, q)
        u = np.array([w[a].imag for a in range(k)])
        return np.array([evaluate(g, env) for g in sys.grads]) + u

    xs = np.linspace(-grid.extent, grid.extent, grid.nx)
    ys = np.linspace(-grid.extent, grid.extent, grid.ny)
    if slice_pair is None:
        xs = np.zeros(1)
        ys = np.zeros(1)
    F = np.empty((k, len(xs), len(ys)))
    w0 = np.zeros(k, dtype=complex)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            F[:, i, j] = profile((x, y), w0)

    # deterministic w samples exercising each flow direction and a mix
    w_samples = []
    for a in range(k):
        w = np.zeros(k, dtype=complex)
        w[a] = complex(grid.w_extent, 0.6 * grid.w_extent)
        w_samples.append(w)
    w_samples.append(np.full(k, complex(0.5 * grid.w_extent, -0.4 * grid.w_extent)))
    w_samples = w_samples[:max(1, grid.n_w_samples)]

    corners = [(xs[0], ys[0]), (xs[-1], ys[0]), (xs[0], ys[-1]),
               (xs[-1], ys[-1]), (xs[len(xs) // 2], ys[len(ys) // 2])]
    corners = list(dict.fromkeys(corners))

    indep = 0.0
    push = 0.0
    timecr = 0.0
    J = j_matrix(sys.chart)
    h = 1e-3
    for zxy in corners:
        base_val = profile(zxy, w0)
        for w in w_samples:
            indep = max(indep, float(np.max(np.abs(profile(zxy, w) - base_val))))
            q = phi(zxy, w)
            for a in range(k):
                e = np.zeros(k, dtype=complex)
                e[a] = h
                dphidt = (phi(zxy, w + e) - phi(zxy, w - e)) / (2 * h)
                push = max(push, float(np.max(np.abs(
                    dphidt - sys.fields[a].values(q)))))
                dphidu = (phi(zxy, w + 1j * e) - phi(zxy, w - 1j * e)) / (2 * h)
                timecr = max(timecr, float(np.max(np.abs(
                    0.5 * (dphidt + J @ dphidu)))))

    return NormalForm(sys.name, p, slice_pair, xs, ys, F,
                      pushforward_residual=push,
                      independence_residual=indep,
                      time_cr_residual=timecr,
                      phi=phi)
