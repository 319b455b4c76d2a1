"""Flows of vector fields, matrix exponentials, and complexified flows.

Real flows use classical fixed-step RK4: trajectories here are short and the
reproducibility of residual tables matters more than adaptive speed, so the
step count is a plain config knob.  Complex time is supported on two routes:

* matrix-group data, where the flow of a left-invariant field is the exact
  product g exp(w V) and complex w costs nothing extra, and
* ambient fields whose complexification satisfies the Cauchy-Riemann
  equations in the chart, integrated with complex arithmetic on the N
  holomorphic components.  Holomorphy is the computable sufficient condition
  for the flow to extend; fields that fail it are refused.

Everything is pure: configs are read-only shared data and independent
trajectories or Newton solves can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .expr import Const, Expr, add, evaluate, mul, sub
from .geometry import (
    ComplexChart, ComplexField, VectorField, complexify, env_at,
    _wirtinger_bar_residuals,
)

__all__ = [
    "FlowConfig", "FlowError", "DivergenceError", "HolomorphyError",
    "NewtonError", "EmbeddingError",
    "flow_real", "exp_map", "matrix_exp",
    "MatrixGroupSpec", "complexified_flow_matrix", "left_invariant_fields",
    "flow_complex", "flow_complex_multi",
    "newton_inverse", "numerical_jacobian",
]


class FlowError(RuntimeError):
    """Base class for flow failures."""


class DivergenceError(FlowError):
    """A trajectory left the divergence bound."""


class HolomorphyError(FlowError):
    """A field's complexification fails the Cauchy-Riemann equations."""


class NewtonError(FlowError):
    """The damped Newton inverse failed to converge."""


class EmbeddingError(FlowError):
    """A matrix is not in the embedded coordinate pattern of the group."""


@dataclass(frozen=True)
class FlowConfig:
    """Shared numerical knobs for flows and the construction pipeline."""

    steps_per_unit: int = 256
    max_time: float = 16.0
    divergence_bound: float = 1e6
    holomorphy_tol: float = 1e-8
    fd_step: float = 1e-6
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    construction_tol: float = 1e-8

    def __post_init__(self):
        if self.steps_per_unit < 1:
            raise ValueError("steps_per_unit must be at least 1")

    def with_(self, **kw) -> "FlowConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = FlowConfig()


def _rk4(velocity, state, span, nsteps, bound):
    """Generic fixed-step RK4 over s in [0, span] with divergence guard."""
    h = span / nsteps
    y = state
    for _ in range(nsteps):
        k1 = velocity(y)
        k2 = velocity(y + 0.5 * h * k1)
        k3 = velocity(y + 0.5 * h * k2)
        k4 = velocity(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(y)) > bound:
            raise DivergenceError(f"trajectory exceeded bound {bound:g}")
    return y


def flow_real(V: VectorField, p, t: float, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """The flow of V for time t from p: RK4 solution of dg/ds = V(g)."""
    p = np.asarray(p, dtype=float)
    if abs(t) > cfg.max_time:
        raise FlowError(f"|t| = {abs(t):g} exceeds max_time {cfg.max_time:g}")
    if t == 0.0:
        return p.copy()
    nsteps = max(1, math.ceil(abs(t) * cfg.steps_per_unit))
    return _rk4(V.values, p, t, nsteps, cfg.divergence_bound)


def exp_map(p, V: VectorField, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Exp_p(V): the time-one flow of V from p."""
    return flow_real(V, p, 1.0, cfg)


def matrix_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated Taylor sum.

    After scaling to norm <= 1/2 the series runs to degree 16 (remainder
    below double rounding), terminating early only when a term is exactly
    zero, which makes the result exact for nilpotent input.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix_exp needs a square matrix")
    norm = float(np.linalg.norm(A, 1))
    s = 0
    if norm > 0.5:
        s = max(0, int(math.ceil(math.log2(norm / 0.5))))
    B = A / (2.0 ** s)
    n = A.shape[0]
    out = np.eye(n, dtype=np.result_type(A.dtype, float))
    term = np.eye(n, dtype=out.dtype)
    for j in range(1, 17):
        term = term @ B / j
        if not np.any(term):
            break
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


@dataclass(frozen=True, eq=False)
class MatrixGroupSpec:
    """A matrix Lie group embedded in a chart.

    ``base`` holds the constant entries of the pattern and ``positions``
    lists the (row, col) slot of each complex chart coordinate; a group
    element is base + sum_mu z_mu E_(positions[mu]).  ``basis`` spans the
    real Lie algebra.  The real form sits at y = 0 in the chart.
    """

    chart: ComplexChart
    base: np.ndarray
    positions: tuple[tuple[int, int], ...]
    basis: tuple[np.ndarray, ...]

    def __post_init__(self):
        m = self.base.shape[0]
        if self.base.shape != (m, m):
            raise ValueError("base matrix must be square")
        if len(self.positions) != self.chart.N:
            raise ValueError("one matrix position per complex coordinate")
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("coordinate positions must be distinct")
        flat = np.stack([np.asarray(E, dtype=float).ravel() for E in self.basis])
        if np.linalg.matrix_rank(flat) != len(self.basis):
            raise ValueError("algebra basis matrices must be linearly independent")

    @property
    def k(self) -> int:
        return len(self.basis)

    @property
    def matrix_dim(self) -> int:
        return self.base.shape[0]

    def embed(self, p) -> np.ndarray:
        """Chart point -> complex group matrix."""
        p = np.asarray(p, dtype=float)
        M = np.array(self.base, dtype=complex)
        for mu, (r, c) in enumerate(self.positions):
            M[r, c] = M[r, c] + complex(p[2 * mu], p[2 * mu + 1])
        return M

    def unembed(self, M, tol: float = 1e-9) -> np.ndarray:
        """Complex group matrix -> chart point; rejects off-pattern matrices."""
        M = np.asarray(M, dtype=complex)
        rest = M.copy()
        out = np.empty(self.chart.dim)
        for mu, (r, c) in enumerate(self.positions):
            z = M[r, c] - self.base[r, c]
            out[2 * mu] = z.real
            out[2 * mu + 1] = z.imag
            rest[r, c] = self.base[r, c]
        drift = float(np.max(np.abs(rest - self.base)))
        if drift > tol:
            raise EmbeddingError(
                f"matrix leaves the embedded coordinate pattern (drift {drift:.3e})")
        return out

    def algebra_element(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        total = np.zeros_like(np.asarray(self.base, dtype=complex))
        for c, E in zip(coeffs, self.basis):
            total = total + c * np.asarray(E, dtype=complex)
        return total


def complexified_flow_matrix(spec: MatrixGroupSpec, g, V,
                             cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """The complexified flow on a matrix group: (g, V) -> g exp(sum V_a E_a),
    with V a vector of k complex numbers, mapped back to chart coordinates."""
    M = spec.embed(g) if np.ndim(g) == 1 else np.asarray(g, dtype=complex)
    return spec.unembed(M @ matrix_exp(spec.algebra_element(V)))


def left_invariant_fields(spec: MatrixGroupSpec) -> tuple[VectorField, ...]:
    """Symbolic left-invariant fields of the embedded complex group.

    The velocity of t -> g exp(t E_a) at t = 0 is the matrix g E_a; reading
    its entries at the coordinate positions gives the chart components, which
    are complex-linear in the coordinates, hence holomorphic."""
    chart = spec.chart
    m = spec.matrix_dim
    # symbolic complex entries of the generic group element
    entries: list[list[tuple[Expr, Expr]]] = []
    coord_at = {pos: mu for mu, pos in enumerate(spec.positions)}
    base = np.asarray(spec.base, dtype=complex)
    from .expr import Var
    for r in range(m):
        row = []
        for c in range(m):
            re: Expr = Const(float(base[r, c].real))
            im: Expr = Const(float(base[r, c].imag))
            if (r, c) in coord_at:
                mu = coord_at[(r, c)]
                re = add(re, Var(chart.names[2 * mu]))
                im = add(im, Var(chart.names[2 * mu + 1]))
            row.append((re, im))
        entries.append(row)
    fields = []
    for E in spec.basis:
        E = np.asarray(E, dtype=float)
        comps: list[Expr] = []
        for mu, (r, c) in enumerate(spec.positions):
            re: Expr = Const(0.0)
            im: Expr = Const(0.0)
            for j in range(m):
                if E[j, c] == 0.0:
                    continue
                ere, eim = entries[r][j]
                coeff = Const(float(E[j, c]))
                re = add(re, mul(ere, coeff))
                im = add(im, mul(eim, coeff))
            comps.extend((re, im))
        fields.append(VectorField(chart, tuple(comps)))
    return tuple(fields)


# ---------------------------------------------------------------------------
# complex-time flows of holomorphic fields


class _HolomorphicFrame:
    """Evaluator bundle for complex flows of one or more ambient fields."""

    def __init__(self, fields, cfg: FlowConfig):
        self.chart = fields[0].chart
        self.cfg = cfg
        self.complexified = [complexify(V) for V in fields]
        self.residuals = [_wirtinger_bar_residuals(Z) for Z in self.complexified]

    def check_holomorphy(self, p):
        env = env_at(self.chart, p)
        worst = 0.0
        for res in self.residuals:
            for rr, ii in res:
                worst = max(worst, 0.5 * math.hypot(evaluate(rr, env), evaluate(ii, env)))
        if worst > self.cfg.holomorphy_tol:
            raise HolomorphyError(
                f"field complexification violates the Cauchy-Riemann equations "
                f"(residual {worst:.3e} > {self.cfg.holomorphy_tol:g}); "
                "complex-time flow refused")

    def coefficients(self, zreal) -> np.ndarray:
        env = env_at(self.chart, zreal)
        return np.array([[complex(evaluate(re, env), evaluate(im, env))
                          for re, im in Z.parts] for Z in self.complexified])


def _complex_to_real(z: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(z))
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def _real_to_complex(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[0::2] + 1j * p[1::2]


def flow_complex_multi(fields, p, w, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Flow from p for complex time vector w along holomorphic fields:
    integrates dz/ds = sum_a w_a Z_a(z) over s in [0, 1].

    Holomorphy of every field is checked at the start point and at each
    macro step of the trajectory; the result is holomorphic in w."""
    fields = list(fields)
    w = np.asarray(w, dtype=complex)
    if len(w) != len(fields):
        raise ValueError("one complex time entry per field")
    frame = _HolomorphicFrame(fields, cfg)
    frame.check_holomorphy(p)
    scale = float(np.sum(np.abs(w)))
    if scale > cfg.max_time:
        raise FlowError(f"|w| = {scale:g} exceeds max_time {cfg.max_time:g}")
    z = _real_to_complex(np.asarray(p, dtype=float))
    if scale == 0.0:
        return _complex_to_real(z)
    nsteps = max(1, math.ceil(scale * cfg.steps_per_unit))
    h = 1.0 / nsteps

    def velocity(zz):
        return w @ frame.coefficients(_complex_to_real(zz))

    for _ in range(nsteps):
        k1 = velocity(z)
        k2 = velocity(z + 0.5 * h * k1)
        k3 = velocity(z + 0.5 * h * k2)
        k4 = velocity(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(z)) > cfg.divergence_bound:
            raise DivergenceError(f"trajectory exceeded bound {cfg.divergence_bound:g}")
        frame.check_holomorphy(_complex_to_real(z))
    return _complex_to_real(z)


def flow_complex(V: VectorField, p, w: complex,
                 cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Complex-time flow of a single holomorphically-extendable field."""
    return flow_complex_multi([V], p, [w], cfg)


# ---------------------------------------------------------------------------
# numerical inversion


def numerical_jacobian(F, x, h: float) -> np.ndarray:
    """Central-difference Jacobian of a vector map."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        dx = np.zeros_like(x)
        dx[i] = h
        cols.append((np.asarray(F(x + dx)) - np.asarray(F(x - dx))) / (2.0 * h))
    return np.column_stack(cols)


def newton_inverse(F, target, x0, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Solve F(x) = target by damped Newton with a finite-difference Jacobian.

    Steps are halved (up to ten times) until the residual decreases; failure
    to converge within the iteration budget or a numerically singular
    Jacobian raises NewtonError.
    """
    x = np.asarray(x0, dtype=float).copy()
    target = np.asarray(target, dtype=float)
    res = np.asarray(F(x)) - target
    best = float(np.linalg.norm(res))
    for _ in range(cfg.newton_max_iter):
        if best < cfg.newton_tol:
            return x
        Jm = numerical_jacobian(F, x, cfg.fd_step)
        try:
            step = np.linalg.solve(Jm, -res)
        except np.linalg.LinAlgError:
            raise NewtonError("Jacobian is numerically singular") from None
        lam = 1.0
        for _ in range(10):
            trial = x + lam * step
            try:
                tres = np.asarray(F(trial)) - target
            except (FlowError, ValueError):
                lam *= 0.5
                continue
            tnorm = float(np.linalg.norm(tres))
            if tnorm < best:
                x, res, best = trial, tres, tnorm
                break
            lam *= 0.5
        else:
            raise NewtonError(
                f"no descent step found (residual {best:.3e})")
    if best < cfg.newton_tol:
        return x
    raise NewtonError(
        f"did not converge in {cfg.newton_max_iter} iterations "
        f"(residual {best:.3e})")
