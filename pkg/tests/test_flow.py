"""Flow, matrix exponential and complex-time flow checks, with the exact
matrix product g exp(tV) as the oracle for group flows."""

import math

import numpy as np
import pytest
import scipy.linalg

from cgsys.expr import parse_expr
from cgsys.flow import (
    DivergenceError, FlowConfig, HolomorphyError, MatrixGroupSpec, NewtonError,
    complexified_flow_matrix, exp_map, flow_complex, flow_complex_multi,
    flow_real, left_invariant_fields, matrix_exp, newton_inverse,
)
from cgsys.geometry import ComplexChart, VectorField, j_matrix

CFG = FlowConfig()


@pytest.fixture(scope="module")
def heis_spec():
    chart = ComplexChart.standard(3)
    E1 = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=float)
    E2 = np.array([[0, 0, 0], [0, 0, 1], [0, 0, 0]], dtype=float)
    E3 = np.array([[0, 0, 1], [0, 0, 0], [0, 0, 0]], dtype=float)
    return MatrixGroupSpec(chart, np.eye(3), ((0, 1), (1, 2), (0, 2)), (E1, E2, E3))


@pytest.fixture(scope="module")
def affine_spec():
    chart = ComplexChart.standard(2)
    E1 = np.array([[1, 0], [0, 0]], dtype=float)
    E2 = np.array([[0, 1], [0, 0]], dtype=float)
    base = np.array([[0, 0], [0, 1]], dtype=float)
    return MatrixGroupSpec(chart, base, ((0, 0), (0, 1)), (E1, E2))


def field(chart, comps):
    return VectorField.from_exprs(chart, comps)


# --- real flows --------------------------------------------------------------


def test_flow_constant_field():
    chart = ComplexChart.standard(1)
    V = VectorField.coordinate(chart, "x1")
    out = flow_real(V, [0.0, 0.0], 1.0, CFG)
    assert np.allclose(out, [1.0, 0.0], atol=1e-14)


def test_flow_group_field_matches_matrix_product(heis_spec):
    # flow of L2 from the group point with x1 = 1: oracle g exp(t E2)
    chart = heis_spec.chart
    L2 = field(chart, ["0", "0", "1", "0", "x1", "y1"])
    p = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    got = flow_real(L2, p, 1.0, CFG)
    oracle = heis_spec.unembed(heis_spec.embed(p) @ matrix_exp(heis_spec.basis[1]))
    assert np.allclose(got, oracle, atol=1e-12)
    assert got[2] == pytest.approx(1.0, abs=1e-12)  # x2
    assert got[4] == pytest.approx(1.0, abs=1e-12)  # x3


def test_flow_linear_field_exponential_growth():
    chart = ComplexChart.standard(1)
    V = field(chart, ["x1", "0"])
    out = flow_real(V, [1.0, 0.3], 1.0, CFG)
    assert abs(out[0] - math.e) / math.e < 1e-8


def test_flow_group_law():
    chart = ComplexChart.standard(1)
    V = field(chart, ["x1", "0"])
    rng = np.random.default_rng(0)
    for _ in range(5):
        s, t = rng.uniform(-1, 1, size=2)
        p = np.array([rng.uniform(0.5, 1.5), 0.0])
        once = flow_real(V, p, s + t, CFG)
        twice = flow_real(V, flow_real(V, p, s, CFG), t, CFG)
        assert np.max(np.abs(once - twice)) < 1e-9


def test_flow_divergence_guard():
    chart = ComplexChart.standard(1)
    V = field(chart, ["x1^2", "0"])
    with pytest.raises(DivergenceError):
        flow_real(V, [1.0, 0.0], 2.0, FlowConfig(divergence_bound=1e3))


def test_exp_map_of_zero_field():
    chart = ComplexChart.standard(2)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(exp_map(p, VectorField.zero(chart), CFG), p, atol=0)


def test_exp_map_group_identity_row(heis_spec):
    chart = heis_spec.chart
    L1 = field(chart, ["1", "0", "0", "0", "0", "0"])
    out = exp_map(np.zeros(6), L1, CFG)
    oracle = heis_spec.unembed(matrix_exp(heis_spec.basis[0]))
    assert np.allclose(out, oracle, atol=1e-12)
    assert out[0] == pytest.approx(1.0, abs=1e-12)


def test_exp_map_halving_composition():
    chart = ComplexChart.standard(1)
    V = field(chart, ["sin(x1) + 1", "0"])
    p = np.array([0.2, 0.0])
    half = VectorField.from_exprs(chart, ["(sin(x1) + 1)/2", "0"])
    twice = exp_map(exp_map(p, half, CFG), half, CFG)
    assert np.max(np.abs(twice - exp_map(p, V, CFG))) < 1e-9


# --- matrix exponential -------------------------------------------------------


def test_matrix_exp_zero():
    assert np.array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))


def test_matrix_exp_nilpotent_exact(heis_spec):
    u1, u2, u3 = 0.5, 0.25, 0.125
    A = u1 * heis_spec.basis[0] + u2 * heis_spec.basis[1] + u3 * heis_spec.basis[2]
    E = matrix_exp(A)
    # Taylor terminates: exp = I + A + A^2/2, entry (1,3) = u3 + u1 u2 / 2
    assert E[0, 2] == u3 + u1 * u2 / 2.0
    assert np.array_equal(E, np.eye(3) + A + A @ A / 2.0)


def test_matrix_exp_diagonal():
    E = matrix_exp(np.diag([0.3, -1.7]))
    assert np.allclose(np.diag(E), [math.exp(0.3), math.exp(-1.7)], rtol=1e-15)


def test_matrix_exp_inverse_property():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rng.uniform(-1, 1, size=(4, 4)) + 1j * rng.uniform(-1, 1, size=(4, 4))
        A *= 2.0 / max(np.linalg.norm(A, 1), 1e-9)
        P = matrix_exp(A) @ matrix_exp(-A)
        assert np.max(np.abs(P - np.eye(4))) < 1e-12


def test_matrix_exp_against_scipy():
    rng = np.random.default_rng(2)
    for _ in range(10):
        A = rng.uniform(-2, 2, size=(5, 5)) + 1j * rng.uniform(-2, 2, size=(5, 5))
        assert np.max(np.abs(matrix_exp(A) - scipy.linalg.expm(A))) < 1e-11


# --- matrix-group complexified flow -------------------------------------------


def test_matrix_flow_zero_time(heis_spec):
    g = np.array([0.4, 0.0, -0.7, 0.0, 0.2, 0.0])
    assert np.allclose(complexified_flow_matrix(heis_spec, g, [0, 0, 0]), g, atol=0)


def test_matrix_flow_imaginary_time_frozen(heis_spec):
    a, b, c = 0.3, -0.5, 0.2
    out = complexified_flow_matrix(heis_spec, np.zeros(6), [1j * a, 1j * b, 1j * c])
    # exp(i(aE1+bE2+cE3)) = I + i(aE1+bE2+cE3) - (ab/2) E3
    expect = np.array([0.0, a, 0.0, b, -a * b / 2.0, c])
    assert np.allclose(out, expect, atol=1e-15)


def test_matrix_flow_affine_rotation(affine_spec):
    th = 0.77
    out = complexified_flow_matrix(affine_spec, np.array([1.0, 0.0, 0.0, 0.0]),
                                   [1j * th, 0.0])
    assert out[0] == pytest.approx(math.cos(th), abs=1e-15)
    assert out[1] == pytest.approx(math.sin(th), abs=1e-15)
    assert np.allclose(out[2:], 0.0, atol=1e-15)


def test_group_spec_rejects_dependent_basis():
    chart = ComplexChart.standard(2)
    E1 = np.array([[1, 0], [0, 0]], dtype=float)
    with pytest.raises(ValueError):
        MatrixGroupSpec(chart, np.zeros((2, 2)), ((0, 0), (0, 1)),
                        (E1, 2.0 * E1))


def test_unembed_rejects_off_pattern(heis_spec):
    M = np.eye(3, dtype=complex)
    M[2, 0] = 0.5
    from cgsys.flow import EmbeddingError
    with pytest.raises(EmbeddingError):
        heis_spec.unembed(M)


def test_left_invariant_fields_closed_forms(heis_spec, affine_spec):
    L = left_invariant_fields(heis_spec)
    chart = heis_spec.chart
    expect = [
        field(chart, ["1", "0", "0", "0", "0", "0"]),
        field(chart, ["0", "0", "1", "0", "x1", "y1"]),
        field(chart, ["0", "0", "0", "0", "1", "0"]),
    ]
    rng = np.random.default_rng(3)
    for got, ref in zip(L, expect):
        for p in rng.uniform(-2, 2, size=(5, 6)):
            assert np.allclose(got.values(p), ref.values(p), atol=0)

    La = left_invariant_fields(affine_spec)
    chart2 = affine_spec.chart
    expect2 = [
        field(chart2, ["x1", "y1", "0", "0"]),
        field(chart2, ["0", "0", "x1", "y1"]),
    ]
    for got, ref in zip(La, expect2):
        for p in rng.uniform(-2, 2, size=(5, 4)):
            assert np.allclose(got.values(p), ref.values(p), atol=0)


# --- complex-time flows --------------------------------------------------------


def test_flow_complex_constant_field_imaginary_time():
    chart = ComplexChart.standard(1)
    V = VectorField.coordinate(chart, "x1")
    out = flow_complex(V, [0.0, 0.0], 1j, CFG)
    assert np.allclose(out, [0.0, 1.0], atol=1e-14)


def test_flow_complex_linear_field_rotates():
    chart = ComplexChart.standard(1)
    V = field(chart, ["x1", "y1"])  # coefficient z1, holomorphic
    th = 0.6
    out = flow_complex(V, [1.0, 0.0], 1j * th, CFG)
    assert out[0] == pytest.approx(math.cos(th), abs=1e-10)
    assert out[1] == pytest.approx(math.sin(th), abs=1e-10)


def test_flow_complex_real_time_matches_flow_real(heis_spec):
    L = left_invariant_fields(heis_spec)
    rng = np.random.default_rng(4)
    for _ in range(5):
        p = rng.uniform(-1, 1, size=6)
        t = rng.uniform(-1, 1)
        a = flow_complex(L[1], p, complex(t), CFG)
        b = flow_real(L[1], p, t, CFG) if t != 0 else p
        assert np.max(np.abs(a - b)) < 1e-10


def test_flow_complex_agrees_with_matrix_oracle(heis_spec):
    L = left_invariant_fields(heis_spec)
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = np.zeros(6)
        g[0::2] = rng.uniform(-1, 1, size=3)  # random real group point
        V = rng.uniform(-0.7, 0.7, size=3) + 1j * rng.uniform(-0.7, 0.7, size=3)
        ode = flow_complex_multi(L, g, V, CFG)
        mat = complexified_flow_matrix(heis_spec, g, V)
        assert np.max(np.abs(ode - mat)) < 1e-8


def test_flow_complex_holomorphic_in_time():
    chart = ComplexChart.standard(1)
    V = field(chart, ["x1", "y1"])
    p = np.array([1.0, 0.0])
    J = j_matrix(chart)
    h = 1e-4
    rng = np.random.default_rng(6)
    for _ in range(20):
        w = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        dt = (flow_complex(V, p, w + h, CFG) - flow_complex(V, p, w - h, CFG)) / (2 * h)
        du = (flow_complex(V, p, w + 1j * h, CFG) - flow_complex(V, p, w - 1j * h, CFG)) / (2 * h)
        cr = 0.5 * (dt + J @ du)
        assert np.max(np.abs(cr)) < 1e-6


def test_flow_complex_refuses_non_holomorphic(heis_spec):
    chart = heis_spec.chart
    # the gradient-system representation field has coefficient i y2, which
    # depends on zbar_2: must be refused
    V = field(chart, ["1", "0", "0", "0", "0", "y2"])
    with pytest.raises(HolomorphyError):
        flow_complex(V, np.zeros(6), 1j, CFG)


# --- Newton inversion ----------------------------------------------------------


def test_newton_inverse_quadratic():
    def F(x):
        return np.array([x[0] ** 2 + x[1], x[1] ** 3 - x[0]])

    x = newton_inverse(F, [1.2, -0.3], [1.0, 0.5], CFG)
    assert np.max(np.abs(F(x) - [1.2, -0.3])) < 1e-10


def test_newton_inverse_reports_failure():
    def F(x):
        return np.array([x[0] ** 2])

    with pytest.raises(NewtonError):
        newton_inverse(F, [-1.0], [1.0], FlowConfig(newton_max_iter=8))
