import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acsep import Barrier, Field, Mesh1D, g_functional, integrate, p_laplacian, sup_norm, vp_norm_p
from acsep.grid import face_gradients, inner, p_flux


@pytest.fixture
def mesh3():
    return Mesh1D(length=1.0, n_interior=3)


def test_mesh_geometry(mesh3):
    assert mesh3.spacing == 0.25
    assert np.allclose(mesh3.nodes(), [0.25, 0.5, 0.75])


def test_p_laplacian_hand_values(mesh3):
    u = np.array([0.0, 1.0, 0.0])
    assert np.allclose(p_laplacian(mesh3, 2.0, u), [16.0, -32.0, 16.0])
    assert np.allclose(p_laplacian(mesh3, 4.0, u), [256.0, -512.0, 256.0])
    assert np.all(p_laplacian(mesh3, 3.0, np.zeros(3)) == 0.0)


def test_p_laplacian_requires_p_geq_2(mesh3):
    with pytest.raises(ValueError):
        p_laplacian(mesh3, 1.5, np.zeros(3))


def test_vp_norm_hand_value_and_scaling(mesh3):
    u = np.array([0.0, 1.0, 0.0])
    assert vp_norm_p(mesh3, 2.0, u) == pytest.approx(8.0, rel=1e-14)
    assert vp_norm_p(mesh3, 2.0, np.zeros(3)) == 0.0
    c = -2.37
    for p in (2.0, 3.0, 4.0):
        assert vp_norm_p(mesh3, p, c * u) == pytest.approx(
            abs(c) ** p * vp_norm_p(mesh3, p, u), rel=1e-13)


def test_integrate_hand_values(mesh3):
    assert integrate(mesh3, np.ones(3)) == pytest.approx(0.75, rel=1e-15)
    assert integrate(mesh3, np.zeros(3)) == 0.0


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integrate_linear(a, b):
    mesh = Mesh1D(1.0, 17)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=17), rng.normal(size=17)
    lhs = integrate(mesh, a * f + b * g)
    rhs = a * integrate(mesh, f) + b * integrate(mesh, g)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_g_functional_values(mesh3):
    b = Barrier(3)
    n, h = 64, 1.0 / 65
    mesh = Mesh1D(1.0, n)
    # G(0) = 1 integrated over the interior quadrature cells
    assert g_functional(mesh, b, np.zeros(n)) == pytest.approx(n * h, rel=1e-14)
    assert g_functional(mesh3, b, np.full(3, 0.5)) == pytest.approx(
        0.75 * 0.75**-3, rel=1e-14)


def test_g_functional_sentinel(mesh3):
    b = Barrier(3)
    assert g_functional(mesh3, b, np.array([0.0, 1.0, 0.0])) == np.inf
    assert g_functional(mesh3, b, np.array([0.0, -1.2, 0.0])) == np.inf


def test_sup_norm_examples():
    assert sup_norm(np.zeros(5)) == 0.0
    u = np.array([0.3, -0.9, 0.1])
    assert sup_norm(u) == 0.9
    assert sup_norm(-u) == sup_norm(u)


def test_field_shape_validation(mesh3):
    with pytest.raises(ValueError):
        Field(values=np.zeros(4), mesh=mesh3)


def test_summation_by_parts_exact():
    mesh = Mesh1D(2.0, 41)
    rng = np.random.default_rng(3)
    for p in (2.0, 3.0, 4.0):
        u = rng.normal(size=41)
        v = rng.normal(size=41)
        lhs = mesh.spacing * np.sum(p_laplacian(mesh, p, u) * v)
        rhs = -mesh.spacing * np.sum(
            p_flux(p, face_gradients(mesh, u)) * face_gradients(mesh, v))
        scale = max(abs(lhs), abs(rhs), 1.0)
        assert abs(lhs - rhs) <= 1e-12 * scale


def test_discrete_monotonicity_random_pairs():
    mesh = Mesh1D(1.0, 33)
    rng = np.random.default_rng(11)
    for p in (2.0, 3.0, 4.0):
        u = rng.normal(size=(1000, 33))
        v = rng.normal(size=(1000, 33))
        pair = mesh.spacing * np.sum(
            (-p_laplacian(mesh, p, u) + p_laplacian(mesh, p, v)) * (u - v), axis=-1)
        assert np.all(pair >= -1e-11 * np.maximum(1.0, np.abs(pair)))


def test_p2_reduces_to_second_difference():
    mesh = Mesh1D(1.0, 40)
    h = mesh.spacing
    A = (np.diag(-2.0 * np.ones(40)) + np.diag(np.ones(39), 1)
         + np.diag(np.ones(39), -1)) / h**2
    rng = np.random.default_rng(5)
    u = rng.normal(size=40)
    lap = p_laplacian(mesh, 2.0, u)
    ref = A @ u
    assert np.max(np.abs(lap - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_inner_product_is_h_weighted():
    mesh = Mesh1D(1.0, 9)
    f = np.arange(9.0)
    assert inner(mesh, f, f) == pytest.approx(mesh.spacing * np.sum(f * f), rel=1e-15)


def test_batched_operations_match_per_row():
    mesh = Mesh1D(1.5, 21)
    rng = np.random.default_rng(9)
    batch = rng.normal(size=(7, 21))
    lap_b = p_laplacian(mesh, 3.0, batch)
    for i in range(7):
        assert np.array_equal(lap_b[i], p_laplacian(mesh, 3.0, batch[i]))
    assert np.array_equal(vp_norm_p(mesh, 3.0, batch),
                          np.array([vp_norm_p(mesh, 3.0, row) for row in batch]))
