import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from implicit_laws.errors import DimensionError, ParameterDomainError, RootNotBracketedError
from implicit_laws.models import (
    BUILTIN_IDS,
    ModelKind,
    TensorPair,
    eval_residual,
    fd_jacobians,
    jacobians,
    make_builtin,
    maxwell_stefan_B,
    null_curve_scalar,
    null_curve_scalar_in_d,
    step_profile,
    zigzag_polyline,
)

CATALOGUE = [
    "linear", "linear:dim=2", "powerlaw:p=3", "powerlaw:p=1.5", "powerlaw-inverse:p=1.5",
    "reg-power-add:p=3", "reg-power-add-inverse:p=3", "reg-power-sq:p=3", "reg-power-sq-inverse:p=3",
    "reg-power-sq:p=1.5,dim=2", "activated-gradient:delta=1", "activated-flux:sigma=1",
    "activated-flux:sigma=0.5,dim=3", "step-riser", "step-riser:dim=2", "zigzag", "maxwell-stefan",
    "maxwell-stefan:dim=2",
]


def scalar(model, j, d):
    return float(eval_residual(model, TensorPair([[j]], [[d]]))[0, 0])


@pytest.mark.parametrize("ident", CATALOGUE)
def test_origin_is_exact_null_point(ident):
    m = make_builtin(ident)
    z = np.zeros((m.N, m.d))
    assert np.all(m.evaluate(z, z) == 0.0)


def test_examples_from_the_catalogue():
    assert scalar(make_builtin("linear"), 0.0, 0.0) == 0.0
    assert scalar(make_builtin("activated-flux:sigma=1"), 2.0, 1.0) == 0.0
    assert scalar(make_builtin("step-riser"), 1.0, 0.5) == 0.0
    assert scalar(make_builtin("linear"), 1.0, 0.5) == 0.5
    assert scalar(make_builtin("reg-power-sq:p=2"), 3.0, 1.0) == pytest.approx(2.0, abs=1e-15)
    assert scalar(make_builtin("powerlaw-inverse:p=1.5"), 2.0, 4.0) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("bad", ["powerlaw:p=1", "powerlaw:p=0.5", "activated-flux:sigma=0",
                                 "activated-gradient:delta=-1", "nosuch", "linear:q=2", "powerlaw"])
def test_invalid_parameters_are_rejected(bad):
    with pytest.raises(ParameterDomainError):
        make_builtin(bad)


def test_shape_mismatch_is_a_dimension_error():
    m = make_builtin("linear:dim=2")
    with pytest.raises(DimensionError):
        eval_residual(m, TensorPair([[1.0]], [[1.0]]))
    with pytest.raises(DimensionError):
        TensorPair(np.zeros((2, 2)), np.zeros((2, 1)))


def test_linear_jacobians_are_plus_minus_identity():
    GJ, GD = jacobians(make_builtin("linear:dim=3"), TensorPair(np.ones((1, 3)), np.zeros((1, 3))))
    assert np.array_equal(GJ, np.eye(3))
    assert np.array_equal(GD, -np.eye(3))


def test_regularised_inverse_jacobian_matches_closed_form():
    p = 3.0
    q = p / (p - 1)
    j = np.array([[0.7, -1.3]])
    GJ, _ = jacobians(make_builtin(f"reg-power-sq-inverse:p={p},dim=2"), TensorPair(j, np.zeros_like(j)))
    v = j.ravel()
    r2 = v @ v
    expected = (1 + r2) ** ((q - 2) / 2) * np.eye(2) + (q - 2) * (1 + r2) ** ((q - 4) / 2) * np.outer(v, v)
    np.testing.assert_allclose(GJ, expected, rtol=1e-13)


def test_activated_flux_inactive_region_jacobians():
    m = make_builtin("activated-flux:sigma=1")
    GJ, GD = jacobians(m, TensorPair([[0.4]], [[0.0]]))
    assert GJ[0, 0] == 0.0 and GD[0, 0] == -1.0
    fJ, fD = fd_jacobians(m, np.array([[0.4]]), np.array([[0.0]]))
    assert abs(fJ[0, 0]) < 1e-8 and abs(fD[0, 0] + 1) < 1e-8


@pytest.mark.parametrize("ident", [i for i in CATALOGUE if i not in ("zigzag",)])
def test_analytic_jacobians_match_central_differences(ident):
    m = make_builtin(ident)
    assert m.jacobian is not None
    rng = np.random.default_rng(7)
    shape = (100, m.N, m.d)
    J = rng.uniform(-3, 3, shape)
    D = rng.uniform(-3, 3, shape)
    if m.kink_distance is not None:
        keep = m.kink_distance(J, D) >= 1e-3
        J, D = J[keep], D[keep]
    aJ, aD = m.jacobian(J, D)
    fJ, fD = fd_jacobians(m, J, D)
    for a, f in ((aJ, fJ), (aD, fD)):
        scale = np.maximum(1.0, np.abs(a).max(axis=(-2, -1), keepdims=True))
        assert np.max(np.abs(a - f) / scale) < 1e-5


def test_flattening_is_row_major_over_component_then_direction():
    m = make_builtin("maxwell-stefan:dim=2")
    GJ, _ = jacobians(m, TensorPair(np.zeros((3, 2)), np.zeros((3, 2))))
    B, _ = maxwell_stefan_B(np.array([[1, 1, 2], [1, 1, 3], [2, 3, 1.0]]), np.full(3, 1 / 3))
    np.testing.assert_allclose(GJ, np.kron(B, np.eye(2)), atol=1e-15)


def test_null_curve_examples():
    lin = make_builtin("linear")
    assert null_curve_scalar(lin, [0.7])[0][0] == pytest.approx(0.7, abs=1e-12)
    assert null_curve_scalar(make_builtin("step-riser"), [2.0])[0][0] == pytest.approx(2.0, abs=1e-12)
    d = null_curve_scalar_in_d(make_builtin("activated-gradient:delta=1"), [1.0])[0][1]
    assert d == pytest.approx(2.0, abs=1e-12)


def test_unbracketed_root_names_the_offending_value():
    with pytest.raises(RootNotBracketedError) as info:
        null_curve_scalar(make_builtin("linear"), [0.5, 20.0], (-10.0, 10.0))
    assert info.value.value == 20.0


def test_step_riser_null_set_follows_the_explicit_law():
    m = make_builtin("step-riser")
    d = np.array([0.05, 0.3, 0.9, 1.0, 1.7, -0.4, -2.5])
    got = np.array([j for j, _ in null_curve_scalar(m, d)])
    np.testing.assert_allclose(got, np.maximum(1.0, 1.0 / np.abs(d)) * d, atol=1e-11)
    assert step_profile(0.0) == 1.0 and step_profile(2.0) == 0.0


def test_zigzag_staircase():
    m = make_builtin("zigzag")
    d = np.array([0.0, 0.5, 1.5, 2.5, -0.5, 0.25, -1.75])
    got = np.array([j for j, _ in null_curve_scalar(m, d)])
    np.testing.assert_allclose(got, np.sign(d) * np.ceil(np.abs(d)), atol=1e-11)
    dd, jj = zigzag_polyline(-3, 3, 601)
    res = m.evaluate(jj.reshape(-1, 1, 1), dd.reshape(-1, 1, 1))
    assert np.abs(res).max() < 1e-12


def test_maxwell_stefan_two_species():
    B, eig = maxwell_stefan_B(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    np.testing.assert_allclose(B, [[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_allclose(eig, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(B @ np.ones(2), 0.0, atol=1e-15)


def test_maxwell_stefan_rejects_bad_weights():
    with pytest.raises(ParameterDomainError):
        maxwell_stefan_B(np.ones((2, 2)), np.array([0.5, 0.6]))
    with pytest.raises(ParameterDomainError):
        maxwell_stefan_B(np.array([[1, -1], [-1, 1.0]]), np.array([0.5, 0.5]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 31 - 1))
def test_maxwell_stefan_spectrum_is_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 5.0, (n, n))
    A = A + A.T
    u = rng.uniform(0.05, 1.0, n)
    u /= u.sum()
    B, eig = maxwell_stefan_B(A, u)
    assert eig[0] >= -1e-10
    # columns sum to zero and the weight vector spans the kernel
    np.testing.assert_allclose(np.ones(n) @ B, 0.0, atol=1e-12)
    np.testing.assert_allclose(B @ u, 0.0, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(B).real), eig, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.1, 6.0), st.floats(-50, 50))
def test_power_law_and_its_inverse_share_a_null_set(p, d):
    fwd = make_builtin("powerlaw", p=p)
    inv = make_builtin("powerlaw-inverse", p=p)
    j = fwd.explicit_flux(np.array([[d]]))
    assert abs(scalar(fwd, j[0, 0], d)) <= 1e-9 * (1 + abs(j[0, 0]))
    back = inv.explicit_gradient(j)
    assert back[0, 0] == pytest.approx(d, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("ident", ["linear", "step-riser", "zigzag", "activated-flux:sigma=1",
                                   "activated-gradient:delta=1", "reg-power-sq-inverse:p=3"])
def test_sampled_null_points_are_pairwise_monotone(ident):
    m = make_builtin(ident)
    rng = np.random.default_rng(1)
    pts = null_curve_scalar(m, rng.uniform(-4, 4, 100), (-20, 20))
    j = np.array([a for a, _ in pts])
    d = np.array([b for _, b in pts])
    assert np.min(np.subtract.outer(j, j) * np.subtract.outer(d, d)) >= -1e-10


def test_model_ids_round_trip():
    for ident in ["powerlaw:p=3", "activated-flux:sigma=1", "maxwell-stefan:u=0.2/0.3/0.5"]:
        assert str(ModelKind.parse(ident)) == ident
    assert "zigzag" in BUILTIN_IDS


def test_negation_keeps_the_null_set():
    m = make_builtin("step-riser")
    n = m.negated()
    assert n.evaluate([[1.0]], [[0.5]])[0, 0] == 0.0
    GJ, GD = jacobians(n, TensorPair([[3.0]], [[1.0]]))
    assert GJ[0, 0] == -1.0 and GD[0, 0] == 1.0
