import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from implicit_laws.errors import DimensionError, ParameterDomainError, PropertyViolation
from implicit_laws.models import make_builtin
from implicit_laws.selector import (
    SchemeConfig,
    coercivity_eps,
    estimate_constants,
    graph_distance,
    monotonicity_bound,
    select,
    select_batch,
    selection_curve,
)

SCALAR_MODELS = ["linear", "step-riser", "zigzag", "activated-flux:sigma=1",
                 "activated-gradient:delta=1", "reg-power-sq-inverse:p=3"]
VECTOR_MODELS = ["linear:dim=2", "activated-flux:sigma=1,dim=2", "step-riser:dim=2",
                 "reg-power-sq-inverse:p=3,dim=2", "maxwell-stefan"]


def brute_force(model, scheme, eps, d):
    """Brent root of the scheme's defining scalar equation in j."""
    def g(j, dd):
        return float(model.evaluate(np.array([[j]]), np.array([[dd]]))[0, 0])

    h = {
        "stretch": lambda j: g(j - eps * d, (1 + eps ** 2) * d - eps * j),
        "shear": lambda j: g(j - eps * d, d - eps * j),
        "shift": lambda j: g(j, d) + eps * (j - d),
    }[scheme]
    return brentq(h, -100, 100, xtol=1e-15, rtol=1e-15)


def test_config_validation():
    assert SchemeConfig("a", 0.1).scheme == "stretch"
    assert SchemeConfig("ShearCompose", 0.1).label == "ShearCompose"
    for eps in (0.0, 1.0, 1.5, -0.1):
        with pytest.raises(ParameterDomainError):
            SchemeConfig("stretch", eps)
    with pytest.raises(ParameterDomainError):
        SchemeConfig("yosida", 0.1)


@pytest.mark.parametrize("ident", SCALAR_MODELS + VECTOR_MODELS)
@pytest.mark.parametrize("scheme", ["stretch", "shear"])
def test_zero_gradient_selects_zero_flux(ident, scheme):
    m = make_builtin(ident)
    r = select(m, SchemeConfig(scheme, 0.1), np.zeros((m.N, m.d)))
    assert np.abs(r.J).max() <= 1e-12


def test_linear_closed_forms():
    lin = make_builtin("linear")
    eps = 0.1
    r = select(lin, SchemeConfig("stretch", eps), [[1.0]])
    assert r.J[0, 0] == pytest.approx((1 + eps + eps ** 2) / (1 + eps), abs=1e-12)
    for e in (0.05, 0.3, 0.9):
        assert abs(select(lin, SchemeConfig("shear", e), [[1.0]]).J[0, 0] - 1.0) <= 1e-12
        assert abs(select(lin, SchemeConfig("shift", e), [[1.0]]).J[0, 0] - 1.0) <= 1e-12


def test_step_riser_closed_forms():
    m = make_builtin("step-riser")
    r = select(m, SchemeConfig("stretch", 0.1), [[0.5]])
    assert r.J[0, 0] == pytest.approx(1.05, abs=1e-11)
    assert r.back_point.J[0, 0] == pytest.approx(1.0, abs=1e-11)
    assert r.back_point.D[0, 0] == pytest.approx(0.4, abs=1e-11)
    r = select(m, SchemeConfig("shear", 0.1), [[0.5]])
    assert r.J[0, 0] == pytest.approx(1.05, abs=1e-11)
    assert r.back_point.D[0, 0] == pytest.approx(0.395, abs=1e-11)
    # vertical segment: D = eps*jbar gives jbar = 0.5
    assert select(m, SchemeConfig("stretch", 0.1), [[0.05]]).J[0, 0] == pytest.approx(0.505, abs=1e-11)


@pytest.mark.parametrize("ident", SCALAR_MODELS)
@pytest.mark.parametrize("scheme", ["stretch", "shear", "shift"])
@pytest.mark.parametrize("eps", [0.05, 0.3])
def test_matches_brute_force_root(ident, scheme, eps):
    m = make_builtin(ident)
    cfg = SchemeConfig(scheme, eps)
    for d in np.linspace(-3.3, 3.1, 13):
        got = select(m, cfg, [[d]]).J[0, 0]
        assert got == pytest.approx(brute_force(m, scheme, eps, d), abs=1e-9)


@pytest.mark.parametrize("ident", SCALAR_MODELS + VECTOR_MODELS)
@pytest.mark.parametrize("scheme", ["stretch", "shear"])
def test_back_point_lies_on_the_graph(ident, scheme):
    m = make_builtin(ident)
    rng = np.random.default_rng(3)
    D = rng.uniform(-3, 3, (200, m.N, m.d))
    out = select_batch(m, SchemeConfig(scheme, 0.1), D)
    assert out.converged.all()
    res = m.evaluate(out.back_J, out.back_D)
    assert np.abs(res).max() <= 1e-10


def test_select_checks_shape():
    with pytest.raises(DimensionError):
        select(make_builtin("linear:dim=2"), SchemeConfig("stretch", 0.1), [[1.0]])


def test_continuation_rescues_a_bad_start():
    m = make_builtin("step-riser:dim=2")
    D = np.array([[0.3, -0.2]])
    far = np.array([[1e6, -1e6]])
    r = select(m, SchemeConfig("shear", 0.01), D, guess=far)
    ref = select(m, SchemeConfig("shear", 0.01), D)
    np.testing.assert_allclose(r.J, ref.J, atol=1e-9)


def test_curve_on_identity_graph_is_exact():
    rows = selection_curve(make_builtin("linear"), SchemeConfig("shear", 0.2), -1, 1, 5)
    assert [r.status for r in rows] == ["ok"] * 5
    assert max(abs(r.J - r.d) for r in rows) <= 1e-12


def test_curve_passes_through_origin():
    for scheme in ("stretch", "shear", "shift"):
        rows = selection_curve(make_builtin("zigzag"), SchemeConfig(scheme, 0.1), -3, 3, 601)
        mid = rows[300]
        assert mid.d == 0.0 and abs(mid.J) <= 1e-12


def test_curves_are_deterministic():
    a = selection_curve(make_builtin("zigzag"), SchemeConfig("stretch", 0.3), -3, 3, 101)
    b = selection_curve(make_builtin("zigzag"), SchemeConfig("stretch", 0.3), -3, 3, 101)
    assert [(r.d, r.J) for r in a] == [(r.d, r.J) for r in b]


def test_schemes_differ_on_the_identity_graph():
    lin = make_builtin("linear")
    eps = 0.2
    slopes = [select(lin, SchemeConfig(s, eps), [[1.0]]).J[0, 0] for s in ("stretch", "shear", "shift")]
    assert slopes[0] == pytest.approx((1 + eps + eps ** 2) / (1 + eps), abs=1e-12)
    assert slopes[1] == pytest.approx(1.0, abs=1e-12) and slopes[2] == pytest.approx(1.0, abs=1e-12)


def test_linear_constants_in_closed_form():
    eps = 0.1
    est = estimate_constants(make_builtin("linear"), SchemeConfig("stretch", eps), 500)
    slope = (1 + eps + eps ** 2) / (1 + eps)
    assert est.mono_lower == pytest.approx(slope, rel=1e-9)
    assert est.lip_upper == pytest.approx(slope, rel=1e-9)


def test_zigzag_shear_bound():
    est = estimate_constants(make_builtin("zigzag"), SchemeConfig("shear", 0.3), 2000)
    assert est.mono_lower >= 0.3 / 1.09 * (1 - 1e-6)
    assert est.lip_upper <= (1 + 0.09) / 0.3 * (1 + 1e-6)


def test_bound_increases_below_one_over_root_two():
    eps = np.linspace(0.01, 0.7, 50)
    b = [monotonicity_bound(SchemeConfig("stretch", e)) for e in eps]
    assert np.all(np.diff(b) > 0)
    with pytest.raises(ParameterDomainError):
        monotonicity_bound(SchemeConfig("shift", 0.1))


def test_violation_carries_a_witness():
    # the antimonotone law has a decreasing graph, so the selection cannot be monotone
    with pytest.raises(PropertyViolation) as info:
        estimate_constants(make_builtin("antimonotone"), SchemeConfig("stretch", 0.1), 200)
    assert info.value.witness is not None


@pytest.mark.parametrize("ident", ["linear:dim=2", "step-riser:dim=2", "maxwell-stefan"])
def test_vector_models_keep_the_monotonicity_bound(ident):
    for scheme in ("stretch", "shear"):
        estimate_constants(make_builtin(ident), SchemeConfig(scheme, 0.1), 1000)


def test_coercivity_linear_and_activated():
    fit = coercivity_eps(make_builtin("linear"), SchemeConfig("stretch", 0.3), 500)
    assert fit.worst_margin >= -1e-8 and fit.C1 > 0.2
    fit = coercivity_eps(make_builtin("activated-flux:sigma=1"), SchemeConfig("stretch", 0.3), 500)
    assert fit.worst_margin >= -1e-8 and fit.C2 > 0
    with pytest.raises(ParameterDomainError):
        coercivity_eps(make_builtin("linear"), SchemeConfig("shear", 0.3))


def test_graph_distance_shear_identity_is_exact():
    for eps in (0.3, 0.1, 0.01):
        assert graph_distance(make_builtin("linear"), SchemeConfig("shear", eps)) <= 1e-10


def test_graph_distance_halving_eps_on_the_step():
    m = make_builtin("step-riser")
    d2 = graph_distance(m, SchemeConfig("stretch", 0.2))
    d1 = graph_distance(m, SchemeConfig("stretch", 0.1))
    assert 0.3 <= d1 / d2 <= 0.7


@pytest.mark.parametrize("ident", SCALAR_MODELS)
def test_graph_distance_tiny_eps(ident):
    m = make_builtin(ident)
    rows = selection_curve(m, SchemeConfig("stretch", 1e-4), -3, 3, 601)
    J = np.array([r.J for r in rows])
    diam = np.hypot(6.0, J.max() - J.min())
    assert graph_distance(m, SchemeConfig("stretch", 1e-4)) <= 1e-3 * (1 + diam)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SCALAR_MODELS), st.sampled_from(["stretch", "shear"]),
       st.floats(0.01, 0.9), st.floats(-20, 20), st.floats(-20, 20))
def test_selection_is_monotone_for_any_pair(ident, scheme, eps, d1, d2):
    m = make_builtin(ident)
    cfg = SchemeConfig(scheme, eps)
    J = select_batch(m, cfg, np.array([[[d1]], [[d2]]]), tol=1e-13).J[:, 0, 0]
    if abs(d1 - d2) > 1e-6:
        assert (J[0] - J[1]) * (d1 - d2) >= (1 - 1e-6) * monotonicity_bound(cfg) * (d1 - d2) ** 2 - 1e-11
