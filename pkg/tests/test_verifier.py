import numpy as np
import pytest

from implicit_laws.models import ConstitutiveModel, make_builtin
from implicit_laws.verifier import (
    SampleSpec,
    check_G1,
    check_G2,
    check_G3,
    check_G4,
    check_pairwise,
    orientation,
    verify_model,
)

CORE = ["linear", "reg-power-sq-inverse:p=3", "activated-flux:sigma=1", "step-riser", "zigzag",
        "activated-gradient:delta=1"]


@pytest.fixture(scope="module")
def reports():
    return {ident: verify_model(make_builtin(ident)) for ident in CORE + ["maxwell-stefan"]}


@pytest.mark.parametrize("ident", CORE)
def test_core_models_pass_every_condition(reports, ident):
    rep = reports[ident]
    assert rep.all_passed(), rep.table()
    assert rep.orientation == "+G"
    assert rep.empirical_c1 > 0


def test_maxwell_stefan_fails_plain_coercivity_only(reports):
    rep = reports["maxwell-stefan"]
    for c in ("G1", "G2", "G3", "G4-range", "pairwise"):
        assert rep.passed(c), rep.table()
    assert not rep.passed("G4")
    assert rep.entries["G4"].witness is not None


def test_linear_lipschitz_and_margins():
    e = check_G1(make_builtin("linear"))
    assert e.passed and e.value == pytest.approx(np.sqrt(2), rel=1e-3)
    g2 = check_G2(make_builtin("linear"))
    assert g2.passed
    sub = [float(v) for v in g2.detail.split("[")[1].split("]")[0].split()]
    np.testing.assert_allclose(sub, [1 + 1e-8, 1 + 1e-8, 2 - 1e-10 * 2, 1 + 1e-8], rtol=1e-6)


def test_quadratic_fails_lipschitz_stability():
    e = check_G1(make_builtin("quadratic"))
    assert not e.passed and e.witness is not None


def test_antimonotone_fails_sign_rules_and_pairing():
    m = make_builtin("antimonotone")
    assert not check_G2(m).passed
    assert not check_G2(m.negated()).passed
    e = check_pairwise(m)
    assert not e.passed
    a, b = e.witness
    assert float(((a.J - b.J) * (a.D - b.D)).sum()) < 0


def test_zero_model_fails_the_growth_probe():
    assert not check_G3(make_builtin("zero")).passed


def test_growth_alternatives_reported():
    assert "gradient-ray" in check_G3(make_builtin("activated-flux:sigma=1")).detail
    assert "flux-ray" in check_G3(make_builtin("linear")).detail


def test_step_riser_flat_region_has_zero_eigenvalue():
    e = check_G2(make_builtin("step-riser"))
    sub = [float(v) for v in e.detail.split("[")[1].split("]")[0].split()]
    assert e.passed and sub[0] == pytest.approx(1e-8, abs=1e-12)


def test_linear_coercivity_constants_attached():
    plain, ranged, (c1, c2) = check_G4(make_builtin("linear"))
    assert plain.passed and ranged.passed
    assert (c1, c2) == (0.5, 0.0)


@pytest.mark.parametrize("ident", ["step-riser", "zigzag", "activated-flux:sigma=1"])
def test_negation_flips_orientation_only(ident):
    m = make_builtin(ident)
    rep = verify_model(m.negated())
    assert rep.orientation == "-G"
    assert rep.all_passed(), rep.table()
    # the product condition does not see the sign of G
    assert check_G2(m.negated()).detail.split("]")[0].split()[-1] == check_G2(m).detail.split("]")[0].split()[-1]


def test_reports_are_deterministic():
    a = verify_model(make_builtin("zigzag"), SampleSpec(seed=5))
    b = verify_model(make_builtin("zigzag"), SampleSpec(seed=5))
    assert [(e.condition, e.passed, e.worst_margin) for e in a.entries.values()] == \
           [(e.condition, e.passed, e.worst_margin) for e in b.entries.values()]


def test_user_model_needing_negation():
    # d - j describes the identity graph with the opposite sign
    m = ConstitutiveModel("flipped", 1, 1, 2.0, lambda J, D: D - J)
    assert orientation(m) == "-G"
    assert verify_model(m).all_passed()


def test_sample_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(radius_min=1.0, radius_max=0.5)
    with pytest.raises(ValueError):
        SampleSpec(ray_radii=(1.0, 1.0))
