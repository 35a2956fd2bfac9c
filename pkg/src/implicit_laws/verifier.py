"""Sampling-based audit of a constitutive model against the structural conditions.

G1  G is Lipschitz and vanishes at the origin.
G2  G_J >= 0, G_D <= 0, G_J - G_D > 0 and -G_D G_J^T >= 0 (symmetric parts).
G3  G:J -> +inf along |J| -> inf, or G:D -> -inf along |D| -> inf.
G4  J:D >= c1 (|J|^p' + |D|^p) - c2 on the null set.
pairwise  (J1 - J2):(D1 - D2) >= 0 for null points.

Every check is a falsifier on finite samples; passing is evidence, not proof.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import RootNotBracketedError
from .models import ConstitutiveModel, TensorPair, jacobians, null_curve_scalar, null_curve_scalar_in_d
from .selector import SchemeConfig, select_batch

PSD_TOL = 1e-8
DEFINITE_FLOOR = 1e-10
PAIRWISE_TOL = 1e-10
G1_ORIGIN_TOL = 1e-14
G1_GROWTH_LIMIT = 10.0
G4_EPS = 1e-4
G4_FLOOR = 1e-6
G4_SPREAD = 10.0
KINK_BAND = 1e-3

REQUIRED = ("G1", "G2", "G3", "G4", "pairwise")


@dataclass(frozen=True)
class SampleSpec:
    count: int = 400
    radius_min: float = 1e-2
    radius_max: float = 1e2
    ray_count: int = 16
    ray_radii: tuple = tuple(np.geomspace(1e2, 1e6, 9))
    seed: int = 0
    null_count: int = 1000
    shells: int = 9

    def __post_init__(self):
        if self.count < 1 or self.ray_count < 1 or self.null_count < 1:
            raise ValueError("sample counts must be positive")
        if not (0 < self.radius_min < self.radius_max):
            raise ValueError("need 0 < radius_min < radius_max")
        if len(self.ray_radii) < 2 or np.any(np.diff(self.ray_radii) <= 0):
            raise ValueError("ray_radii must be strictly increasing with at least two entries")


@dataclass
class ConditionEntry:
    condition: str
    passed: bool
    worst_margin: float
    witness: Optional[TensorPair] = None
    detail: str = ""
    value: Optional[float] = None


@dataclass
class ConditionReport:
    model: str
    entries: dict = field(default_factory=dict)
    empirical_c1: Optional[float] = None
    empirical_c2: Optional[float] = None
    orientation: str = "+G"
    notes: list = field(default_factory=list)

    def add(self, entry: ConditionEntry):
        self.entries[entry.condition] = entry

    def passed(self, condition: str) -> bool:
        return self.entries[condition].passed

    def all_passed(self, required=REQUIRED) -> bool:
        return all(self.entries[c].passed for c in required if c in self.entries)

    def failures(self, required=REQUIRED) -> list:
        return [c for c in required if c in self.entries and not self.entries[c].passed]

    def table(self) -> str:
        lines = [f"model {self.model}  orientation {self.orientation}"]
        for e in self.entries.values():
            mark = "pass" if e.passed else "FAIL"
            lines.append(f"  {e.condition:<9} {mark}  margin {e.worst_margin: .3e}  {e.detail}")
        if self.empirical_c1 is not None:
            lines.append(f"  c1 {self.empirical_c1:.6g}  c2 {self.empirical_c2:.6g}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _shell_points(model, spec, rng, radii=None):
    """Random (J, D) with |(J, D)| on log-spaced shells; returns J, D, radius."""
    shape = (model.N, model.d)
    if radii is None:
        shells = np.geomspace(spec.radius_min, spec.radius_max, spec.shells)
        radii = np.repeat(shells, int(np.ceil(spec.count / spec.shells)))
    z = rng.standard_normal((len(radii), 2) + shape)
    z /= np.sqrt(np.sum(z * z, axis=(1, 2, 3), keepdims=True))
    z *= radii[:, None, None, None]
    return z[:, 0], z[:, 1], radii


def _frob(x):
    return np.sqrt(np.sum(x * x, axis=(-2, -1)))


def _pair(J, D, k):
    if len(J) == 0:
        return None
    return TensorPair(np.array(J[k]), np.array(D[k]))


def check_G1(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> ConditionEntry:
    rng = np.random.default_rng(spec.seed)
    zero = np.zeros((model.N, model.d))
    g0 = float(np.abs(model.evaluate(zero, zero)).max())
    J, D, radii = _shell_points(model, spec, rng)
    dJ, dD, _ = _shell_points(model, spec, rng, radii=np.ones(len(radii)))
    rho = 10.0 ** rng.uniform(-3, 0, len(radii)) * radii
    J2 = J + rho[:, None, None] * dJ
    D2 = D + rho[:, None, None] * dD
    num = _frob(model.evaluate(J, D) - model.evaluate(J2, D2))
    den = np.sqrt(_frob(J - J2) ** 2 + _frob(D - D2) ** 2)
    q = num / den
    shells = np.unique(radii)
    per_shell = np.array([q[radii == r].max() for r in shells])
    finite = bool(np.all(np.isfinite(per_shell)))
    growth = float(per_shell[-1] / max(per_shell[0], 1e-300)) if finite else np.inf
    k = int(np.nanargmax(q))
    passed = g0 <= G1_ORIGIN_TOL and finite and growth < G1_GROWTH_LIMIT
    margin = min(G1_ORIGIN_TOL - g0, G1_GROWTH_LIMIT - growth)
    return ConditionEntry("G1", passed, float(margin), _pair(J, D, k),
                          f"|G(0,0)|={g0:.1e} lipschitz={per_shell.max():.6g} shell growth={growth:.3g}",
                          float(per_shell.max()))


def _sym_min_eig(M):
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))[..., 0]


def _g2_margins(model, J, D):
    GJ, GD = jacobians(model, J, D)
    diff = GJ - GD
    scale = np.maximum(1.0, np.linalg.norm(diff, axis=(-2, -1)))
    return np.stack([
        _sym_min_eig(GJ) + PSD_TOL,
        _sym_min_eig(-GD) + PSD_TOL,
        _sym_min_eig(diff) - DEFINITE_FLOOR * scale,
        _sym_min_eig(-GD @ np.swapaxes(GJ, -1, -2)) + PSD_TOL,
    ], axis=-1)


def _g2_samples(model, spec):
    rng = np.random.default_rng(spec.seed + 1)
    J, D, _ = _shell_points(model, spec, rng)
    skipped = 0
    if model.kink_distance is not None:
        keep = model.kink_distance(J, D) >= KINK_BAND
        skipped = int((~keep).sum())
        J, D = J[keep], D[keep]
    return J, D, skipped


def check_G2(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> ConditionEntry:
    J, D, skipped = _g2_samples(model, spec)
    m = _g2_margins(model, J, D)
    worst = m.min(axis=0)
    k = int(np.argmin(m.min(axis=1)))
    parts = " ".join(f"{w:.3g}" for w in worst)
    return ConditionEntry("G2", bool(np.all(worst >= 0)), float(worst.min()), _pair(J, D, k),
                          f"sub-margins [{parts}] kink-skipped={skipped}")


def orientation(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> str:
    """'+G' if G itself satisfies the sign rules of G2, '-G' if only -G does."""
    if check_G2(model, spec).passed:
        return "+G"
    if check_G2(model.negated(), spec).passed:
        return "-G"
    return "+G"


def check_G3(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> ConditionEntry:
    rng = np.random.default_rng(spec.seed + 2)
    shape = (model.N, model.d)
    n = spec.ray_count
    fixed = rng.standard_normal((n,) + shape)
    w = rng.standard_normal((n,) + shape)
    w /= _frob(w)[:, None, None]
    top = np.asarray(spec.ray_radii[-2:], dtype=float)
    vals_j, vals_d = [], []
    for r in top:
        J = r * w
        vals_j.append(np.sum(model.evaluate(J, fixed) * J, axis=(-2, -1)) / r ** 2)
        D = r * w
        vals_d.append(-np.sum(model.evaluate(fixed, D) * D, axis=(-2, -1)) / r ** 2)
    mj = float(np.min(vals_j))
    md = float(np.min(vals_d))
    passed_j, passed_d = mj > 0, md > 0
    which = [name for name, ok in (("flux-ray", passed_j), ("gradient-ray", passed_d)) if ok]
    k = int(np.argmin(vals_j[-1] if mj >= md else vals_d[-1]))
    witness = TensorPair(top[-1] * w[k], fixed[k]) if mj >= md else TensorPair(fixed[k], top[-1] * w[k])
    return ConditionEntry("G3", passed_j or passed_d, max(mj, md), witness,
                          "alternative: " + ("+".join(which) if which else "none"))


def _null_points(model, spec):
    """Null points of G from stretch-selection back points at a tiny epsilon."""
    rng = np.random.default_rng(spec.seed + 3)
    radii = np.geomspace(spec.radius_min, spec.radius_max, spec.null_count)
    _, D, _ = _shell_points(model, spec, rng, radii=radii)
    out = select_batch(model, SchemeConfig("stretch", G4_EPS), D)
    ok = out.converged
    return out.back_J[ok], out.back_D[ok], int((~ok).sum())


def _fit(ratio, radius, spec):
    if ratio.size == 0:
        return -np.inf, np.inf
    c_all = float(ratio.min())
    inner = radius <= np.sqrt(spec.radius_min * spec.radius_max)
    c_inner = float(ratio[inner].min()) if inner.any() else c_all
    spread = c_inner / c_all if c_all > 0 else np.inf
    return c_all, spread


def check_G4(model: ConstitutiveModel, spec: SampleSpec = SampleSpec(), null_points=None):
    """Returns (plain entry, range-restricted entry)."""
    J, D, skipped = _null_points(model, spec) if null_points is None else (*null_points, 0)
    nJ, nD = _frob(J), _frob(D)
    JD = np.sum(J * D, axis=(-2, -1))
    growth = nJ ** model.p_conjugate + nD ** model.p
    radius = np.sqrt(nJ ** 2 + nD ** 2)
    pos = growth > 0
    if model.coercivity_c1 is not None:
        c1, c2 = model.coercivity_c1, model.coercivity_c2 or 0.0
        margins = (JD - c1 * growth + c2) / (1 + growth)
        worst = float(margins.min()) if margins.size else -np.inf
        k = int(np.argmin(margins)) if margins.size else 0
        plain = ConditionEntry("G4", worst >= -PSD_TOL, worst, _pair(J, D, k),
                               f"attached c1={c1:g} c2={c2:g} skipped={skipped}", c1)
    else:
        c2 = 1.0
        ratio = (JD[pos] + c2) / growth[pos]
        c1, spread = _fit(ratio, radius[pos], spec)
        k = int(np.flatnonzero(pos)[np.argmin(ratio)]) if ratio.size else 0
        passed = c1 >= G4_FLOOR and spread < G4_SPREAD
        plain = ConditionEntry("G4", passed, c1 - G4_FLOOR, _pair(J, D, k),
                               f"fitted c1={c1:.6g} (c2=1) spread={spread:.3g} skipped={skipped}", c1)
    dpos = nD > 0
    ratio = JD[dpos] / nD[dpos] ** 2
    c, spread = _fit(ratio, radius[dpos], spec)
    k = int(np.flatnonzero(dpos)[np.argmin(ratio)]) if ratio.size else 0
    ranged = ConditionEntry("G4-range", c >= G4_FLOOR and spread < G4_SPREAD, c - G4_FLOOR, _pair(J, D, k),
                            f"J:D >= c|D|^2 with c={c:.6g} spread={spread:.3g}", c)
    return plain, ranged, (c1 if plain.passed else None, c2 if plain.passed else None)


def _bracketed(g, grid, lo, hi):
    return (np.sign(g(np.full_like(grid, lo), grid)) * np.sign(g(np.full_like(grid, hi), grid))) <= 0


def _scalar_null_points(model, half_width=4.0, count=101, bracket=(-10.0, 10.0)):
    grid = np.linspace(-half_width, half_width, count)
    pts = []

    def g_of_j(j, d):
        return model.evaluate(j.reshape(-1, 1, 1), d.reshape(-1, 1, 1)).ravel()

    def g_of_d(d, j):
        return g_of_j(j, d)

    ok = _bracketed(g_of_j, grid, *bracket)
    if ok.any():
        pts += null_curve_scalar(model, grid[ok], bracket)
    ok = _bracketed(g_of_d, grid, *bracket)
    if ok.any():
        pts += null_curve_scalar_in_d(model, grid[ok], bracket)
    return np.array(pts, dtype=float).reshape(-1, 2)


def check_pairwise(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> ConditionEntry:
    if model.is_scalar:
        try:
            pts = _scalar_null_points(model)
        except RootNotBracketedError as exc:
            return ConditionEntry("pairwise", False, -np.inf, None, str(exc))
        J = pts[:, 0].reshape(-1, 1, 1)
        D = pts[:, 1].reshape(-1, 1, 1)
    else:
        J, D, _ = _null_points(model, SampleSpec(null_count=300, seed=spec.seed,
                                                 radius_min=spec.radius_min, radius_max=spec.radius_max))
    if len(J) < 2:
        return ConditionEntry("pairwise", True, 0.0, None, "fewer than two null points found")
    fJ = J.reshape(len(J), -1)
    fD = D.reshape(len(D), -1)
    prod = ((fJ[:, None] - fJ[None]) * (fD[:, None] - fD[None])).sum(-1)
    np.fill_diagonal(prod, np.inf)
    a, b = np.unravel_index(np.argmin(prod), prod.shape)
    worst = float(prod[a, b])
    witness = (TensorPair(J[a], D[a]), TensorPair(J[b], D[b]))
    return ConditionEntry("pairwise", worst >= -PAIRWISE_TOL, worst + PAIRWISE_TOL, witness,
                          f"{len(J)} null points")


def verify_model(model: ConstitutiveModel, spec: SampleSpec = SampleSpec()) -> ConditionReport:
    report = ConditionReport(model.name)
    report.orientation = orientation(model, spec)
    oriented = model if report.orientation == "+G" else model.negated()
    report.add(check_G1(model, spec))
    report.add(check_G2(oriented, spec))
    report.add(check_G3(oriented, spec))
    plain, ranged, (c1, c2) = check_G4(oriented, spec)
    report.add(plain)
    report.add(ranged)
    report.empirical_c1, report.empirical_c2 = c1, c2
    report.add(check_pairwise(oriented, spec))
    if model.kink_distance is not None:
        report.notes.append(f"derivative checks skip points within {KINK_BAND:g} of a kink")
    report.notes.append("G3 probes finite radii only; it can refute but not prove the limit")
    return report
