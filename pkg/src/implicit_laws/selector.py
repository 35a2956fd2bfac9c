"""Single-valued epsilon-approximations J*_eps(D) of an implicit law.

Three schemes are available:

``stretch``
    Shift the graph along D by eps*J, then along J by eps*D.  Solved for the
    underlying graph point Jbar from G(Jbar, D - eps Jbar) = 0, giving
    J = Jbar + eps D.
``shear``
    Null points of G(J - eps D, D - eps J), solved directly for J.
``shift``
    Null points of G(J, D) + sign*eps*(J - D).  Only used for curve
    comparisons; no coercivity is available for it.

For every scheme the unknown enters through a map whose derivative is
``G_J - eps G_D`` (or ``G_J + eps I``), positive definite under the
structural conditions, so a damped Newton iteration is well posed.
Scalar problems additionally keep a sign bracket and fall back to bisection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, ParameterDomainError, PropertyViolation, SelectionFailure
from .models import ConstitutiveModel, TensorPair, jacobians, null_curve_scalar

SCHEME_NAMES = {"stretch": "StretchGraph", "shear": "ShearCompose", "shift": "LinearShift"}
_ALIASES = {
    "a": "stretch", "b": "shear", "c": "shift",
    "stretchgraph": "stretch", "shearcompose": "shear", "linearshift": "shift",
}

NEWTON_TOL = 1e-11
NEWTON_MAX = 100
ARMIJO_C = 1e-4
MIN_STEP = 2.0 ** -30
CONTINUATION_STEPS = 8


def scheme_key(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in SCHEME_NAMES:
        raise ParameterDomainError(f"unknown scheme {name!r}; use stretch|shear|shift (or a|b|c)")
    return key


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    epsilon: float
    # orientation of the shift scheme: +1 when G_J >= 0, -1 otherwise
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", scheme_key(self.scheme))
        eps = float(self.epsilon)
        if not (0.0 < eps < 1.0):
            raise ParameterDomainError(f"epsilon must lie strictly inside (0, 1), got {eps}")
        object.__setattr__(self, "epsilon", eps)
        if self.sign not in (1, -1):
            raise ParameterDomainError("sign must be +1 or -1")

    @property
    def label(self) -> str:
        return SCHEME_NAMES[self.scheme]

    def with_epsilon(self, eps: float) -> "SchemeConfig":
        return SchemeConfig(self.scheme, eps, self.sign)


@dataclass
class SelectorResult:
    J: np.ndarray
    iterations: int
    residual_norm: float
    # recovered null point of G; None for the shift scheme
    back_point: Optional[TensorPair]


@dataclass
class BatchSelection:
    J: np.ndarray
    inner: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    back_J: Optional[np.ndarray] = None
    back_D: Optional[np.ndarray] = None


class _Map:
    """The equation H(x; D) = 0 solved for one scheme at one epsilon."""

    def __init__(self, model: ConstitutiveModel, cfg: SchemeConfig):
        self.model = model
        self.kind = cfg.scheme
        self.eps = cfg.epsilon
        self.sign = cfg.sign
        # scalar bracketing needs H increasing; -G describes the same graph
        self.flip = 1.0
        if model.is_scalar:
            z = np.zeros((1, 1, 1))
            self.flip = -1.0 if self.jac(z, z)[0, 0, 0] < 0 else 1.0

    def start(self, D, J_guess):
        if self.kind == "stretch":
            return J_guess - self.eps * D
        return J_guess.copy()

    def back(self, x, D):
        e = self.eps
        if self.kind == "stretch":
            return x, D - e * x
        if self.kind == "shear":
            return x - e * D, D - e * x
        return x, D

    def flux(self, x, D):
        if self.kind == "stretch":
            return x + self.eps * D
        return x

    def __call__(self, x, D):
        if self.kind == "shift":
            return self.flip * (self.model.evaluate(x, D) + self.sign * self.eps * (x - D))
        return self.flip * self.model.evaluate(*self.back(x, D))

    def jac(self, x, D):
        Jb, Db = self.back(x, D)
        GJ, GD = jacobians(self.model, Jb, Db)
        flip = self.flip
        if self.kind == "shift":
            return flip * (GJ + self.sign * self.eps * np.eye(GJ.shape[-1]))
        return flip * (GJ - self.eps * GD)


def _norms(H):
    return np.sqrt(np.sum(H * H, axis=(-2, -1)))


def _scalar_solve(H: _Map, D, x, tol, max_iter):
    """Safeguarded Newton on a nondecreasing scalar map, batched."""
    n = x.shape[0]
    h = H(x, D)[:, 0, 0]
    xs = x[:, 0, 0].copy()
    Ds = D
    its = np.zeros(n, dtype=int)
    done = np.abs(h) <= tol
    lo, hi = xs.copy(), xs.copy()
    hlo, hhi = h.copy(), h.copy()
    width = 0.5 * (1.0 + np.abs(xs))
    ok = np.ones(n, dtype=bool)
    for _ in range(200):
        need_lo = ~done & (hlo > 0)
        need_hi = ~done & (hhi < 0)
        if not (need_lo.any() or need_hi.any()):
            break
        for need, side in ((need_lo, -1.0), (need_hi, 1.0)):
            if not need.any():
                continue
            idx = np.flatnonzero(need)
            trial = xs[idx] + side * width[idx]
            ht = H(trial[:, None, None], Ds[idx])[:, 0, 0]
            hit = np.abs(ht) <= tol
            xs[idx[hit]], h[idx[hit]] = trial[hit], ht[hit]
            done[idx[hit]] = True
            its[idx] += 1
            if side < 0:
                hi[idx] = np.where(ht > 0, trial, hi[idx])
                hhi[idx] = np.where(ht > 0, ht, hhi[idx])
                lo[idx], hlo[idx] = trial, ht
            else:
                lo[idx] = np.where(ht < 0, trial, lo[idx])
                hlo[idx] = np.where(ht < 0, ht, hlo[idx])
                hi[idx], hhi[idx] = trial, ht
        width = np.where(need_lo | need_hi, 2 * width, width)
        ok &= np.isfinite(width) & (width < 1e300)
    ok &= done | ((hlo <= 0) & (hhi >= 0))
    done |= ~ok
    # start Newton from the bracket end closer to the root
    use_lo = ~done & (np.abs(hlo) < np.abs(h)) & (np.abs(hlo) <= np.abs(hhi))
    use_hi = ~done & (np.abs(hhi) < np.abs(h)) & ~use_lo
    xs = np.where(use_lo, lo, np.where(use_hi, hi, xs))
    h = np.where(use_lo, hlo, np.where(use_hi, hhi, h))
    force_bisect = np.zeros(n, dtype=bool)
    for _ in range(max(max_iter, 200)):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        xa = xs[active]
        dh = H.jac(xa[:, None, None], Ds[active])[:, 0, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - h[active] / dh
        bad = (~np.isfinite(xn)) | (dh <= 0) | (xn <= lo[active]) | (xn >= hi[active]) | force_bisect[active]
        xn = np.where(bad, 0.5 * (lo[active] + hi[active]), xn)
        hn = H(xn[:, None, None], Ds[active])[:, 0, 0]
        force_bisect[active] = np.abs(hn) > 0.5 * np.abs(h[active])
        pos = hn > 0
        hi[active] = np.where(pos, xn, hi[active])
        lo[active] = np.where(pos, lo[active], xn)
        xs[active] = xn
        h[active] = hn
        its[active] += 1
        collapsed = (hi[active] - lo[active]) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xn))
        done[active] = (np.abs(hn) <= tol) | collapsed
    conv = ok & done
    return xs[:, None, None], its, np.abs(h), conv


def _newton(H: _Map, D, x, tol, max_iter):
    """Damped Newton with Armijo backtracking on |H|, batched over samples."""
    n = x.shape[0]
    shape = x.shape
    m = shape[-2] * shape[-1]
    r = H(x, D)
    nr = _norms(r)
    its = np.zeros(n, dtype=int)
    failed = ~np.isfinite(nr)
    # absolute tolerance, relaxed in proportion to the data once |D| or |x| exceeds 1
    base = tol
    scale_D = np.maximum(1.0, _norms(D))
    tol = base * np.maximum(scale_D, _norms(x))
    for _ in range(max_iter):
        tol = base * np.maximum(scale_D, _norms(x))
        act = np.flatnonzero((nr > tol) & ~failed)
        if act.size == 0:
            break
        Jm = H.jac(x[act], D[act])
        rhs = -r[act].reshape(act.size, m)
        try:
            dx = np.linalg.solve(Jm, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dx = np.stack([np.linalg.lstsq(Jm[k], rhs[k], rcond=None)[0] for k in range(act.size)])
        dx = dx.reshape((act.size,) + shape[1:])
        t = np.ones(act.size)
        accepted = np.zeros(act.size, dtype=bool)
        while True:
            pend = np.flatnonzero(~accepted & (t >= MIN_STEP))
            if pend.size == 0:
                break
            idx = act[pend]
            xt = x[idx] + t[pend, None, None] * dx[pend]
            rt = H(xt, D[idx])
            nrt = _norms(rt)
            good = np.isfinite(nrt) & (nrt <= (1 - ARMIJO_C * t[pend]) * nr[idx])
            gi = pend[good]
            x[act[gi]] = xt[good]
            r[act[gi]] = rt[good]
            nr[act[gi]] = nrt[good]
            accepted[gi] = True
            t[pend[~good]] *= 0.5
        its[act] += 1
        failed[act[~accepted]] = True
    conv = (nr <= tol) & ~failed
    return x, its, nr, conv


def _solve(H, D, x, tol, max_iter):
    if x.shape[-2] * x.shape[-1] == 1:
        return _scalar_solve(H, D, x, tol, max_iter)
    return _newton(H, D, x.copy(), tol, max_iter)


def select_batch(model: ConstitutiveModel, cfg: SchemeConfig, D, guess=None,
                 tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX,
                 continuation: bool = True) -> BatchSelection:
    """Evaluate J*_eps on a batch ``D`` of shape (B, N, d); never raises on failure."""
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        D = D[None]
    if D.shape[-2:] != (model.N, model.d):
        raise DimensionError(f"{model.name} expects {model.N}x{model.d} gradients, got {D.shape[-2:]}")
    guess = D.copy() if guess is None else np.broadcast_to(np.asarray(guess, dtype=float), D.shape).copy()
    H = _Map(model, cfg)
    x, its, res, conv = _solve(H, D, H.start(D, guess), tol, max_iter)
    if continuation and not conv.all():
        bad = np.flatnonzero(~conv)
        xb = H.start(D[bad], guess[bad])
        total = np.zeros(bad.size, dtype=int)
        for eps in np.geomspace(0.5, cfg.epsilon, CONTINUATION_STEPS):
            Hk = _Map(model, cfg.with_epsilon(min(float(eps), 0.999)))
            xb, k, rb, cb = _solve(Hk, D[bad], xb, tol, max_iter)
            total += k
        x[bad], res[bad], conv[bad] = xb, rb, cb
        its[bad] += total
    J = H.flux(x, D)
    out = BatchSelection(J=J, inner=x, iterations=its, residual=res, converged=conv)
    if cfg.scheme != "shift":
        out.back_J, out.back_D = H.back(x, D)
    return out


def select(model: ConstitutiveModel, cfg: SchemeConfig, D, guess=None,
           tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX) -> SelectorResult:
    """J*_eps(D) for one gradient matrix D; raises :class:`SelectionFailure`."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape != (model.N, model.d):
        raise DimensionError(f"{model.name} expects a {model.N}x{model.d} gradient, got {D.shape}")
    out = select_batch(model, cfg, D[None], None if guess is None else np.atleast_2d(guess)[None],
                       tol=tol, max_iter=max_iter)
    if not out.converged[0]:
        raise SelectionFailure(f"{cfg.label} selection for {model.name} did not converge",
                               float(out.residual[0]))
    back = None
    if out.back_J is not None:
        back = TensorPair(out.back_J[0], out.back_D[0])
    return SelectorResult(J=out.J[0], iterations=int(out.iterations[0]),
                          residual_norm=float(out.residual[0]), back_point=back)


@dataclass
class CurveRow:
    d: float
    J: float
    iterations: int
    residual: float
    status: str = "ok"


def selection_curve(model: ConstitutiveModel, cfg: SchemeConfig, d_min: float, d_max: float,
                    count: int, tol: float = NEWTON_TOL) -> list[CurveRow]:
    """Sweep d over an even grid, warm-starting each solve from its neighbour."""
    if not model.is_scalar:
        raise DimensionError("selection_curve needs a scalar model")
    rows = []
    guess = None
    for d in np.linspace(d_min, d_max, int(count)):
        Dm = np.array([[[d]]])
        out = select_batch(model, cfg, Dm, guess, tol=tol)
        J = float(out.J[0, 0, 0])
        status = "ok" if out.converged[0] else "selection-failure"
        rows.append(CurveRow(float(d), J, int(out.iterations[0]), float(out.residual[0]), status))
        if out.converged[0]:
            guess = out.J[0]
    return rows


def monotonicity_bound(cfg: SchemeConfig) -> float:
    e = cfg.epsilon
    if cfg.scheme == "stretch":
        return e / (1 + 2 * e * e)
    if cfg.scheme == "shear":
        return e / (1 + e * e)
    raise ParameterDomainError("no monotonicity constant is available for the shift scheme")


@dataclass
class MonotonicityEstimate:
    mono_lower: float
    lip_upper: float
    bound: float
    excluded: int
    witness: tuple = field(default=None, repr=False)

    def __iter__(self):
        yield self.mono_lower
        yield self.lip_upper


def _random_directions(rng, n, shape):
    v = rng.standard_normal((n,) + shape)
    return v / np.sqrt(np.sum(v * v, axis=(-2, -1), keepdims=True))


def estimate_constants(model: ConstitutiveModel, cfg: SchemeConfig, sample_count: int = 10_000,
                       seed: int = 0, radius: float = 3.0, check: bool = True) -> MonotonicityEstimate:
    """Empirical monotonicity and Lipschitz constants of J*_eps over random pairs."""
    bound = monotonicity_bound(cfg)
    rng = np.random.default_rng(seed)
    shape = (model.N, model.d)
    D1 = rng.uniform(-radius, radius, (sample_count,) + shape)
    length = 10.0 ** rng.uniform(-2, np.log10(2 * radius), sample_count)
    D2 = D1 + length[:, None, None] * _random_directions(rng, sample_count, shape)
    both = select_batch(model, cfg, np.concatenate([D1, D2]), tol=1e-13)
    J1, J2 = both.J[:sample_count], both.J[sample_count:]
    ok = both.converged[:sample_count] & both.converged[sample_count:]
    dJ = (J1 - J2)[ok]
    dD = (D1 - D2)[ok]
    nD2 = np.sum(dD * dD, axis=(-2, -1))
    mono = np.sum(dJ * dD, axis=(-2, -1)) / nD2
    lip = np.sqrt(np.sum(dJ * dJ, axis=(-2, -1)) / nD2)
    k = int(np.argmin(mono))
    idx = np.flatnonzero(ok)[k]
    est = MonotonicityEstimate(float(mono[k]), float(lip.max()), bound, int((~ok).sum()),
                               witness=(D1[idx], D2[idx]))
    if check and est.mono_lower < (1 - 1e-6) * bound:
        raise PropertyViolation(
            f"{cfg.label} eps={cfg.epsilon}: monotonicity {est.mono_lower:.6g} below {bound:.6g}",
            witness=est.witness)
    return est


@dataclass
class CoercivityFit:
    C1: float
    C2: float
    worst_margin: float
    per_eps: dict
    excluded: int = 0

    def __iter__(self):
        yield self.C1
        yield self.C2
        yield self.worst_margin


def coercivity_eps(model: ConstitutiveModel, cfg: SchemeConfig, sample_count: int = 2000,
                   eps_list=(0.3, 0.1, 0.03, 0.01), seed: int = 0,
                   radius_min: float = 1e-3, radius_max: float = 1e3) -> CoercivityFit:
    """One pair (C1, C2) for J:D >= C1(|J|^min(p',2) + |D|^min(p,2)) - C2 at every eps.

    The constants are calibrated on the first epsilon (C2 = 1, C1 = half the
    smallest admissible value) and then checked on all of them.  The reported
    margin is normalised by 1 + |J|^a + |D|^b.
    """
    if cfg.scheme != "stretch":
        raise ParameterDomainError("coercivity_eps is defined for the stretch scheme")
    a = min(model.p_conjugate, 2.0)
    b = min(model.p, 2.0)
    rng = np.random.default_rng(seed)
    shape = (model.N, model.d)
    radii = np.geomspace(radius_min, radius_max, sample_count)
    D = radii[:, None, None] * _random_directions(rng, sample_count, shape)
    D = np.concatenate([np.zeros((1,) + shape), D])
    data = {}
    excluded = 0
    for eps in eps_list:
        out = select_batch(model, cfg.with_epsilon(eps), D)
        ok = out.converged
        excluded += int((~ok).sum())
        J, Dk = out.J[ok], D[ok]
        JD = np.sum(J * Dk, axis=(-2, -1))
        growth = np.sqrt(np.sum(J * J, axis=(-2, -1))) ** a + np.sqrt(np.sum(Dk * Dk, axis=(-2, -1))) ** b
        data[eps] = (JD, growth)
    C2 = 1.0
    JD0, g0 = data[eps_list[0]]
    pos = g0 > 0
    C1 = 0.5 * float(np.min((JD0[pos] + C2) / g0[pos]))
    per_eps = {}
    worst = np.inf
    for eps, (JD, growth) in data.items():
        margin = (JD - C1 * growth + C2) / (1 + growth)
        pos = growth > 0
        per_eps[eps] = {"C1_fit": float(np.min((JD[pos] + C2) / growth[pos])),
                        "margin": float(margin.min())}
        worst = min(worst, float(margin.min()))
    return CoercivityFit(C1, C2, worst, per_eps, excluded)


def _segment_distance(points, poly, chunk=256):
    a = poly[:-1]
    ab = poly[1:] - a
    ab2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        P = points[s:s + chunk, None, :]
        t = np.clip(np.sum((P - a) * ab, axis=2) / ab2, 0.0, 1.0)
        closest = a + t[..., None] * ab
        out[s:s + chunk] = np.sqrt(np.min(np.sum((P - closest) ** 2, axis=2), axis=1))
    return out


def graph_distance(model: ConstitutiveModel, cfg: SchemeConfig, d_range=(-3.0, 3.0), count: int = 601,
                   reference_segments: int = 10_000) -> float:
    """One-sided Hausdorff distance from the selection curve to the graph {G = 0}.

    The reference graph is a bisection polyline in the (d, j) plane over a
    range widened by 10% on each side.
    """
    lo, hi = map(float, d_range)
    rows = selection_curve(model, cfg, lo, hi, count)
    curve = np.array([(r.d, r.J) for r in rows if r.status == "ok"])
    width = 0.1 * (hi - lo)
    d_ref = np.linspace(lo - width, hi + width, reference_segments + 1)
    span = 10.0 + 10.0 * max(abs(lo), abs(hi)) + 2.0 * float(np.abs(curve[:, 1]).max())
    ref = null_curve_scalar(model, d_ref, (-span, span))
    poly = np.array([(d, j) for j, d in ref])
    return float(_segment_distance(curve, poly).max())
