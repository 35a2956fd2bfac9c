"""Constitutive functions G(J, D) and the built-in catalogue.

Arrays follow one convention everywhere: a single point is an ``(N, d)``
matrix and a batch is ``(..., N, d)``.  Residuals keep that shape; Jacobians
are ``(..., N*d, N*d)`` with row-major flattening over (component, direction)
for both rows and columns.

Every built-in is oriented so that ``G_J >= 0``: left-column laws are written
``J - phi(D)``, right-column laws ``psi(J) - D``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, ParameterDomainError, RootNotBracketedError

SQRT2 = float(np.sqrt(2.0))
FD_STEP = 1e-6


@dataclass(frozen=True)
class TensorPair:
    """A flux/gradient couple; scalars are promoted to 1x1 matrices."""

    J: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if J.shape != D.shape:
            raise DimensionError(f"J has shape {J.shape} but D has shape {D.shape}")
        if J.ndim != 2 or min(J.shape) < 1:
            raise DimensionError(f"expected N x d matrices, got shape {J.shape}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "D", D)

    @property
    def shape(self):
        return self.J.shape


@dataclass(frozen=True, eq=False)
class ConstitutiveModel:
    name: str
    N: int
    d: int
    p: float
    residual: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Optional[Callable] = None
    coercivity_c1: Optional[float] = None
    coercivity_c2: Optional[float] = None
    # distance from (J, D) to the set where G is not differentiable
    kink_distance: Optional[Callable] = None
    explicit_flux: Optional[Callable] = None
    explicit_gradient: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def p_conjugate(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def size(self) -> int:
        return self.N * self.d

    @property
    def is_scalar(self) -> bool:
        return self.N == 1 and self.d == 1

    def evaluate(self, J, D) -> np.ndarray:
        return self.residual(np.asarray(J, dtype=float), np.asarray(D, dtype=float))

    def negated(self) -> "ConstitutiveModel":
        """The same graph described by -G (flips every (G2)/(G3) sign but the last)."""
        res = self.residual
        jac = self.jacobian

        def neg_jac(J, D):
            GJ, GD = jac(J, D)
            return -GJ, -GD

        return replace(
            self,
            name=f"-{self.name}",
            residual=lambda J, D: -res(J, D),
            jacobian=None if jac is None else neg_jac,
        )


# ---------------------------------------------------------------- helpers

def _fro(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=(-2, -1)))


def _flat(v: np.ndarray) -> np.ndarray:
    return v.reshape(v.shape[:-2] + (v.shape[-2] * v.shape[-1],))


class _Radial:
    """phi(v) = f(|v|) v with Jacobian f I + g(|v|) vhat vhat^T, g = r f'(r)."""

    def __init__(self, f, g):
        self.f = f
        self.g = g

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        r = _fro(v)[..., None, None]
        with np.errstate(invalid="ignore"):
            return np.where(r > 0, self.f(r[..., 0, 0])[..., None, None] * v, 0.0)

    def jac(self, v):
        flat = _flat(v)
        n = flat.shape[-1]
        r = _fro(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            vhat = np.where(r[..., None] > 0, flat / r[..., None], 0.0)
        g = np.where(r > 0, self.g(r), 0.0)
        return (self.f(r)[..., None, None] * np.eye(n)
                + g[..., None, None] * vhat[..., :, None] * vhat[..., None, :])


def _safe(fn, r, at_zero):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = fn(np.where(r > 0, r, 1.0))
    return np.where(r > 0, out, at_zero)


def _power(q: float) -> _Radial:
    # |v|^{q-2} v
    zero_f = 1.0 if q == 2 else (0.0 if q > 2 else np.inf)
    return _Radial(lambda r: _safe(lambda s: s ** (q - 2), r, zero_f),
                   lambda r: _safe(lambda s: (q - 2) * s ** (q - 2), r, 0.0 if q >= 2 else np.inf))


def _reg_add(q: float) -> _Radial:
    return _Radial(lambda r: (1 + r) ** (q - 2),
                   lambda r: (q - 2) * r * (1 + r) ** (q - 3))


def _reg_sq(q: float) -> _Radial:
    return _Radial(lambda r: (1 + r * r) ** ((q - 2) / 2),
                   lambda r: (q - 2) * r * r * (1 + r * r) ** ((q - 4) / 2))


def _activated(threshold: float) -> _Radial:
    # (|v| - t)^+ v/|v|; the derivative uses the strict indicator |v| > t
    return _Radial(lambda r: _safe(lambda s: np.maximum(s - threshold, 0.0) / s, r, 0.0),
                   lambda r: _safe(lambda s: np.where(s > threshold, threshold / s, 0.0), r, 0.0))


def step_profile(x):
    """The cut-off ``a`` of the single-step law: 1, then (sqrt2 - x)/x, then 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = (SQRT2 - x) / x
    return np.where(x <= SQRT2 / 2, 1.0, np.where(x < SQRT2, mid, 0.0))


def zigzag_profile(x):
    """sqrt2-periodic triangle wave b with b(x) = x a(x) on [0, sqrt2]."""
    y = np.mod(np.asarray(x, dtype=float), SQRT2)
    return np.where(y <= SQRT2 / 2, y, SQRT2 - y)


def _step_radial() -> _Radial:
    # a(|v|/sqrt2) v written in r = |v|: 1 on [0,1], (2-r)/r on (1,2), 0 beyond
    def f(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = (2.0 - r) / r
        return np.where(r <= 1, 1.0, np.where(r < 2, mid, 0.0))

    def g(r):
        return np.where((r > 1) & (r < 2), -2.0 / np.where(r > 0, r, 1.0), 0.0)

    return _Radial(f, g)


def _triangle(r):
    # sqrt2 b(r/sqrt2): period 2, unit amplitude
    y = np.mod(r, 2.0)
    return np.where(y <= 1, y, 2.0 - y)


def _zigzag_radial() -> _Radial:
    def f(r):
        return _safe(lambda s: _triangle(s) / s, r, 1.0)

    def g(r):
        slope = np.where(np.mod(r, 2.0) < 1, 1.0, -1.0)
        return slope - f(r)

    return _Radial(f, g)


def _left_column(phi: _Radial):
    def residual(J, D):
        return J - phi(D)

    def jacobian(J, D):
        GD = -phi.jac(D)
        GJ = np.broadcast_to(np.eye(GD.shape[-1]), GD.shape).copy()
        return GJ, GD

    return residual, jacobian


def _right_column(psi: _Radial):
    def residual(J, D):
        return psi(J) - D

    def jacobian(J, D):
        GJ = psi.jac(J)
        GD = -np.broadcast_to(np.eye(GJ.shape[-1]), GJ.shape).copy()
        return GJ, GD

    return residual, jacobian


def _rotated(phi: _Radial, with_jacobian: bool):
    # J - D - phi(J + D)
    def residual(J, D):
        return J - D - phi(J + D)

    def jacobian(J, D):
        P = phi.jac(J + D)
        I = np.eye(P.shape[-1])
        return I - P, -I - P

    return residual, (jacobian if with_jacobian else None)


# ---------------------------------------------------------------- catalogue

@dataclass(frozen=True)
class ModelKind:
    """A catalogue entry: kind name plus parameters, e.g. ``powerlaw:p=3``."""

    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        text = text.strip()
        if not text:
            raise ParameterDomainError("empty model identifier")
        name, _, rest = text.partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise ParameterDomainError(f"malformed model parameter {item!r} in {text!r}")
            params[key.strip()] = _parse_value(value.strip())
        return cls(name.strip().lower(), params)

    def __str__(self):
        if not self.params:
            return self.name
        body = ",".join(f"{k}={_format_value(v)}" for k, v in self.params.items())
        return f"{self.name}:{body}"


def _parse_value(value: str):
    if "/" in value:
        return tuple(float(v) for v in value.split("/"))
    try:
        return float(value)
    except ValueError:
        raise ParameterDomainError(f"non-numeric model parameter value {value!r}") from None


def _format_value(v):
    if isinstance(v, tuple):
        return "/".join(f"{x:g}" for x in v)
    return f"{v:g}"


_P_KINDS = {
    "powerlaw", "powerlaw-inverse", "reg-power-add", "reg-power-add-inverse",
    "reg-power-sq", "reg-power-sq-inverse",
}
_ALLOWED = {
    "linear": {"dim"},
    "activated-gradient": {"dim", "delta"},
    "activated-flux": {"dim", "sigma"},
    "step-riser": {"dim"},
    "zigzag": {"dim"},
    "maxwell-stefan": {"dim", "u", "a"},
    "antimonotone": {"dim"},
    "quadratic": {"dim"},
    "zero": {"dim"},
    **{k: {"dim", "p"} for k in _P_KINDS},
}

# Default Maxwell-Stefan data: three species, equal weights.
MS_DEFAULT_A = np.array([[1.0, 1.0, 2.0], [1.0, 1.0, 3.0], [2.0, 3.0, 1.0]])
MS_DEFAULT_U = np.full(3, 1.0 / 3.0)

BUILTIN_IDS = sorted(_ALLOWED)


def _positive(params, key, default):
    value = float(params.get(key, default))
    if not np.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"{key} must be positive, got {value}")
    return value


def _dimension(params) -> int:
    dim = params.get("dim", 1)
    if float(dim) != int(dim) or int(dim) < 1:
        raise ParameterDomainError(f"dim must be a positive integer, got {dim}")
    return int(dim)


def _exponent(params) -> float:
    if "p" not in params:
        raise ParameterDomainError("this model needs an exponent p")
    p = float(params["p"])
    if not np.isfinite(p) or p <= 1:
        raise ParameterDomainError(f"p must lie in (1, inf), got {p}")
    return p


def make_builtin(kind, **overrides) -> ConstitutiveModel:
    """Build a catalogue model from a :class:`ModelKind` or an id string."""
    if isinstance(kind, str):
        kind = ModelKind.parse(kind)
    params = {**kind.params, **overrides}
    name = kind.name
    if name not in _ALLOWED:
        raise ParameterDomainError(f"unknown model kind {name!r}; known: {', '.join(BUILTIN_IDS)}")
    unknown = set(params) - _ALLOWED[name]
    if unknown:
        raise ParameterDomainError(f"unknown parameter(s) {sorted(unknown)} for {name}")
    dim = _dimension(params)
    label = str(ModelKind(name, params))

    if name == "maxwell-stefan":
        return _maxwell_stefan(params, dim, label)

    common = dict(name=label, N=1, d=dim, params=dict(params))

    if name == "linear":
        def res(J, D):
            return J - D

        def jac(J, D):
            n = J.shape[-2] * J.shape[-1]
            I = np.broadcast_to(np.eye(n), J.shape[:-2] + (n, n)).copy()
            return I, -I

        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac, coercivity_c1=0.5,
                                 coercivity_c2=0.0, explicit_flux=lambda D: np.asarray(D, float),
                                 explicit_gradient=lambda J: np.asarray(J, float), **common)

    if name in _P_KINDS:
        p = _exponent(params)
        q = p / (p - 1.0)
        inverse = name.endswith("-inverse")
        base = name.removesuffix("-inverse")
        exponent = q if inverse else p
        radial = {"powerlaw": _power, "reg-power-add": _reg_add, "reg-power-sq": _reg_sq}[base](exponent)
        res, jac = (_right_column if inverse else _left_column)(radial)
        kink = None
        if base == "powerlaw" and exponent < 2:
            kink = (lambda J, D: _fro(J)) if inverse else (lambda J, D: _fro(D))
        extra = {"explicit_gradient": radial} if inverse else {"explicit_flux": radial}
        return ConstitutiveModel(p=p, residual=res, jacobian=jac, kink_distance=kink, **extra, **common)

    if name == "activated-gradient":
        delta = _positive(params, "delta", 1.0)
        res, jac = _left_column(_activated(delta))
        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac,
                                 kink_distance=lambda J, D: np.abs(_fro(D) - delta),
                                 explicit_flux=_activated(delta), **common)

    if name == "activated-flux":
        sigma = _positive(params, "sigma", 1.0)
        res, jac = _right_column(_activated(sigma))
        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac,
                                 kink_distance=lambda J, D: np.abs(_fro(J) - sigma),
                                 explicit_gradient=_activated(sigma), **common)

    if name == "step-riser":
        res, jac = _rotated(_step_radial(), with_jacobian=True)

        def kink(J, D):
            s = _fro(J + D)
            return np.minimum(np.abs(s - 1), np.abs(s - 2)) / SQRT2

        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac, kink_distance=kink, **common)

    if name == "zigzag":
        res, _ = _rotated(_zigzag_radial(), with_jacobian=False)

        def kink(J, D):
            s = _fro(J + D)
            # corners of the staircase sit at integer |J + D| >= 1
            return np.abs(s - np.maximum(np.round(s), 1.0)) / SQRT2

        return ConstitutiveModel(p=2.0, residual=res, jacobian=None, kink_distance=kink, **common)

    if name == "antimonotone":
        def res(J, D):
            return J + D

        def jac(J, D):
            n = J.shape[-2] * J.shape[-1]
            I = np.broadcast_to(np.eye(n), J.shape[:-2] + (n, n)).copy()
            return I, I.copy()

        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac, **common)

    if name == "quadratic":
        def res(J, D):
            return J * J - D

        def jac(J, D):
            flat = _flat(J)
            n = flat.shape[-1]
            GJ = 2 * flat[..., :, None] * np.eye(n)
            return GJ, -np.broadcast_to(np.eye(n), GJ.shape).copy()

        return ConstitutiveModel(p=2.0, residual=res, jacobian=jac, **common)

    # "zero": the identically vanishing residual
    def res(J, D):
        return np.zeros(np.broadcast_shapes(np.shape(J), np.shape(D)))

    def jac(J, D):
        n = J.shape[-2] * J.shape[-1]
        Z = np.zeros(J.shape[:-2] + (n, n))
        return Z, Z.copy()

    return ConstitutiveModel(p=2.0, residual=res, jacobian=jac, **common)


def _maxwell_stefan(params, dim, label) -> ConstitutiveModel:
    if "u" in params:
        u = np.atleast_1d(np.asarray(params["u"], dtype=float))
    else:
        u = MS_DEFAULT_U.copy()
    n = u.size
    if "a" in params:
        upper = np.atleast_1d(np.asarray(params["a"], dtype=float))
        if upper.size != n * (n - 1) // 2:
            raise ParameterDomainError(f"a must list the {n * (n - 1) // 2} upper off-diagonal entries")
        A = np.ones((n, n))
        A[np.triu_indices(n, 1)] = upper
        A[np.tril_indices(n, -1)] = A.T[np.tril_indices(n, -1)]
    elif n == 3:
        A = MS_DEFAULT_A.copy()
    else:
        A = np.ones((n, n))
    B, _ = maxwell_stefan_B(A, u)
    return maxwell_stefan_model(A, u, dim=dim, name=label, B=B)


def maxwell_stefan_model(A, u, dim=1, name="maxwell-stefan", B=None) -> ConstitutiveModel:
    """G(J, D) = B J - D with the friction matrix B built from (A, u)."""
    if B is None:
        B, _ = maxwell_stefan_B(A, u)
    n = B.shape[0]
    K = np.kron(B, np.eye(dim))

    def res(J, D):
        return np.einsum("vm,...mi->...vi", B, J) - D

    def jac(J, D):
        shape = J.shape[:-2] + K.shape
        return np.broadcast_to(K, shape).copy(), -np.broadcast_to(np.eye(K.shape[0]), shape).copy()

    return ConstitutiveModel(name=name, N=n, d=dim, p=2.0, residual=res, jacobian=jac,
                             params={"A": np.asarray(A, float), "u": np.asarray(u, float)})


def maxwell_stefan_B(A, u):
    """Friction matrix of the Maxwell-Stefan law and its (real) spectrum.

    B_vv = sum_{a != v} A_va u_a and B_vm = -A_vm u_v.  B is similar to the
    symmetric matrix diag(u)^-1/2 B diag(u)^1/2, so its eigenvalues are real;
    they are returned sorted ascending.
    """
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    n = u.size
    if A.shape != (n, n):
        raise DimensionError(f"A must be {n}x{n}, got {A.shape}")
    if n < 2:
        raise ParameterDomainError("Maxwell-Stefan needs at least two species")
    if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise ParameterDomainError("A must be symmetric")
    off = ~np.eye(n, dtype=bool)
    if np.any(A[off] <= 0):
        raise ParameterDomainError("off-diagonal entries of A must be positive")
    if np.any((u <= 0) | (u >= 1)):
        raise ParameterDomainError("weights must lie in (0, 1)")
    if abs(u.sum() - 1.0) > 1e-12:
        raise ParameterDomainError(f"weights must sum to 1, got {u.sum()!r}")
    Aoff = np.where(off, A, 0.0)
    B = np.diag(Aoff @ u) - u[:, None] * Aoff
    s = np.sqrt(u)
    sym = B * (s[None, :] / s[:, None])
    sym = 0.5 * (sym + sym.T)
    return B, np.sort(np.linalg.eigvalsh(sym))


# ---------------------------------------------------------------- operations

def eval_residual(model: ConstitutiveModel, pair: TensorPair) -> np.ndarray:
    if not isinstance(pair, TensorPair):
        pair = TensorPair(*pair)
    if pair.shape != (model.N, model.d):
        raise DimensionError(f"{model.name} expects {model.N}x{model.d} pairs, got {pair.shape}")
    return model.evaluate(pair.J, pair.D)


def fd_jacobians(model: ConstitutiveModel, J, D):
    """Central differences with step 1e-6 (1 + |x|), batched over leading axes."""
    J = np.asarray(J, dtype=float)
    D = np.asarray(D, dtype=float)
    lead = J.shape[:-2]
    n = J.shape[-2] * J.shape[-1]
    cols = []
    for X, other, first in ((J, D, True), (D, J, False)):
        flat = _flat(X)
        jac = np.empty(lead + (n, n))
        for k in range(n):
            h = FD_STEP * (1.0 + np.abs(flat[..., k]))
            plus = flat.copy()
            minus = flat.copy()
            plus[..., k] += h
            minus[..., k] -= h
            Xp = plus.reshape(X.shape)
            Xm = minus.reshape(X.shape)
            if first:
                gp, gm = model.evaluate(Xp, other), model.evaluate(Xm, other)
            else:
                gp, gm = model.evaluate(other, Xp), model.evaluate(other, Xm)
            jac[..., :, k] = (_flat(gp) - _flat(gm)) / (2 * h[..., None])
        cols.append(jac)
    return cols[0], cols[1]


def jacobians(model: ConstitutiveModel, J, D=None):
    """(G_J, G_D) at a pair or a batch; analytic when attached, else differences."""
    if D is None:
        pair = J if isinstance(J, TensorPair) else TensorPair(*J)
        J, D = pair.J, pair.D
    J = np.asarray(J, dtype=float)
    D = np.asarray(D, dtype=float)
    if J.shape[-2:] != (model.N, model.d) or D.shape != J.shape:
        raise DimensionError(f"{model.name} expects trailing shape {(model.N, model.d)}")
    if model.jacobian is not None:
        return model.jacobian(J, D)
    return fd_jacobians(model, J, D)


def _bisect(fun, lo, hi, values, what, tol=1e-12, max_iter=256):
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = fun(lo)
    fhi = fun(hi)
    bad = (np.sign(flo) == np.sign(fhi)) & (flo != 0) & (fhi != 0)
    if np.any(bad):
        raise RootNotBracketedError(float(values[np.argmax(bad)]),
                                    f"no sign change in bracket at {what}={float(values[np.argmax(bad)])!r}")
    root = np.where(flo == 0, lo, np.where(fhi == 0, hi, np.nan))
    active = np.isnan(root)
    for _ in range(max_iter):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        hit = active & (np.abs(fm) <= tol)
        root[hit] = mid[hit]
        active &= ~hit
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(active & left, mid, lo)
        flo = np.where(active & left, fm, flo)
        hi = np.where(active & ~left, mid, hi)
        collapsed = active & (hi - lo <= 2 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid)))
        root[collapsed] = mid[collapsed]
        active &= ~collapsed
    root[active] = 0.5 * (lo + hi)[active]
    return root


def null_curve_scalar(model: ConstitutiveModel, d_samples, j_bracket=(-10.0, 10.0)):
    """Bisection in j for g(j, d) = 0 at each sampled d; returns [(j, d), ...]."""
    if not model.is_scalar:
        raise DimensionError("null_curve_scalar needs a scalar model (N = d = 1)")
    d = np.asarray(d_samples, dtype=float).ravel()
    lo = np.full_like(d, float(j_bracket[0]))
    hi = np.full_like(d, float(j_bracket[1]))

    def g(j):
        return model.evaluate(j[:, None, None], d[:, None, None])[:, 0, 0]

    j = _bisect(g, lo, hi, d, "d")
    return list(zip(j.tolist(), d.tolist()))


def null_curve_scalar_in_d(model: ConstitutiveModel, j_samples, d_bracket=(-10.0, 10.0)):
    """Same as :func:`null_curve_scalar` with the roles of j and d exchanged."""
    if not model.is_scalar:
        raise DimensionError("null_curve_scalar_in_d needs a scalar model (N = d = 1)")
    j = np.asarray(j_samples, dtype=float).ravel()
    lo = np.full_like(j, float(d_bracket[0]))
    hi = np.full_like(j, float(d_bracket[1]))

    def g(d):
        return model.evaluate(j[:, None, None], d[:, None, None])[:, 0, 0]

    d = _bisect(g, lo, hi, j, "j")
    return list(zip(j.tolist(), d.tolist()))


def zigzag_polyline(d_lo: float, d_hi: float, count: int = 601):
    """Exact staircase of the zig-zag law, vertical pieces included.

    Samples the rotated parametrisation (along, across) = (x, sign(x) b(|x|))
    and keeps the points with d in [d_lo, d_hi].  Returns (d, j) arrays.
    """
    span = d_hi - d_lo
    x = np.linspace((d_lo - 1) * SQRT2, (d_hi + 1) * SQRT2, int(count * (span + 2) / max(span, 1e-12)) + 1)
    corners = np.arange(np.floor(2 * (d_lo - 1)), np.ceil(2 * (d_hi + 1)) + 1) * SQRT2 / 2
    x = np.unique(np.concatenate([x, corners]))
    y = np.sign(x) * zigzag_profile(np.abs(x))
    j = (x + y) / SQRT2
    d = (x - y) / SQRT2
    keep = (d >= d_lo - 1e-12) & (d <= d_hi + 1e-12)
    return d[keep], j[keep]
