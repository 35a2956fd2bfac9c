"""P1 finite elements on an interval with an epsilon-selected flux.

Unknowns are nodal values u_i.  Element gradients D_e = (u_{e+1} - u_e)/h_e
are mapped to fluxes J_e = J*_eps(D_e) by the selector, and the nodal
residual of one implicit Euler step is

    R_i = m_i (u_i - u_i^old)/tau + J_{i-1} - J_i - m_i f_i

with lumped mass m.  Dirichlet nodes are removed; Neumann ends need no term.
Multiplying R by u gives the discrete energy identity

    1/2|u|^2 - 1/2|u_old|^2 + 1/2|u - u_old|^2 + tau sum h J D - tau sum m f u = tau u.R
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import CompatibilityError, ConfigError, ParameterDomainError, SelectionFailure, SolverError, StepFailure
from .models import ConstitutiveModel
from .selector import SchemeConfig, select_batch

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_BC_ALIASES = {"d": DIRICHLET, "dirichlet": DIRICHLET, "n": NEUMANN, "neumann": NEUMANN}

SELECTION_TOL = 1e-13
FD_REL = 1e-7


def boundary_kind(text: str) -> str:
    key = str(text).strip().lower()
    if key not in _BC_ALIASES:
        raise ParameterDomainError(f"unknown boundary condition {text!r}")
    return _BC_ALIASES[key]


@dataclass(frozen=True)
class Mesh1D:
    nodes: np.ndarray
    left_bc: str = DIRICHLET
    right_bc: str = DIRICHLET

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ParameterDomainError("a mesh needs at least 3 nodes")
        if np.any(np.diff(x) <= 0):
            raise ParameterDomainError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "left_bc", boundary_kind(self.left_bc))
        object.__setattr__(self, "right_bc", boundary_kind(self.right_bc))

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def L(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def mass(self) -> np.ndarray:
        h = self.h
        m = np.zeros(self.nodes.size)
        m[:-1] += 0.5 * h
        m[1:] += 0.5 * h
        return m

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.nodes.size, dtype=bool)
        if self.left_bc == DIRICHLET:
            mask[0] = False
        if self.right_bc == DIRICHLET:
            mask[-1] = False
        return mask

    @property
    def has_dirichlet(self) -> bool:
        return DIRICHLET in (self.left_bc, self.right_bc)


def build_mesh(n_elements: int, L: float = 1.0, left_bc: str = DIRICHLET, right_bc: str = DIRICHLET) -> Mesh1D:
    if int(n_elements) != n_elements or n_elements < 2:
        raise ParameterDomainError(f"n_elements must be an integer >= 2, got {n_elements}")
    if not L > 0:
        raise ParameterDomainError(f"L must be positive, got {L}")
    return Mesh1D(np.linspace(0.0, float(L), int(n_elements) + 1), left_bc, right_bc)


def _zero_source(t, x):
    return np.zeros_like(x)


def _zero_initial(x):
    return np.zeros_like(x)


@dataclass
class SolveConfig:
    mesh: Mesh1D
    model: ConstitutiveModel
    scheme: SchemeConfig
    T: float = 0.1
    tau: float = 1e-3
    f: Callable = _zero_source
    u0: Callable = _zero_initial
    newton_tol: float = 1e-10
    newton_max: int = 50
    oracle: Optional[Callable] = None

    def __post_init__(self):
        if not self.model.is_scalar:
            raise ParameterDomainError("the solver handles scalar laws (N = d = 1) only")
        if not self.tau > 0:
            raise ParameterDomainError("tau must be positive")
        if self.T < self.tau:
            raise ParameterDomainError("T must be at least tau")

    @property
    def steps(self) -> int:
        return int(np.ceil(self.T / self.tau - 1e-9))

    @property
    def step_size(self) -> float:
        """tau shrunk so that an integer number of steps lands exactly on T."""
        return self.T / self.steps


@dataclass
class EnergyRecord:
    step: int
    time: float
    kinetic: float
    increment: float
    dissipation: float
    work: float
    residual: float
    newton_iterations: int
    min_element_dissipation: float


@dataclass
class Trajectory:
    times: list
    u_fields: list
    J_fields: list
    energy_ledger: list = field(default_factory=list)
    mesh: Optional[Mesh1D] = None
    tau: float = 0.0

    @property
    def u_final(self) -> np.ndarray:
        return self.u_fields[-1]

    @property
    def J_final(self) -> np.ndarray:
        return self.J_fields[-1]


class _Flux:
    """Element fluxes J*_eps(D_e) and their finite-difference slopes."""

    def __init__(self, model, scheme):
        self.model = model
        self.scheme = scheme
        self.guess = None

    def __call__(self, D, slopes=True):
        E = D.size
        if slopes:
            delta = FD_REL * (1.0 + np.abs(D))
            batch = np.concatenate([D, D + delta, D - delta])
            guess = None if self.guess is None else np.tile(self.guess, 3)
        else:
            batch, guess = D, self.guess
        out = select_batch(self.model, self.scheme, batch.reshape(-1, 1, 1),
                           None if guess is None else guess.reshape(-1, 1, 1), tol=SELECTION_TOL)
        if not out.converged.all():
            bad = int(np.flatnonzero(~out.converged)[0]) % E
            raise SelectionFailure(f"flux selection failed in element {bad} (D={D[bad]:.6g})",
                                   float(out.residual.max()))
        Jall = out.J.reshape(-1)
        J = Jall[:E]
        self.guess = J.copy()
        if not slopes:
            return J, None
        s = (Jall[E:2 * E] - Jall[2 * E:]) / (2 * delta)
        return J, s


def _gradients(mesh, u):
    return np.diff(u) / mesh.h


def _divergence(mesh, J):
    """Nodal vector sum_e J_e phi_i'(e) h_e = J_{i-1} - J_i."""
    out = np.zeros(mesh.nodes.size)
    out[1:] += J
    out[:-1] -= J
    return out


def _stiffness_bands(mesh, s, diag_extra):
    """Banded form of the tridiagonal matrix diag_extra + B^T diag(s/h) B."""
    w = s / mesh.h
    diag = diag_extra.copy()
    diag[:-1] += w
    diag[1:] += w
    return diag, -w


def _restricted_solve(mesh, diag, off, rhs):
    free = mesh.free
    idx = np.flatnonzero(free)
    d = diag[idx]
    # couplings between consecutive free nodes; free nodes are contiguous
    o = off[idx[:-1]]
    ab = np.zeros((3, idx.size))
    ab[0, 1:] = o
    ab[1] = d
    ab[2, :-1] = o
    out = np.zeros(mesh.nodes.size)
    out[idx] = solve_banded((1, 1), ab, rhs[idx])
    return out


class _NodalProblem:
    """R(u) = mass_coef*(u - u_old) + B^T J(Bu) - load on free nodes."""

    def __init__(self, mesh, flux, mass_coef, u_old, load):
        self.mesh = mesh
        self.flux = flux
        self.mass_coef = mass_coef
        self.u_old = u_old
        self.load = load
        self.free = mesh.free

    def residual(self, u, slopes=True):
        D = _gradients(self.mesh, u)
        J, s = self.flux(D, slopes)
        R = self.mass_coef * (u - self.u_old) + _divergence(self.mesh, J) - self.load
        R[~self.free] = 0.0
        return R, J, s

    def newton(self, u, tol, max_iter):
        R, J, s = self.residual(u)
        norm = np.abs(R).max()
        its = 0
        while norm > tol and its < max_iter:
            diag, off = _stiffness_bands(self.mesh, s, self.mass_coef * np.ones_like(u))
            du = _restricted_solve(self.mesh, diag, off, -R)
            t = 1.0
            while t >= 2.0 ** -20:
                trial = u + t * du
                Rt, Jt, st = self.residual(trial)
                nt = np.abs(Rt).max()
                if nt < (1 - 1e-4 * t) * norm or nt <= tol:
                    break
                t *= 0.5
            else:
                return u, R, J, its, False
            u, R, J, s, norm = trial, Rt, Jt, st, nt
            its += 1
        return u, R, J, its, norm <= tol

    def picard(self, u, tol, max_iter=5000):
        """Preconditioned Richardson u <- u - A^{-1} R with A built from the largest slope."""
        R, J, s = self.residual(u)
        lip = 1.1 * max(float(s.max()), 1e-12)
        diag, off = _stiffness_bands(self.mesh, np.full_like(s, lip), self.mass_coef * np.ones_like(u))
        its = 0
        while np.abs(R).max() > tol and its < max_iter:
            u = u - _restricted_solve(self.mesh, diag, off, R)
            R, J, s = self.residual(u, slopes=False)
            its += 1
        return u, R, J, its, np.abs(R).max() <= tol


def _energy(mesh, u_new, u_old, J, tau, f_nodes, its):
    m = mesh.mass
    D = _gradients(mesh, u_new)
    kin_new = 0.5 * float(np.sum(m * u_new ** 2))
    kin_old = 0.5 * float(np.sum(m * u_old ** 2))
    inc = 0.5 * float(np.sum(m * (u_new - u_old) ** 2))
    per_el = mesh.h * J * D
    diss = tau * float(per_el.sum())
    work = tau * float(np.sum(m * f_nodes * u_new))
    res = (kin_new - kin_old + inc + diss - work) / max(1.0, kin_new)
    return kin_new, inc, diss, work, res, float(per_el.min())


def solve_parabolic(cfg: SolveConfig) -> Trajectory:
    mesh = cfg.mesh
    x = mesh.nodes
    tau = cfg.step_size
    m = mesh.mass
    u = np.asarray(cfg.u0(x), dtype=float).copy()
    u[~mesh.free] = 0.0
    flux = _Flux(cfg.model, cfg.scheme)
    J0, _ = flux(_gradients(mesh, u), slopes=False)
    traj = Trajectory([0.0], [u.copy()], [J0], mesh=mesh, tau=tau)
    for k in range(1, cfg.steps + 1):
        t = k * tau
        f_nodes = np.asarray(cfg.f(t, x), dtype=float) * np.ones_like(x)
        problem = _NodalProblem(mesh, flux, m / tau, u, m * f_nodes)
        u_new, R, J, its, ok = problem.newton(u.copy(), cfg.newton_tol, cfg.newton_max)
        if not ok:
            u_new, R, J, more, ok = problem.picard(u_new, cfg.newton_tol)
            its += more
        if not ok:
            raise StepFailure(k, float(np.abs(R).max()))
        kin, inc, diss, work, res, min_el = _energy(mesh, u_new, u, J, tau, f_nodes, its)
        traj.energy_ledger.append(EnergyRecord(k, t, kin, inc, diss, work, res, its, min_el))
        u = u_new
        traj.times.append(t)
        traj.u_fields.append(u.copy())
        traj.J_fields.append(J.copy())
    return traj


def energy_report(traj: Trajectory) -> float:
    """Worst normalised defect of the discrete energy identity over all steps."""
    if not traj.energy_ledger:
        return 0.0
    return max(abs(r.residual) for r in traj.energy_ledger)


def _continuation_path(eps: float) -> np.ndarray:
    if eps >= 0.5:
        return np.array([eps])
    k = max(2, int(np.ceil(np.log2(0.5 / eps))) + 1)
    return np.geomspace(0.5, eps, k)


def solve_elliptic(cfg: SolveConfig):
    """Steady problem B^T J*_eps(Bu) = F; returns (u nodal, J per element)."""
    mesh = cfg.mesh
    x = mesh.nodes
    m = mesh.mass
    f_nodes = np.asarray(cfg.f(0.0, x), dtype=float) * np.ones_like(x)
    load = m * f_nodes
    if not mesh.has_dirichlet:
        total = float(load.sum())
        scale = float(np.sqrt(np.sum(m * f_nodes ** 2)))
        if abs(total) > 1e-10 * max(scale, 1e-300) and abs(total) > 0:
            raise CompatibilityError(f"pure Neumann data needs zero mean source, got integral {total:.3e}")
        return _solve_neumann(cfg, load)
    u = np.zeros_like(x)
    zero = np.zeros_like(x)
    for i, eps in enumerate(_continuation_path(cfg.scheme.epsilon)):
        last = i == len(_continuation_path(cfg.scheme.epsilon)) - 1
        flux = _Flux(cfg.model, cfg.scheme.with_epsilon(float(eps)))
        problem = _NodalProblem(mesh, flux, 0.0, zero, load)
        tol = cfg.newton_tol if last else max(cfg.newton_tol, 1e-6)
        u, R, J, _, ok = problem.newton(u, tol, cfg.newton_max)
        if not ok:
            u, R, J, _, ok = problem.picard(u, tol)
        if not ok and last:
            raise SolverError(f"steady solve did not converge (residual {np.abs(R).max():.3e})")
    return u, J


def _solve_neumann(cfg, load):
    """Pure Neumann: zero-mean constraint through a Lagrange multiplier."""
    mesh = cfg.mesh
    m = mesh.mass
    n = mesh.nodes.size
    u = np.zeros(n)
    for i, eps in enumerate(_continuation_path(cfg.scheme.epsilon)):
        flux = _Flux(cfg.model, cfg.scheme.with_epsilon(float(eps)))
        problem = _NodalProblem(mesh, flux, 0.0, np.zeros(n), load)
        R, J, s = problem.residual(u)
        for _ in range(cfg.newton_max):
            if np.abs(R).max() <= cfg.newton_tol:
                break
            diag, off = _stiffness_bands(mesh, s, np.zeros(n))
            A = np.zeros((n + 1, n + 1))
            A[np.arange(n), np.arange(n)] = diag
            A[np.arange(n - 1), np.arange(1, n)] = off
            A[np.arange(1, n), np.arange(n - 1)] = off
            A[n, :n] = m
            A[:n, n] = m
            rhs = np.concatenate([-R, [-float(m @ u)]])
            du = np.linalg.solve(A, rhs)[:n]
            t = 1.0
            norm = np.abs(R).max()
            while t >= 2.0 ** -20:
                Rt, Jt, st = problem.residual(u + t * du)
                if np.abs(Rt).max() < (1 - 1e-4 * t) * norm:
                    break
                t *= 0.5
            u, R, J, s = u + t * du, Rt, Jt, st
        if np.abs(R).max() > cfg.newton_tol and i == len(_continuation_path(cfg.scheme.epsilon)) - 1:
            raise SolverError(f"Neumann steady solve did not converge (residual {np.abs(R).max():.3e})")
    return u, J


@dataclass
class SweepRow:
    epsilon: float
    distance: float
    status: str = "ok"


@dataclass
class EpsSweep:
    rows: list
    reference_eps: float
    trend_ok: bool

    @property
    def ratios(self) -> list:
        d = [r.distance for r in self.rows]
        return [b / a if a > 0 else np.nan for a, b in zip(d, d[1:])]


def _l2q(traj_a: Trajectory, traj_b: Trajectory) -> float:
    m = traj_a.mesh.mass
    total = sum(float(np.sum(m * (a - b) ** 2)) for a, b in zip(traj_a.u_fields[1:], traj_b.u_fields[1:]))
    return float(np.sqrt(traj_a.tau * total))


def sweep_eps(cfg: SolveConfig, eps_list, slack: float = 0.1) -> EpsSweep:
    """Discrete L2(Q) distance of u_eps to a run at min(eps_list)/10."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ParameterDomainError("eps_list must be strictly decreasing")
    ref_eps = min(eps_list) / 10
    ref = solve_parabolic(replace(cfg, scheme=cfg.scheme.with_epsilon(ref_eps)))
    rows = []
    for eps in eps_list:
        try:
            run = solve_parabolic(replace(cfg, scheme=cfg.scheme.with_epsilon(eps)))
            rows.append(SweepRow(eps, _l2q(run, ref)))
        except (StepFailure, SelectionFailure) as exc:
            rows.append(SweepRow(eps, float("nan"), f"failed: {exc}"))
    d = [r.distance for r in rows]
    trend = all(b <= (1 + slack) * a for a, b in zip(d, d[1:]))
    return EpsSweep(rows, ref_eps, bool(trend))


@dataclass
class MeshRow:
    n_elements: int
    h: float
    tau: float
    error: float


@dataclass
class MeshSweep:
    rows: list
    order: Optional[float]


def _tau_for(rule, h, default):
    if callable(rule):
        return float(rule(h))
    if rule in (None, "fixed"):
        return default
    if rule == "h2":
        return h * h
    if rule == "h":
        return h
    raise ConfigError(f"unknown tau rule {rule!r}")


def sweep_mesh(cfg: SolveConfig, n_list, tau_rule="h2", steady: bool = False) -> MeshSweep:
    """Max nodal error against cfg.oracle on each mesh plus the fitted log-log slope."""
    if cfg.oracle is None:
        raise ConfigError("sweep_mesh needs an analytic oracle")
    rows = []
    for n in n_list:
        mesh = build_mesh(n, cfg.mesh.L, cfg.mesh.left_bc, cfg.mesh.right_bc)
        h = mesh.L / n
        if steady:
            u, _ = solve_elliptic(replace(cfg, mesh=mesh))
            t_end, tau = 0.0, 0.0
        else:
            tau = _tau_for(tau_rule, h, cfg.tau)
            run_cfg = replace(cfg, mesh=mesh, tau=min(tau, cfg.T))
            traj = solve_parabolic(run_cfg)
            u, t_end, tau = traj.u_final, traj.times[-1], traj.tau
        err = float(np.abs(u - cfg.oracle(t_end, mesh.nodes)).max())
        rows.append(MeshRow(int(n), h, tau, err))
    order = None
    if len(rows) >= 2:
        slope = np.polyfit(np.log([r.h for r in rows]), np.log([r.error for r in rows]), 1)[0]
        order = float(slope)
    return MeshSweep(rows, order)
