"""Damped Newton solver for the reduced prescribed-curvature equation.

On a grid the unknown u defines exp(2u) g and the equation reads

    F(u) = f~(nu) - c psi exp(2 s u) = 0,   nu = eigenvalues of g^{-1} (-A_{exp(2u) g}),

with s the homogeneity degree of f and f~ the transformed operator whose
parameter is (n-2)/(tau-1).  Periodic axes are closed; a non-periodic axis
(the slab) carries Dirichlet data taken from ``ProblemSpec.boundary``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import compute_varrho
from .conformal import (
    ModelManifold,
    ReductionConstants,
    covariant_derivatives,
    curvature,
)
from .fields import ConformalFactor, TrigField
from .grids import Grid
from .symmetric import SymmetricFunctionSpec, TransformedOperator, full_ellipticity_floor, tilde_eval_grad

MIN_STEP = 2.0**-20


class ProblemError(ValueError):
    pass


class DomainExit(ArithmeticError):
    """The eigenvalue vector left the transformed cone at some node."""

    def __init__(self, message, node, margin):
        super().__init__(message)
        self.node = node
        self.margin = margin


# -- problem -----------------------------------------------------------------------


@dataclass
class ProblemSpec:
    manifold: ModelManifold
    fspec: SymmetricFunctionSpec
    tau: float
    alpha: int
    psi: np.ndarray
    boundary: np.ndarray | None = None
    curv_method: str = "auto"
    consts: ReductionConstants = field(init=False, repr=False)
    op: TransformedOperator = field(init=False, repr=False)
    c: float = field(init=False)
    varrho_cone: float = field(init=False)

    def __post_init__(self):
        n = self.manifold.n
        if self.fspec.n != n:
            raise ProblemError("function dimension must match the manifold")
        self.psi = np.broadcast_to(np.asarray(self.psi, dtype=float), self.manifold.grid.shape).copy()
        if not np.all(self.psi > 0):
            raise ProblemError(f"psi must be positive at every node (min {self.psi.min():.3e})")
        denom = n * self.tau + 2 - 2 * n
        if denom == 0:
            raise ProblemError("n tau + 2 - 2n = 0: the prefactor is undefined")
        self.consts = ReductionConstants(self.tau, self.alpha, n)
        self.varrho_cone = compute_varrho(self.fspec.domain)
        rho = self.consts.varrho
        sharp = self.tau < 1 if self.alpha == -1 else rho < self.varrho_cone
        if not sharp or not rho < self.varrho_cone:
            raise ProblemError(
                f"(tau, alpha) = ({self.tau}, {self.alpha}) fails the sharp condition "
                f"for {self.fspec.domain.label}"
            )
        base = (n - 2) / (self.alpha * denom)
        self.c = base**self.fspec.degree
        self.op = TransformedOperator(self.fspec, rho)
        if self.dirichlet and self.boundary is None:
            raise ProblemError("a grid with a non-periodic axis needs Dirichlet data")

    @property
    def cone(self):
        return self.fspec.domain

    @property
    def grid(self) -> Grid:
        return self.manifold.grid

    @property
    def dirichlet(self):
        return self.manifold.kind != "radial_ball" and not all(self.grid.periodic)

    @property
    def degree(self):
        return self.fspec.degree

    @property
    def floor(self):
        """Proven lower bound for min_k f~_k / sum_j f~_j."""
        return full_ellipticity_floor(self.consts.varrho, self.varrho_cone, self.manifold.n)

    def to_dict(self):
        return {
            "manifold": self.manifold.to_dict(),
            "function": self.fspec.to_dict(),
            "tau": self.tau,
            "alpha": self.alpha,
            "c": self.c,
            "varrho": self.consts.varrho,
        }


def neg_schouten(curv, u: ConformalFactor):
    """-A of exp(2u) g: -A_g + hess u + |du|^2 g / 2 - du du."""
    du, hess, _, grad2 = covariant_derivatives(curv, u)
    return -curv.schouten + hess + 0.5 * grad2[..., None, None] * curv.g - du[..., :, None] * du[..., None, :]


def manufactured_psi(manifold, fspec, tau, alpha, u_star, mode="discrete", curv=None):
    """psi making u_star an exact solution of the discrete or continuum equation."""
    curv = curv or curvature(manifold)
    u = ConformalFactor.from_field(manifold.grid, TrigField.parse(u_star), exact=(mode == "continuum"))
    if mode not in ("discrete", "continuum"):
        raise ProblemError(f"unknown manufactured mode {mode!r}")
    n = manifold.n
    rho = (n - 2) / (tau - 1)
    op = TransformedOperator(fspec, rho)
    nu = _eig(curv.g, neg_schouten(curv, u))[0]
    margin = op.tilde_domain.margin(nu)
    if np.min(margin) <= 0:
        k = np.unravel_index(int(np.argmin(margin)), margin.shape)
        raise ProblemError(
            f"u* is not admissible: eigenvalues leave {op.tilde_domain.label} at node {tuple(map(int, k))}"
        )
    val = tilde_eval_grad(op, nu)[0]
    c = ((n - 2) / (alpha * (n * tau + 2 - 2 * n))) ** fspec.degree
    return val / (c * np.exp(2 * fspec.degree * u.u)), u.u


def manufactured_problem(manifold, fspec, tau, alpha, u_star, mode="discrete"):
    """Return (problem, u_star sampled on the grid)."""
    curv = curvature(manifold)
    psi, ustar = manufactured_psi(manifold, fspec, tau, alpha, u_star, mode, curv)
    bdry = ustar if not all(manifold.grid.periodic) else None
    return ProblemSpec(manifold, fspec, tau, alpha, psi, boundary=bdry), ustar


# -- pointwise evaluation ------------------------------------------------------------


def _eig(g, t):
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    m = Linv @ t @ np.swapaxes(Linv, -1, -2)
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    w, Q = np.linalg.eigh(m)
    return w, Q, Linv


@dataclass
class _State:
    u: np.ndarray
    nu: np.ndarray
    Q: np.ndarray
    Linv: np.ndarray
    margin: np.ndarray
    interior: bool
    worst: tuple
    F: np.ndarray | None = None
    grad: np.ndarray | None = None
    du: np.ndarray | None = None


class _Discretization:
    """Grid operators and cached background curvature for one problem."""

    def __init__(self, problem: ProblemSpec):
        self.p = problem
        self.grid = problem.grid
        self.curv = curvature(problem.manifold, method=problem.curv_method)
        self.mask = self.grid.boundary_mask()
        self.active = ~self.mask
        self._ops = None

    def state(self, u, need_values=True) -> _State:
        uf = ConformalFactor(self.grid, u, 2)
        X = neg_schouten(self.curv, uf)
        nu, Q, Linv = _eig(self.curv.g, X)
        margin = self.p.op.tilde_domain.margin(nu)
        m_act = np.where(self.active, margin, np.inf)
        k = np.unravel_index(int(np.argmin(m_act)), margin.shape)
        st = _State(u, nu, Q, Linv, margin, bool(m_act[k] > 0), tuple(int(i) for i in k))
        if need_values and st.interior:
            nu_safe = np.where(self.active[..., None], nu, 1.0)
            val, grad = tilde_eval_grad(self.p.op, nu_safe)
            s = self.p.degree
            F = val - self.p.c * self.p.psi * np.exp(2 * s * u)
            if self.p.dirichlet:
                F = np.where(self.mask, u - self.p.boundary, F)
            st.F, st.grad, st.du = F, grad, uf.du
        return st

    # sparse operators matching Grid.gradient / Grid.hessian at order 2

    def _axis_mats(self, a):
        m, h = self.grid.shape[a], self.grid.h[a]
        if self.grid.periodic[a]:
            D1 = sp.diags([-1.0, 1.0, -1.0, 1.0], [-1, 1, m - 1, -(m - 1)], shape=(m, m)) / (2 * h)
            D2 = sp.diags([1.0, -2.0, 1.0, 1.0, 1.0], [-1, 0, 1, m - 1, -(m - 1)], shape=(m, m)) / h**2
            return D1.tocsr(), D2.tocsr()
        D1 = sp.lil_matrix((m, m))
        D2 = sp.lil_matrix((m, m))
        for i in range(1, m - 1):
            D1[i, i - 1], D1[i, i + 1] = -0.5 / h, 0.5 / h
            D2[i, i - 1], D2[i, i], D2[i, i + 1] = 1 / h**2, -2 / h**2, 1 / h**2
        D1[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        D1[m - 1, m - 3 :] = np.array([1.0, -4.0, 3.0]) / (2 * h)
        D2[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        D2[m - 1, m - 4 :] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        return D1.tocsr(), D2.tocsr()

    def _embed(self, a, D):
        out = None
        for b, m in enumerate(self.grid.shape):
            f = D if b == a else sp.identity(m, format="csr")
            out = f if out is None else sp.kron(out, f, format="csr")
        return out

    @property
    def ops(self):
        if self._ops is None:
            n = self.grid.ndim
            mats = [self._axis_mats(a) for a in range(n)]
            D = [self._embed(a, mats[a][0]) for a in range(n)]
            H = {}
            for a in range(n):
                H[a, a] = self._embed(a, mats[a][1])
                for b in range(a + 1, n):
                    H[a, b] = (D[a] @ D[b]).tocsr()
            self._ops = (D, H)
        return self._ops

    def coefficients(self, st: _State):
        """F^{ij} = L^{-T} Q diag(f~_k) Q^T L^{-1} per node."""
        LtQ = np.swapaxes(st.Linv, -1, -2) @ st.Q
        return np.einsum("...ik,...k,...jk->...ij", LtQ, st.grad, LtQ)

    def jacobian(self, st: _State):
        D, H = self.ops
        curv, n = self.curv, self.grid.ndim
        Fij = self.coefficients(st)
        du = st.du
        # first-order coefficients: -F^ij Gamma^k_ij + tr(F g) g^kl d_l u - 2 F^kj d_j u
        trFg = np.einsum("...ij,...ij->...", Fij, curv.g)
        b = (
            -np.einsum("...ij,...kij->...k", Fij, curv.christoffel)
            + trFg[..., None] * np.einsum("...kl,...l->...k", curv.ginv, du)
            - 2 * np.einsum("...kj,...j->...k", Fij, du)
        )
        s = self.p.degree
        z = -2 * s * self.p.c * self.p.psi * np.exp(2 * s * st.u)
        J = sp.diags(z.ravel())
        for a in range(n):
            J = J + sp.diags(b[..., a].ravel()) @ D[a]
            for c in range(a, n):
                w = Fij[..., a, c] * (1 if a == c else 2)
                J = J + sp.diags(w.ravel()) @ H[a, c]
        if self.p.dirichlet:
            act = self.active.ravel().astype(float)
            J = sp.diags(act) @ J + sp.diags(1.0 - act)
        return J.tocsr()


def residual(problem: ProblemSpec, u) -> np.ndarray:
    """Nodewise residual; raises DomainExit naming the worst node when nu leaves the cone."""
    disc = _Discretization(problem)
    st = disc.state(np.asarray(u, dtype=float))
    if not st.interior:
        raise DomainExit(
            f"eigenvalues leave {problem.op.tilde_domain.label} at node {st.worst}",
            st.worst,
            float(st.margin[st.worst]),
        )
    return st.F


# -- Newton --------------------------------------------------------------------------


@dataclass
class SolveReport:
    u: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    residual_history: list
    step_norms: list
    theta_floor: list
    damping: list
    all_interior: bool
    coefficient_bounds_ok: bool
    linear_fallbacks: int
    message: str

    @property
    def final_residual(self):
        return self.residual_history[-1]

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": self.residual_history,
            "step_norms": self.step_norms,
            "theta_floor": [{"value": v, "node": list(k)} for v, k in self.theta_floor],
            "damping": self.damping,
            "all_interior": self.all_interior,
            "coefficient_bounds_ok": self.coefficient_bounds_ok,
            "linear_fallbacks": self.linear_fallbacks,
            "message": self.message,
        }

    def write_history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "residual", "step_norm", "theta_floor", "damping"])
            for i, r in enumerate(self.residual_history):
                step = self.step_norms[i] if i < len(self.step_norms) else ""
                damp = self.damping[i] if i < len(self.damping) else ""
                th = self.theta_floor[i][0] if i < len(self.theta_floor) else ""
                w.writerow([i, repr(r), repr(step) if step != "" else "", repr(th) if th != "" else "", damp])


def _linear_solve(J, rhs, rtol):
    d = J.diagonal()
    d = np.where(d == 0, 1.0, d)
    M = sp.diags(1.0 / d)
    x, info = spla.gmres(J, rhs, rtol=rtol, atol=0.0, M=M, restart=60, maxiter=20)
    if info != 0:
        return spla.spsolve(J.tocsc(), rhs), True
    return x, False


def solve_closed(
    problem: ProblemSpec,
    u0,
    tol=1e-10,
    max_iter=30,
    floor_abort=1e-12,
    linear_rtol=1e-2,
    check_nodes=64,
) -> SolveReport:
    """Damped inexact Newton iteration from an admissible initial guess."""
    disc = _Discretization(problem)
    u = np.array(u0, dtype=float, copy=True)
    if problem.dirichlet:
        u[disc.mask] = problem.boundary[disc.mask]
    st = disc.state(u)
    if not st.interior:
        raise DomainExit(
            f"initial guess is not admissible at node {st.worst}", st.worst, float(st.margin[st.worst])
        )
    res_hist, steps, floors, damping = [], [], [], []
    fallbacks = 0
    coef_ok = True
    proven = problem.floor
    probe = np.linspace(0, disc.grid.size - 1, min(check_nodes, disc.grid.size)).astype(int)
    converged, message = False, "max_iter exceeded"
    it = 0
    while True:
        rnorm = float(np.max(np.abs(st.F)))
        res_hist.append(rnorm)
        ratio = np.where(disc.active, st.grad.min(axis=-1) / st.grad.sum(axis=-1), np.inf)
        k = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
        floors.append((float(ratio[k]), tuple(int(i) for i in k)))
        # linearized coefficients have g-eigenvalues f~_k, so they lie in [floor * sum, sum]
        gsel = st.grad.reshape(-1, st.grad.shape[-1])[probe]
        act = disc.active.ravel()[probe]
        sums = gsel.sum(axis=1)
        if np.any(act & ((gsel.min(axis=1) < proven * sums * (1 - 1e-9)) | (gsel.max(axis=1) > sums))):
            coef_ok = False
        if rnorm <= tol:
            converged, message = True, "converged"
            break
        if floors[-1][0] < floor_abort:
            message = f"ellipticity floor {floors[-1][0]:.3e} below {floor_abort:g}"
            break
        if it >= max_iter:
            break
        J = disc.jacobian(st)
        delta, fell_back = _linear_solve(J, -st.F.ravel(), linear_rtol)
        fallbacks += fell_back
        delta = delta.reshape(u.shape)
        s = 1.0
        while s >= MIN_STEP:
            trial = disc.state(u + s * delta)
            if trial.interior:
                break
            s *= 0.5
        else:
            message = "damping reached the minimum step without an admissible iterate"
            break
        u = trial.u
        st = trial
        steps.append(float(s * np.max(np.abs(delta))))
        damping.append(s)
        it += 1
    return SolveReport(
        u=u,
        converged=converged,
        iterations=it,
        residual_history=res_hist,
        step_norms=steps,
        theta_floor=floors,
        damping=damping,
        all_interior=True,
        coefficient_bounds_ok=coef_ok,
        linear_fallbacks=fallbacks,
        message=message,
    )
