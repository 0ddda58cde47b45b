"""Radial blow-up problem on the unit ball by truncation and continuation.

For u = u(r) on the flat ball, -A of exp(2u) delta has eigenvalues

    nu = (u'' - u'^2/2, u'/r + u'^2/2, ..., u'/r + u'^2/2),

so the reduced equation becomes a second-order ODE.  Each truncated problem
on r <= 1 - eps with Dirichlet value log(2/(1 - (1 - eps)^2)) is solved by
shooting on u(0); eps is then decreased and the profiles compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .solver import ProblemError, ProblemSpec
from .symmetric import tilde_eval_grad

HEURISTIC_NOTE = (
    "eps-truncation continuation; agreement with the maximal complete solution is "
    "a heuristic supported by monotonicity in eps, not a proof"
)


class RadialSolveError(RuntimeError):
    pass


def hyperbolic_profile(r):
    return np.log(2.0 / (1.0 - np.asarray(r) ** 2))


def boundary_value(eps):
    R = 1.0 - eps
    return float(np.log(2.0 / (1.0 - R * R)))


@dataclass
class RadialReport:
    r: np.ndarray = field(repr=False)
    eps: list
    profiles: list = field(repr=False)
    centers: list
    boundary_values: list
    monotone: bool
    min_increment: float
    extrapolated_center: float
    note: str = HEURISTIC_NOTE

    def sup_error(self, reference, r_max=0.9, which=-1):
        sel = self.r <= r_max + 1e-12
        return float(np.max(np.abs(self.profiles[which][sel] - reference(self.r[sel]))))

    def to_dict(self):
        return {
            "eps": self.eps,
            "centers": self.centers,
            "boundary_values": self.boundary_values,
            "monotone": self.monotone,
            "min_increment": self.min_increment,
            "extrapolated_center": self.extrapolated_center,
            "note": self.note,
        }


class _RadialODE:
    def __init__(self, problem: ProblemSpec):
        man = problem.manifold
        if man.kind != "radial_ball":
            raise ProblemError("the radial solver needs a radial_ball manifold")
        self.n = man.n
        self.op = problem.op
        self.s = problem.degree
        self.cpsi_nodes = problem.c * problem.psi
        self.r_nodes = man.grid.axis(0)
        self.sigma1 = problem.fspec.family == "sigma1"
        self.f_one = float(tilde_eval_grad(self.op, np.ones(self.n))[0])

    def cpsi(self, r):
        return np.interp(r, self.r_nodes, self.cpsi_nodes)

    def second_derivative(self, r, u, up):
        target = self.cpsi(r) * np.exp(2 * self.s * u)
        t = up / r + 0.5 * up * up
        if self.sigma1:
            return target - (self.n - 1) * up / r - 0.5 * (self.n - 2) * up * up
        # f~ is increasing in the first slot, so Newton on x = u'' from a point inside the cone
        nu = np.full(self.n, t)
        x = max(t, 0.0) + (target / self.f_one) ** (1 / self.s)
        for _ in range(60):
            nu[0] = x - 0.5 * up * up
            if not self.op.tilde_domain.is_interior(nu):
                x = 2 * abs(x) + 1.0
                continue
            val, g = tilde_eval_grad(self.op, nu)
            dx = (val - target) / g[0]
            x_new = x - dx
            nu[0] = x_new - 0.5 * up * up
            while not self.op.tilde_domain.is_interior(nu):
                dx *= 0.5
                x_new = x - dx
                nu[0] = x_new - 0.5 * up * up
            if abs(x_new - x) <= 1e-14 * max(1.0, abs(x)):
                return x_new
            x = x_new
        raise RadialSolveError("pointwise solve for u'' did not converge")

    def center_curvature(self, a):
        return (self.cpsi(0.0) * np.exp(2 * self.s * a) / self.f_one) ** (1 / self.s)

    def shoot(self, a, R, rtol, dense=False):
        b = self.center_curvature(a)
        r0 = 1e-4 * R
        y0 = [a + 0.5 * b * r0 * r0, b * r0]

        def rhs(r, y):
            return [y[1], self.second_derivative(r, y[0], y[1])]

        def blowup(r, y):
            return min(60.0 - (y[0] - a), 1e6 - y[1])

        blowup.terminal = True
        sol = solve_ivp(
            rhs, (r0, R), y0, method="DOP853", rtol=rtol, atol=rtol, events=blowup, dense_output=dense
        )
        if sol.status == 1 or (sol.status == -1 and sol.y[1, -1] > 1e3):
            return np.inf, None
        if sol.status != 0:
            raise RadialSolveError(f"ODE integration failed: {sol.message}")
        return float(sol.y[0, -1]), sol


def _solve_truncated(ode: _RadialODE, eps, M, rtol):
    R = 1.0 - eps

    def mismatch(a):
        return ode.shoot(a, R, rtol)[0] - M

    lo, hi = M - 1.0, M
    step = 1.0
    while mismatch(lo) >= 0:
        step *= 2
        lo = M - step
        if step > 1e3:
            raise RadialSolveError("could not bracket the center value from below")
    while mismatch(hi) <= 0:
        hi += 1.0
        if hi > M + 1e3:
            raise RadialSolveError("could not bracket the center value from above")
    a = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    _, sol = ode.shoot(a, R, rtol, dense=True)
    return a, sol


def solve_radial_blowup(
    problem: ProblemSpec,
    eps_schedule=(0.2, 0.1, 0.05, 0.025),
    rtol=1e-12,
    boundary_offset=0.0,
    mono_tol=1e-10,
) -> RadialReport:
    """Continuation in eps of the truncated Dirichlet problems.

    ``boundary_offset`` shifts every Dirichlet value; it lets the constant-shift
    homogeneity be checked on the truncated problems.
    """
    eps_schedule = list(eps_schedule)
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])) or not 0 < eps_schedule[-1] < 1:
        raise ProblemError("eps schedule must be strictly decreasing in (0, 1)")
    ode = _RadialODE(problem)
    r = ode.r_nodes
    profiles, centers, bvals = [], [], []
    min_inc = np.inf
    for eps in eps_schedule:
        M = boundary_value(eps) + boundary_offset
        a, sol = _solve_truncated(ode, eps, M, rtol)
        R = 1.0 - eps
        prof = np.full(r.shape, np.nan)
        inside = r <= R
        r_in = r[inside]
        prof[inside] = np.where(
            r_in < sol.t[0], a + 0.5 * ode.center_curvature(a) * r_in**2, sol.sol(np.maximum(r_in, sol.t[0]))[0]
        )
        if profiles:
            common = ~np.isnan(profiles[-1]) & inside
            inc = float(np.min(prof[common] - profiles[-1][common]))
            min_inc = min(min_inc, inc)
            if inc < -mono_tol:
                raise RadialSolveError(
                    f"continuation is not monotone: profile dropped by {-inc:.3e} at eps={eps}"
                )
        profiles.append(prof)
        centers.append(a)
        bvals.append(M)
    # linear extrapolation of the center value to eps = 0 from the last two steps
    if len(centers) > 1:
        e1, e2 = eps_schedule[-2], eps_schedule[-1]
        extrap = centers[-1] + (centers[-1] - centers[-2]) * e2 / (e1 - e2)
    else:
        extrap = centers[-1]
    return RadialReport(
        r=r,
        eps=eps_schedule,
        profiles=profiles,
        centers=centers,
        boundary_values=bvals,
        monotone=bool(min_inc >= -mono_tol),
        min_increment=float(min_inc) if np.isfinite(min_inc) else 0.0,
        extrapolated_center=float(extrap),
    )
