"""Curvature, modified Schouten tensors and conformal identities on model grids.

Tensor fields are plain arrays of shape ``grid.shape + (n, n)`` with both
indices down.  Christoffel symbols are stored as ``gamma[..., k, i, j]`` for
Gamma^k_ij and the Riemann tensor (dimension three only) as
``riem[..., r, s, m, v]`` for R^r_smv with

    R^r_smv = d_m Gamma^r_vs - d_v Gamma^r_ms + Gamma^r_ml Gamma^l_vs - Gamma^r_vl Gamma^l_ms,

so that Ric_sv = R^r_srv and the round sphere has positive sectional curvature.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cones import ConeSpec, ConeType, compute_kappa, compute_theta, compute_varrho, cone_type
from .fields import ConformalFactor, TrigField
from .grids import Grid

__all__ = [
    "Admissibility",
    "AdmissibilityReport",
    "ConstructionResult",
    "Curvature",
    "ModelManifold",
    "ReductionConstants",
    "V_operator",
    "V_additivity_rhs",
    "classify_admissibility",
    "condition_ladder",
    "conformal_modified_schouten",
    "construct_admissible",
    "covariant_derivatives",
    "curvature",
    "direct_modified_schouten",
    "eigenvalues_wrt",
    "key3_rhs",
    "schouten_algebra",
    "sectional_vs_einstein",
]

KINDS = (
    "flat_torus",
    "sphere_chart",
    "hyperbolic_chart",
    "conformal_torus",
    "radial_ball",
    "slab",
    "warped_torus",
)


class GeometryError(ValueError):
    pass


# -- manifolds -----------------------------------------------------------------


@dataclass(frozen=True)
class ModelManifold:
    """A model Riemannian manifold sampled on a structured grid.

    Charts use the stereographic (sphere) or Poincare ball (hyperbolic)
    conformal factor on the box ``[-half_width, half_width]^n``.  The slab is
    ``[a, b] x T^(n-1)`` with the interval along axis 0.  The warped torus
    ``dx_1^2 + sum_k exp(2 f_k(x_1)) dx_k^2`` takes ``warps`` = (f_2, .., f_n)
    as fields of x_1.
    """

    kind: str
    n: int
    grid: Grid
    radius: float = 1.0
    phi: TrigField | None = None
    warps: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        if self.n < 3:
            raise GeometryError(f"dimension must be >= 3, got {self.n}")
        expected = 1 if self.kind == "radial_ball" else self.n
        if self.grid.ndim != expected:
            raise GeometryError(f"{self.kind} needs a {expected}-dimensional grid")
        if self.kind == "conformal_torus" and self.phi is None:
            raise GeometryError("conformal_torus needs a log-factor field phi")
        if self.kind == "warped_torus" and len(self.warps) != self.n - 1:
            raise GeometryError("warped_torus needs n-1 warping functions of x_1")
        if self.radius <= 0:
            raise GeometryError("radius must be positive")

    # constructors

    @classmethod
    def flat_torus(cls, n, m):
        return cls("flat_torus", n, Grid.torus(n, m))

    @classmethod
    def conformal_torus(cls, n, m, phi):
        return cls("conformal_torus", n, Grid.torus(n, m), phi=TrigField.parse(phi))

    @classmethod
    def warped_torus(cls, n, m, warps):
        return cls("warped_torus", n, Grid.torus(n, m), warps=tuple(TrigField.parse(w) for w in warps))

    @classmethod
    def sphere_chart(cls, n, m, radius=1.0, half_width=0.5):
        w = half_width * radius
        return cls("sphere_chart", n, Grid((m,) * n, (-w,) * n, (w,) * n, (False,) * n), radius=radius)

    @classmethod
    def hyperbolic_chart(cls, n, m, half_width=0.5):
        if half_width * np.sqrt(n) >= 1:
            raise GeometryError("hyperbolic chart box must lie inside the unit ball")
        w = half_width
        return cls("hyperbolic_chart", n, Grid((m,) * n, (-w,) * n, (w,) * n, (False,) * n))

    @classmethod
    def slab(cls, n, m, interval=(1.0, 2.0), m_interval=None):
        shape = (m_interval or m,) + (m,) * (n - 1)
        lower = (float(interval[0]),) + (0.0,) * (n - 1)
        upper = (float(interval[1]),) + (2 * np.pi,) * (n - 1)
        return cls("slab", n, Grid(shape, lower, upper, (False,) + (True,) * (n - 1)))

    @classmethod
    def radial_ball(cls, n, m, outer=1.0):
        return cls("radial_ball", n, Grid((m,), (0.0,), (float(outer),), (False,)))

    @property
    def closed(self):
        return self.kind in ("flat_torus", "conformal_torus", "warped_torus")

    @property
    def conformally_flat(self):
        return self.kind != "warped_torus"

    @property
    def space_form_curvature(self):
        """Constant sectional curvature K, or None."""
        return {
            "flat_torus": 0.0,
            "slab": 0.0,
            "radial_ball": 0.0,
            "sphere_chart": 1.0 / self.radius**2,
            "hyperbolic_chart": -1.0,
        }.get(self.kind)

    def coords(self):
        return self.grid.coords()

    def log_factor(self):
        """(phi, dphi, d2phi) with g = exp(2 phi) delta, for conformally flat kinds."""
        if not self.conformally_flat:
            raise GeometryError(f"{self.kind} is not given as a conformal multiple of delta")
        n = self.n
        shape = self.grid.shape
        if self.kind in ("flat_torus", "slab", "radial_ball"):
            return np.zeros(shape), np.zeros(shape + (n,)), np.zeros(shape + (n, n))
        if self.kind == "conformal_torus":
            return self.phi.on(self.grid)
        x = np.stack(self.coords(), axis=-1)
        s = np.sum(x * x, axis=-1)
        # phi = log(2c) - log(c + eps |x|^2)
        c, eps = (self.radius**2, 1.0) if self.kind == "sphere_chart" else (1.0, -1.0)
        d = c + eps * s
        phi = np.log(2 * c) - np.log(d)
        dphi = -2 * eps * x / d[..., None]
        d2phi = -2 * eps * np.eye(n) / d[..., None, None] + 4 * x[..., :, None] * x[..., None, :] / (
            d**2
        )[..., None, None]
        return phi, dphi, d2phi

    def metric(self):
        n = self.n
        if self.kind == "warped_torus":
            g = np.zeros(self.grid.shape + (n, n))
            g[..., 0, 0] = 1.0
            x1 = self.coords()[0]
            for k, w in enumerate(self.warps, start=1):
                f = w.evaluate([x1] + [x1] * (n - 1), derivatives=0)[0]
                g[..., k, k] = np.exp(2 * f)
            return g
        phi = self.log_factor()[0]
        return np.exp(2 * phi)[..., None, None] * np.eye(n)

    def warp_derivatives(self):
        """Each f_k with its first two x_1-derivatives, shape (n-1, 3) + grid."""
        x1 = self.coords()[0]
        out = []
        for w in self.warps:
            f, df, d2f = w.evaluate([x1] * self.n)
            out.append((f, df[..., 0], d2f[..., 0, 0]))
        return out

    def to_dict(self):
        d = {"kind": self.kind, "n": self.n, "grid": list(self.grid.shape)}
        if self.kind == "sphere_chart":
            d["radius"] = self.radius
        if self.phi is not None:
            d["phi"] = self.phi.to_dict()
        if self.warps:
            d["warps"] = [w.to_dict() for w in self.warps]
        if self.kind in ("slab", "radial_ball", "sphere_chart", "hyperbolic_chart"):
            d["bounds"] = [list(self.grid.lower), list(self.grid.upper)]
        return d

    @classmethod
    def from_dict(cls, d):
        kind, n = d.get("kind"), int(d.get("n", 0))
        grid = [int(m) for m in d.get("grid", [])]
        if not grid:
            raise GeometryError("manifold needs a grid")
        m = grid[0]
        if kind == "flat_torus":
            return cls.flat_torus(n, m)
        if kind == "conformal_torus":
            return cls.conformal_torus(n, m, d["phi"])
        if kind == "warped_torus":
            return cls.warped_torus(n, m, d["warps"])
        if kind == "sphere_chart":
            hw = float(d.get("half_width", 0.5))
            return cls.sphere_chart(n, m, float(d.get("radius", 1.0)), hw)
        if kind == "hyperbolic_chart":
            return cls.hyperbolic_chart(n, m, float(d.get("half_width", 0.5)))
        if kind == "slab":
            lo, hi = d.get("bounds", [[1.0], [2.0]])
            return cls.slab(n, grid[-1], (lo[0], hi[0]), m_interval=m)
        if kind == "radial_ball":
            return cls.radial_ball(n, m)
        raise GeometryError(f"unknown manifold kind {kind!r}")


# -- curvature -----------------------------------------------------------------


def _sym(t):
    return 0.5 * (t + np.swapaxes(t, -1, -2))


@dataclass
class Curvature:
    """Metric quantities on a grid; derived tensors are computed on demand."""

    n: int
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    ric: np.ndarray
    scal: np.ndarray
    riemann: np.ndarray | None = field(default=None, repr=False)
    method: str = "exact"

    @cached_property
    def schouten(self):
        return (self.ric - (self.scal / (2 * (self.n - 1)))[..., None, None] * self.g) / (self.n - 2)

    @cached_property
    def einstein(self):
        return self.ric - 0.5 * self.scal[..., None, None] * self.g

    def modified_schouten(self, tau, alpha):
        """alpha/(n-2) (Ric - tau R/(2(n-1)) g)."""
        n = self.n
        return alpha / (n - 2) * (self.ric - (tau * self.scal / (2 * (n - 1)))[..., None, None] * self.g)

    def trace(self, t):
        return np.einsum("...ij,...ij->...", self.ginv, t)


def _christoffel_from_dg(ginv, dg):
    # dg[..., c, i, j] = d_c g_ij
    low = 0.5 * (
        np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg
    )
    return np.einsum("...kl,...lij->...kij", ginv, low)


def fd_curvature(grid: Grid, g, order=2, riemann=False) -> Curvature:
    """Generic finite-difference curvature of a sampled metric."""
    n = g.shape[-1]
    ginv = np.linalg.inv(g)
    dg = np.stack([grid.diff(g, a, order) for a in range(n)], axis=-3)
    gam = _christoffel_from_dg(ginv, dg)
    # Ric_jk = d_i Gam^i_jk - d_k Gam^i_ij + Gam^i_ip Gam^p_jk - Gam^i_kp Gam^p_ij,
    # with the Christoffel derivatives expanded into compact second differences of g
    d2g = np.empty(g.shape[:-2] + (n, n, n, n))  # d2g[..., c, d, a, b] = d_c d_d g_ab
    for a in range(n):
        for b in range(a, n):
            h = grid.hessian(g[..., a, b], order)
            d2g[..., a, b] = d2g[..., b, a] = h
    # d_c g^il = -g^ia g^lb d_c g_ab
    dginv = -np.einsum("...ia,...lb,...cab->...cil", ginv, ginv, dg)
    low = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
    # d_i L_ljk = (d_i d_k g_lj + d_i d_j g_lk - d_i d_l g_jk) / 2
    dlow_tr = 0.5 * (
        np.einsum("...il,...iklj->...jk", ginv, d2g)
        + np.einsum("...il,...ijlk->...jk", ginv, d2g)
        - np.einsum("...il,...iljk->...jk", ginv, d2g)
    )
    ric = np.einsum("...iil,...ljk->...jk", dginv, low) + dlow_tr
    # Gam^i_ij = g^il d_j g_il / 2
    ric -= 0.5 * (
        np.einsum("...kil,...jil->...jk", dginv, dg) + np.einsum("...il,...jkil->...jk", ginv, d2g)
    )
    del dg, d2g
    ric += np.einsum("...iip,...pjk->...jk", gam, gam)
    ric -= np.einsum("...ikp,...pij->...jk", gam, gam)
    ric = _sym(ric)
    scal = np.einsum("...ij,...ij->...", ginv, ric)
    riem = None
    if riemann:
        if n != 3:
            raise GeometryError("full Riemann tensor is only assembled in dimension 3")
        dgam = np.stack([grid.diff(gam, a, order) for a in range(n)], axis=-4)
        # dgam[..., m, r, i, j] = d_m Gam^r_ij
        riem = (
            np.einsum("...mrvs->...rsmv", dgam)
            - np.einsum("...vrms->...rsmv", dgam)
            + np.einsum("...rml,...lvs->...rsmv", gam, gam)
            - np.einsum("...rvl,...lms->...rsmv", gam, gam)
        )
    return Curvature(n, g, ginv, gam, ric, scal, riem, f"fd{order}")


def _space_form_riemann(g, K):
    # R_rsmv (all down) = K (g_rm g_sv - g_rv g_sm); raise the first index
    ginv = np.linalg.inv(g)
    low = K * (
        np.einsum("...rm,...sv->...rsmv", g, g) - np.einsum("...rv,...sm->...rsmv", g, g)
    )
    return np.einsum("...qr,...rsmv->...qsmv", ginv, low)


def _conformally_flat_exact(man: ModelManifold, riemann=False) -> Curvature:
    n = man.n
    phi, dphi, d2phi = man.log_factor()
    e2 = np.exp(2 * phi)
    eye = np.eye(n)
    g = e2[..., None, None] * eye
    ginv = np.exp(-2 * phi)[..., None, None] * eye
    # Gamma^k_ij = delta^k_i phi_j + delta^k_j phi_i - delta_ij phi_k
    gam = (
        np.einsum("ki,...j->...kij", eye, dphi)
        + np.einsum("kj,...i->...kij", eye, dphi)
        - np.einsum("ij,...k->...kij", eye, dphi)
    )
    K = man.space_form_curvature
    if K is not None:
        ric = (n - 1) * K * g
        scal = np.full(phi.shape, n * (n - 1) * K)
        riem = _space_form_riemann(g, K) if riemann else None
        return Curvature(n, g, ginv, gam, ric, scal, riem, "exact")
    lap0 = np.trace(d2phi, axis1=-2, axis2=-1)
    grad2 = np.sum(dphi * dphi, axis=-1)
    outer = dphi[..., :, None] * dphi[..., None, :]
    ric = -(n - 2) * (d2phi - outer) - (lap0 + (n - 2) * grad2)[..., None, None] * eye
    scal = np.exp(-2 * phi) * np.trace(ric, axis1=-2, axis2=-1)
    if riemann:
        raise GeometryError("exact Riemann tensor is only provided for space forms")
    return Curvature(n, g, ginv, gam, ric, scal, None, "exact")


def _warped_exact(man: ModelManifold) -> Curvature:
    n = man.n
    g = man.metric()
    ginv = np.linalg.inv(g)
    wd = man.warp_derivatives()
    shape = man.grid.shape
    gam = np.zeros(shape + (n, n, n))
    ric = np.zeros(shape + (n, n))
    Fp = sum(df for _, df, _ in wd)
    for k, (f, df, d2f) in enumerate(wd, start=1):
        e = np.exp(2 * f)
        gam[..., 0, k, k] = -df * e
        gam[..., k, 0, k] = gam[..., k, k, 0] = df
        ric[..., 0, 0] -= d2f + df * df
        ric[..., k, k] = -e * (d2f + df * Fp)
    scal = np.einsum("...ij,...ij->...", ginv, ric)
    return Curvature(n, g, ginv, gam, ric, scal, None, "exact")


def curvature(man: ModelManifold, method="auto", order=4, riemann=False) -> Curvature:
    """Curvature of the background metric.

    ``method="exact"`` uses closed forms (space forms, warped products, and
    the conformal-change formula with analytic log-factor derivatives);
    ``"fd"`` differentiates the sampled metric with the given stencil order;
    ``"auto"`` picks fourth-order differences for the conformal torus and
    closed forms elsewhere.
    """
    if method == "auto":
        method = "fd" if man.kind == "conformal_torus" else "exact"
    if method == "fd":
        if man.kind == "radial_ball":
            raise GeometryError("finite-difference curvature needs a Cartesian grid")
        return fd_curvature(man.grid, man.metric(), order, riemann)
    if method != "exact":
        raise ValueError(f"unknown curvature method {method!r}")
    if man.kind == "warped_torus":
        if riemann:
            raise GeometryError("exact Riemann tensor is only provided for space forms")
        return _warped_exact(man)
    if man.kind == "radial_ball":
        n = man.n
        shape = man.grid.shape
        eye = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
        return Curvature(n, eye, eye.copy(), np.zeros(shape + (n, n, n)), np.zeros(shape + (n, n)), np.zeros(shape))
    return _conformally_flat_exact(man, riemann)


# -- conformal change --------------------------------------------------------------


def covariant_derivatives(curv: Curvature, u: ConformalFactor):
    """(du, covariant Hessian, Laplacian, |grad u|^2) of u with respect to g."""
    du = u.du
    hess = u.d2u - np.einsum("...kij,...k->...ij", curv.christoffel, du)
    hess = _sym(hess)
    lap = np.einsum("...ij,...ij->...", curv.ginv, hess)
    grad2 = np.einsum("...ij,...i,...j->...", curv.ginv, du, du)
    return du, hess, lap, grad2


def conformal_modified_schouten(man: ModelManifold, u: ConformalFactor, tau, alpha, curv=None):
    """Modified Schouten tensor of exp(2u) g from the conformal-change formula."""
    curv = curv or curvature(man)
    n = man.n
    du, hess, lap, grad2 = covariant_derivatives(curv, u)
    g = curv.g
    return (
        curv.modified_schouten(tau, alpha)
        + (alpha * (tau - 1) / (n - 2) * lap)[..., None, None] * g
        - alpha * hess
        + (alpha * (tau - 2) / 2 * grad2)[..., None, None] * g
        + alpha * du[..., :, None] * du[..., None, :]
    )


def direct_modified_schouten(man: ModelManifold, u: ConformalFactor, tau, alpha, order=2):
    """Modified Schouten tensor of exp(2u) g by differencing the sampled metric."""
    gt = np.exp(2 * u.u)[..., None, None] * man.metric()
    return fd_curvature(man.grid, gt, order).modified_schouten(tau, alpha)


@dataclass(frozen=True)
class ReductionConstants:
    """varrho = (n-2)/(tau-1), gamma = (tau-2)(n-2)/(2(tau-1))."""

    tau: float
    alpha: int
    n: int

    def __post_init__(self):
        if self.alpha not in (-1, 1):
            raise GeometryError("alpha must be +1 or -1")
        if self.tau == 1:
            raise GeometryError(
                "tau = 1 leaves varrho undefined; use the direct Schouten form "
                "(allowed only for alpha = -1 on a type 2 cone)"
            )

    @property
    def varrho(self):
        return (self.n - 2) / (self.tau - 1)

    @property
    def gamma(self):
        return (self.tau - 2) * (self.n - 2) / (2 * (self.tau - 1))

    @property
    def scale(self):
        """(n-2)/(alpha(tau-1)), the factor turning A^{tau,alpha} into V."""
        return (self.n - 2) / (self.alpha * (self.tau - 1))


def V_operator(man: ModelManifold, u: ConformalFactor, consts: ReductionConstants, curv=None):
    """V[u] = lap u g - varrho hess u + gamma |du|^2 g + varrho du du + A."""
    curv = curv or curvature(man)
    du, hess, lap, grad2 = covariant_derivatives(curv, u)
    g = curv.g
    rho, gam = consts.varrho, consts.gamma
    A = consts.scale * curv.modified_schouten(consts.tau, consts.alpha)
    return (
        lap[..., None, None] * g
        - rho * hess
        + (gam * grad2)[..., None, None] * g
        + rho * du[..., :, None] * du[..., None, :]
        + A
    )


def V_additivity_rhs(man, ubar: ConformalFactor, w: ConformalFactor, consts, curv=None):
    """Expansion of V[ubar + w] in terms of V[w] and the cross terms."""
    curv = curv or curvature(man)
    g = curv.g
    rho, gam = consts.varrho, consts.gamma
    du, hess, lap, grad2 = covariant_derivatives(curv, ubar)
    dw = w.du
    cross = np.einsum("...ij,...i,...j->...", curv.ginv, dw, du)
    return (
        V_operator(man, w, consts, curv)
        + lap[..., None, None] * g
        - rho * hess
        + (gam * grad2)[..., None, None] * g
        + rho * du[..., :, None] * du[..., None, :]
        + (2 * gam * cross)[..., None, None] * g
        + rho * (du[..., :, None] * dw[..., None, :] + dw[..., :, None] * du[..., None, :])
    )


def key3_rhs(man, v: ConformalFactor, N, consts, curv=None):
    """Closed form of V[exp(N v)] - A expressed through v alone."""
    curv = curv or curvature(man)
    g = curv.g
    rho, gam = consts.varrho, consts.gamma
    dv, hess, lap, grad2 = covariant_derivatives(curv, v)
    e = np.exp(N * v.u)
    inner = (
        (lap[..., None, None] * g - rho * hess) / N
        + ((1 + gam * e) * grad2)[..., None, None] * g
        + (rho * (e - 1))[..., None, None] * dv[..., :, None] * dv[..., None, :]
    )
    return (N * N * e)[..., None, None] * inner


def eigenvalues_wrt(g, t, vectors=False):
    """Eigenvalues of g^{-1} t via Cholesky congruence, ascending."""
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    m = _sym(Linv @ t @ np.swapaxes(Linv, -1, -2))
    if vectors:
        return np.linalg.eigh(m)
    return np.linalg.eigvalsh(m)


# -- algebra -------------------------------------------------------------------------


def schouten_algebra(S, tau=1.0, alpha=1):
    """Curvature tensors of an orthonormal frame in which -A = S.

    Returns Ric, R, G, A^{tau,alpha}, and the two sides of the identity
    tr(S) I - varrho S = (n-2)/(alpha(tau-1)) A^{tau,alpha} when tau != 1.
    """
    S = np.asarray(S, dtype=float)
    St = np.swapaxes(S, -1, -2)
    if not np.allclose(S, St, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(np.abs(S))))):
        raise GeometryError("S must be symmetric")
    S = 0.5 * (S + St)
    n = S.shape[-1]
    eye = np.eye(n)
    A = -S
    trA = np.trace(A, axis1=-2, axis2=-1)[..., None, None]
    ric = (n - 2) * A + trA * eye
    scal = 2 * (n - 1) * trA[..., 0, 0]
    G = (n - 2) * (A - trA * eye)
    At = alpha * (A + (1 - tau) * trA / (n - 2) * eye)
    out = {"Ric": ric, "R": scal, "G": G, "A_tau_alpha": At}
    if tau != 1:
        rho = (n - 2) / (tau - 1)
        out["check1_lhs"] = -trA * eye - rho * S
        out["check1_rhs"] = (n - 2) / (alpha * (tau - 1)) * At
    return out


def sectional_vs_einstein(man: ModelManifold, X, Y, method=None, order=2):
    """Return (G(N, N), -Sec(X, Y)) per node with N the unit normal to span(X, Y).

    Sec comes from the Riemann tensor (closed form on space forms, finite
    differences otherwise); G comes from the exact curvature route.
    """
    if man.n != 3:
        raise GeometryError("the Einstein/sectional relation is specific to dimension 3")
    method = method or ("exact" if man.space_form_curvature is not None else "fd")
    rcurv = curvature(man, method=method, order=order, riemann=True)
    ecurv = curvature(man, method="exact")
    g = ecurv.g
    X = np.broadcast_to(np.asarray(X, float), g.shape[:-1])
    Y = np.broadcast_to(np.asarray(Y, float), g.shape[:-1])
    Xl = np.einsum("...rq,...q->...r", rcurv.g, X)
    num = np.einsum("...rsmv,...s,...m,...v,...r->...", rcurv.riemann, Y, X, Y, Xl)
    gxx = np.einsum("...ij,...i,...j->...", rcurv.g, X, X)
    gyy = np.einsum("...ij,...i,...j->...", rcurv.g, Y, Y)
    gxy = np.einsum("...ij,...i,...j->...", rcurv.g, X, Y)
    sec = num / (gxx * gyy - gxy**2)
    nl = np.cross(X, Y)
    nu = np.einsum("...ij,...j->...i", ecurv.ginv, nl)
    nu = nu / np.sqrt(np.einsum("...ij,...i,...j->...", g, nu, nu))[..., None]
    Gnn = np.einsum("...ij,...i,...j->...", ecurv.einstein, nu, nu)
    return Gnn, -sec


# -- admissibility -------------------------------------------------------------------


class Admissibility(str, enum.Enum):
    ADMISSIBLE = "Admissible"
    QUASI = "QuasiAdmissible"
    PSEUDO = "PseudoAdmissible"
    NONE = "None"


@dataclass
class AdmissibilityReport:
    verdict: Admissibility
    worst_margin: float
    worst_node: tuple
    interior_nodes: int
    total_nodes: int
    margins: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "worst_margin": self.worst_margin,
            "worst_node": list(self.worst_node),
            "interior_nodes": self.interior_nodes,
            "total_nodes": self.total_nodes,
        }


def classify_margins(margins, tol=1e-9) -> AdmissibilityReport:
    worst = np.unravel_index(int(np.argmin(margins)), margins.shape)
    wm = float(margins[worst])
    interior = int(np.count_nonzero(margins > tol))
    if wm > tol:
        verdict = Admissibility.ADMISSIBLE
    elif wm >= -tol:
        verdict = Admissibility.QUASI if interior > 0 else Admissibility.PSEUDO
    else:
        verdict = Admissibility.NONE
    return AdmissibilityReport(verdict, wm, tuple(int(i) for i in worst), interior, margins.size, margins)


def tensor_margins(g, t, cone: ConeSpec):
    return cone.margin(eigenvalues_wrt(g, t))


def classify_admissibility(man: ModelManifold, tau, alpha, cone: ConeSpec, tol=1e-9, curv=None):
    """Classify the eigenvalues of g^{-1} A^{tau,alpha}_g against the cone."""
    if cone.n != man.n:
        raise GeometryError("cone dimension must match the manifold dimension")
    curv = curv or curvature(man)
    return classify_margins(tensor_margins(curv.g, curv.modified_schouten(tau, alpha), cone), tol)


def condition_ladder(tau, alpha, cone: ConeSpec, theta_budget=1000, seed=0, tol=1e-9):
    """Evaluate the (tau, alpha) conditions for a cone."""
    if tau == 1 and alpha == 1:
        raise GeometryError("tau = 1 with alpha = +1 has no reduced form and no direct path")
    n = cone.n
    varrho = compute_varrho(cone)
    kappa = compute_kappa(cone)
    theta = compute_theta(cone, budget=theta_budget, seed=seed, kappa=kappa, varrho=varrho).lower
    ctype = cone_type(cone)
    if alpha == -1:
        sharp = tau < 1
        baseline = tau < 1
        c4 = tau <= 2 - 2 / varrho
        c3 = tau <= 0
    elif alpha == 1:
        sharp = tau > 1 + (n - 2) / varrho
        baseline = tau > 1 + (n - 2) / (1 + n * kappa * theta)
        c4 = tau >= 2
        c3 = tau >= 2
    else:
        raise GeometryError("alpha must be +1 or -1")
    direct = tau == 1 and alpha == -1 and ctype is ConeType.TYPE2
    out = {
        "tau": tau,
        "alpha": alpha,
        "cone": cone.label,
        "varrho_cone": varrho,
        "kappa": kappa,
        "theta_lower": theta,
        "cone_type": ctype.value,
        "sharp": bool(sharp),
        "baseline": bool(baseline),
        "tau_alpha_4": bool(c4),
        "tau_alpha_3": bool(c3),
        "type2_direct_path": bool(direct),
        "admissible_parameters": bool(sharp or direct),
    }
    if tau != 1:
        c = ReductionConstants(tau, alpha, n)
        vec = np.full(n, c.gamma)
        vec[-1] += c.varrho
        out.update(
            varrho=c.varrho,
            gamma=c.gamma,
            gamma_plus_varrho=c.gamma + c.varrho,
            key_vector_in_closure=bool(float(cone.margin(vec)) >= -tol),
        )
    return out


# -- construction ----------------------------------------------------------------


@dataclass
class ConstructionResult:
    success: bool
    N: float | None
    u_bar: ConformalFactor | None
    trail: list
    worst_node: tuple
    worst_margin: float
    hypotheses: dict
    verified: bool = False

    def to_dict(self):
        return {
            "success": self.success,
            "N": self.N,
            "trail": [{"N": N, "min_margin": m} for N, m in self.trail],
            "worst_node": list(self.worst_node),
            "worst_margin": self.worst_margin,
            "hypotheses": self.hypotheses,
            "verified": self.verified,
        }


def construct_admissible(
    man: ModelManifold,
    cone: ConeSpec,
    tau,
    alpha,
    v: ConformalFactor,
    N_max=2.0**12,
    tol=1e-9,
    curv=None,
) -> ConstructionResult:
    """Doubling search for N with exp(2 exp(N v)) g admissible.

    The search uses chain-rule derivatives of exp(N v); an accepted N is then
    re-checked with stencil derivatives of the sampled field.
    """
    consts = ReductionConstants(tau, alpha, man.n)
    curv = curv or curvature(man)
    hyp = {}
    if man.closed:
        hyp["v_le_minus_1"] = bool(np.max(v.u) <= -1.0)
        bg = classify_admissibility(man, tau, alpha, cone, tol, curv)
        hyp["background"] = bg.verdict.value
        hyp["background_quasi"] = bg.verdict in (Admissibility.ADMISSIBLE, Admissibility.QUASI)
    else:
        _, _, _, grad2 = covariant_derivatives(curv, v)
        hyp["min_grad_v_sq"] = float(np.min(grad2))
        hyp["grad_v_nonvanishing"] = bool(np.min(grad2) > 1e-8)
        vec = np.full(man.n, consts.gamma)
        vec[-1] += consts.varrho
        hyp["key_vector_in_closure"] = bool(float(cone.margin(vec)) >= -tol)
    trail = []
    N = 1.0
    worst_node, worst_margin = (), -np.inf
    while N <= N_max:
        ubar = ConformalFactor.exp_of(v, N)
        marg = tensor_margins(curv.g, V_operator(man, ubar, consts, curv), cone)
        k = np.unravel_index(int(np.argmin(marg)), marg.shape)
        trail.append((N, float(marg[k])))
        worst_node, worst_margin = tuple(int(i) for i in k), float(marg[k])
        if worst_margin > tol:
            stencil = ubar.with_stencil(v.order)
            ms = tensor_margins(curv.g, V_operator(man, stencil, consts, curv), cone)
            verified = bool(np.min(ms) > tol)
            return ConstructionResult(True, N, ubar, trail, worst_node, worst_margin, hyp, verified)
        N *= 2
    return ConstructionResult(False, None, None, trail, worst_node, worst_margin, hyp)
