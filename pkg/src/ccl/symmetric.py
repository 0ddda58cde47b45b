"""Concave symmetric operators f(lambda) and their rho-transforms.

Families: sigma_k^(1/k), (sigma_k/sigma_l)^(1/(k-l)) and sigma_1, all
homogeneous of degree one.  Gradients use the deleted-entry polynomials
sigma_j(lambda | i), which stay accurate near the cone boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import (
    ConeSpec,
    ConeType,
    compute_kappa,
    compute_varrho,
    cone_type,
    elementary_symmetric,
    sample_interior,
    sample_near_boundary,
    transform_cone,
)

__all__ = [
    "DomainError",
    "EllipticityCertificate",
    "ConcavityReport",
    "SymmetricFunctionSpec",
    "TransformedOperator",
    "certify_concavity",
    "certify_full_ellipticity",
    "certify_partial_ellipticity",
    "eval_f",
    "full_ellipticity_dichotomy",
    "full_ellipticity_floor",
    "grad_f",
    "sigma_n_ratio_witness",
    "tilde_eval_grad",
]

MARGIN_FLOOR = 1e-8


class DomainError(ValueError):
    """Evaluation point outside the open cone."""


def deleted_symmetric(lam, kmax):
    """sigma_0..sigma_kmax of lam with entry i removed, shape (..., n, kmax+1)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    idx = np.array([[j for j in range(n) if j != i] for i in range(n)])
    return elementary_symmetric(lam[..., idx], kmax)


@dataclass(frozen=True)
class SymmetricFunctionSpec:
    """One of the built-in operator families on its natural cone.

    ``family`` is ``"sigma_k_root"``, ``"sigma_quotient_root"`` or ``"sigma1"``.
    The domain defaults to the Garding cone Gamma_k, where f > 0 inside and
    f = 0 on the boundary.
    """

    family: str
    n: int
    k: int = 1
    l: int = 0
    domain: ConeSpec | None = None
    degree: float = 1.0

    def __post_init__(self):
        if self.family not in ("sigma_k_root", "sigma_quotient_root", "sigma1"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "sigma1":
            object.__setattr__(self, "k", 1)
            object.__setattr__(self, "l", 0)
        if self.family == "sigma_k_root":
            object.__setattr__(self, "l", 0)
        if not 1 <= self.k <= self.n or not 0 <= self.l < self.k:
            raise ValueError(f"need 0 <= l < k <= n, got k={self.k}, l={self.l}, n={self.n}")
        natural = ConeSpec.garding(self.n, self.k)
        if self.domain is None:
            object.__setattr__(self, "domain", natural)
        elif not _same_set(self.domain, natural):
            raise ValueError(f"{self.family} with k={self.k} lives on {natural.label}, not {self.domain.label}")

    @classmethod
    def sigma_k_root(cls, n, k):
        return cls("sigma_k_root", n, k=k)

    @classmethod
    def quotient(cls, n, k, l):
        return cls("sigma_quotient_root", n, k=k, l=l)

    @classmethod
    def sigma1(cls, n):
        return cls("sigma1", n)

    @property
    def label(self):
        if self.family == "sigma1":
            return "sigma_1"
        if self.family == "sigma_k_root":
            return f"sigma_{self.k}^(1/{self.k})"
        return f"(sigma_{self.k}/sigma_{self.l})^(1/{self.k - self.l})"

    def to_dict(self):
        d = {"family": self.family, "cone": self.domain.to_dict()}
        if self.family != "sigma1":
            d["k"] = self.k
        if self.family == "sigma_quotient_root":
            d["l"] = self.l
        return d

    @classmethod
    def from_dict(cls, d):
        cone = ConeSpec.from_dict(d["cone"])
        return cls(d["family"], cone.n, k=int(d.get("k", 1)), l=int(d.get("l", 0)), domain=cone)


def _same_set(a: ConeSpec, b: ConeSpec) -> bool:
    if a == b:
        return True
    # Gamma_1 = P_n and Gamma_n = P_1 as sets
    pairs = {("garding", 1, "pk", a.n), ("garding", a.n, "pk", 1)}
    return a.n == b.n and (
        (b.kind, b.k, a.kind, a.k) in pairs or (a.kind, a.k, b.kind, b.k) in pairs
    )


def _require_interior(domain: ConeSpec, lam, allow_boundary):
    inside = domain.is_interior(lam)
    if allow_boundary:
        inside = inside | (domain.margin(lam) >= -1e-12)
    if not np.all(inside):
        bad = np.asarray(lam)[~inside] if np.ndim(lam) > 1 else np.asarray(lam)
        raise DomainError(f"point outside {domain.label}: {np.atleast_2d(bad)[0]}")


def _value_and_grad(spec: SymmetricFunctionSpec, lam, need_grad=True):
    lam = np.asarray(lam, dtype=float)
    if spec.family == "sigma1":
        val = lam.sum(axis=-1)
        return val, (np.ones_like(lam) if need_grad else None)
    k, l = spec.k, spec.l
    e = elementary_symmetric(lam, k)
    sk, sl = e[..., k], e[..., l]
    p = 1.0 / (k - l)
    q = np.maximum(sk / sl, 0.0)
    val = q**p
    if not need_grad:
        return val, None
    d = deleted_symmetric(lam, k - 1)
    dk = d[..., k - 1]
    dl = d[..., l - 1] if l >= 1 else np.zeros_like(dk)
    # dq/dlam_i = (sigma_{k-1}(lam|i) sigma_l - sigma_k sigma_{l-1}(lam|i)) / sigma_l^2
    dq = (dk * sl[..., None] - sk[..., None] * dl) / (sl[..., None] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(q > 0, p * q ** (p - 1.0), np.inf)
    grad = coef[..., None] * dq
    return val, grad


def eval_f(spec: SymmetricFunctionSpec, lam, allow_boundary=False):
    """Value of f at lam (vectorized over leading axes)."""
    lam = np.asarray(lam, dtype=float)
    _require_interior(spec.domain, lam, allow_boundary)
    return _value_and_grad(spec, lam, need_grad=False)[0]


def grad_f(spec: SymmetricFunctionSpec, lam, allow_boundary=False):
    """Analytic gradient (f_1, .., f_n)."""
    lam = np.asarray(lam, dtype=float)
    _require_interior(spec.domain, lam, allow_boundary)
    return _value_and_grad(spec, lam)[1]


@dataclass(frozen=True)
class TransformedOperator:
    """f~(lam) = f(mu(lam)) on the transformed cone."""

    base: SymmetricFunctionSpec
    rho: float
    tilde_domain: ConeSpec = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tilde_domain", transform_cone(self.base.domain, self.rho))

    @property
    def n(self):
        return self.base.n

    @property
    def degree(self):
        return self.base.degree

    @property
    def label(self):
        return f"{self.base.label} o mu[rho={self.rho:g}]"


def tilde_eval_grad(op: TransformedOperator, lam, allow_boundary=False):
    """Value and gradient of f~ at lam; grad_i = (sum_j f_j(mu) - rho f_i(mu))/(n - rho)."""
    lam = np.asarray(lam, dtype=float)
    mu = op.tilde_domain.to_base(lam)
    _require_interior(op.base.domain, mu, allow_boundary)
    val, g = _value_and_grad(op.base, mu)
    n, rho = op.n, op.rho
    gt = (g.sum(axis=-1, keepdims=True) - rho * g) / (n - rho)
    return val, gt


# -- certificates -------------------------------------------------------------------


@dataclass
class EllipticityCertificate:
    kind: str
    theta: float
    kappa_used: int
    samples: int
    worst_case: np.ndarray | None
    passed: bool
    margin_floor: float = MARGIN_FLOOR
    violations: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "theta": self.theta,
            "kappa_used": self.kappa_used,
            "samples": self.samples,
            "worst_case": None if self.worst_case is None else self.worst_case.tolist(),
            "passed": self.passed,
            "margin_floor": self.margin_floor,
            "violations": self.violations,
            "details": self.details,
        }


def _battery(domain: ConeSpec, samples, rng):
    """Bulk and near-boundary interior points with margin above the floor."""
    bulk = sample_interior(domain, samples - samples // 2, rng)
    edge = sample_near_boundary(domain, samples // 2, rng)
    pts = np.concatenate([bulk, edge])
    return pts[domain.margin(pts) > MARGIN_FLOOR]


def certify_partial_ellipticity(
    spec: SymmetricFunctionSpec, theta_lower, samples=2000, seed=0, kappa=None
) -> EllipticityCertificate:
    """Check f_i >= n theta f_1 >= theta sum_j f_j for the kappa+1 smallest entries.

    Entries are sorted ascending, so f_1 belongs to the smallest eigenvalue.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    kappa = compute_kappa(spec.domain) if kappa is None else kappa
    lam = np.sort(_battery(spec.domain, samples, rng), axis=1)
    g = grad_f(spec, lam)
    total = g.sum(axis=1)
    head = g[:, : kappa + 1]
    rel = 1e-10
    nonneg = np.all(g >= -rel * total[:, None], axis=1) & (total > 0)
    first = head - n * theta_lower * g[:, :1]
    second = n * theta_lower * g[:, 0] - theta_lower * total
    ok = nonneg & np.all(first >= -rel * total[:, None], axis=1) & (second >= -rel * total)
    slack = np.minimum(first.min(axis=1), second) / total
    worst = int(np.argmin(slack))
    theta_obs = float(np.min(head.min(axis=1) / total))
    return EllipticityCertificate(
        "Partial",
        theta_obs,
        kappa,
        len(lam),
        lam[worst],
        bool(ok.all()),
        violations=int((~ok).sum()),
        details={"theta_lower": theta_lower, "worst_slack": float(slack[worst])},
    )


def full_ellipticity_floor(rho, varrho, n):
    """Proven lower bound for min_i f~_i / sum_j f~_j.

    Concavity and homogeneity give sum_i f_i mu_i >= 0 on the closed cone; with
    mu = (1,..,1,1-varrho) this yields max_i f_i <= sum_j f_j / varrho.
    """
    return (1.0 - max(rho, 0.0) / varrho) / (n - rho)


def certify_full_ellipticity(
    op: TransformedOperator, samples=2000, seed=0, mu_samples=None
) -> EllipticityCertificate:
    """Empirical inf of min_i f~_i / sum_j f~_j over a battery in the tilde cone.

    Points are drawn in the base cone (mu-space) and mapped, so for a fixed
    seed the batteries of a rho-sweep share the same mu samples.
    """
    rng = np.random.default_rng(seed)
    n = op.n
    varrho = compute_varrho(op.base.domain)
    if mu_samples is None:
        mu_samples = _battery(op.base.domain, samples, rng)
    lam = op.tilde_domain.from_base(mu_samples)
    _, g = tilde_eval_grad(op, lam)
    ratio = g.min(axis=1) / g.sum(axis=1)
    worst = int(np.argmin(ratio))
    theta = float(ratio[worst])
    floor = full_ellipticity_floor(op.rho, varrho, n)
    tdtype = cone_type(op.tilde_domain)
    passed = theta > 0 and theta >= floor - 1e-12
    return EllipticityCertificate(
        "Full",
        theta,
        compute_kappa(op.tilde_domain),
        len(lam),
        lam[worst],
        passed,
        violations=int(np.count_nonzero(ratio <= 0)),
        details={
            "rho": op.rho,
            "varrho_base": varrho,
            "proven_floor": floor,
            "tilde_type": tdtype.value,
        },
    )


@dataclass
class ConcavityReport:
    pairs: int
    violations: int
    worst_gap: float
    witness: tuple | None

    @property
    def passed(self):
        return self.violations == 0


def certify_concavity(spec_or_op, samples=2000, seed=0, tol=1e-10) -> ConcavityReport:
    """Midpoint test f((a+b)/2) >= (f(a)+f(b))/2 - tol on sampled pairs."""
    rng = np.random.default_rng(seed)
    if isinstance(spec_or_op, TransformedOperator):
        domain = spec_or_op.tilde_domain

        def f(x):
            return tilde_eval_grad(spec_or_op, x)[0]

    else:
        domain = spec_or_op.domain

        def f(x):
            return eval_f(spec_or_op, x)

    a = _battery(domain, samples, rng)
    b = a[rng.permutation(len(a))]
    # mix scales so pairs are not all comparable in size
    b = b * np.exp(rng.uniform(-1, 1, size=(len(b), 1)))
    gap = f(0.5 * (a + b)) - 0.5 * (f(a) + f(b))
    scale = np.maximum(1.0, np.abs(f(a)) + np.abs(f(b)))
    bad = gap < -tol * scale
    worst = int(np.argmin(gap / scale))
    return ConcavityReport(
        len(a),
        int(bad.sum()),
        float(gap[worst]),
        (a[worst], b[worst]) if bad.any() else None,
    )


def sigma_n_ratio_witness(n, ts):
    """f_n/f_1 for sigma_n^(1/n) along (1,..,1,t); decays like 1/t."""
    spec = SymmetricFunctionSpec.sigma_k_root(n, n)
    lam = np.ones((len(ts), n))
    lam[:, -1] = ts
    g = grad_f(spec, lam)
    return g[:, -1] / g[:, 0]


def full_ellipticity_dichotomy(op: TransformedOperator, samples=1000, seed=0, floor=1e-6):
    """Return (uniformly_elliptic, tilde_is_type2) for comparison.

    Uniform ellipticity is judged empirically: the battery reaches relative
    depth 1e-7 inside the boundary, so a degenerate operator drops below
    ``floor`` there.
    """
    cert = certify_full_ellipticity(op, samples, seed)
    return cert.theta > floor, cone_type(op.tilde_domain) is ConeType.TYPE2
