"""Open symmetric convex cones in R^n and the invariants kappa, varrho, theta.

Every cone here contains the positive orthant and is described constructively,
so membership is decided by an explicit oracle.  All oracles are vectorized
over leading axes: ``lam`` may have shape ``(..., n)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb

import numpy as np

__all__ = [
    "ConeError",
    "ConeInvariants",
    "ConeSpec",
    "ConeType",
    "InvariantViolation",
    "Membership",
    "MembershipVerdict",
    "SamplerStarvation",
    "SubsetSumReport",
    "ThetaBounds",
    "ThetaSearchError",
    "builtin_battery",
    "compute_kappa",
    "compute_theta",
    "compute_varrho",
    "cone_membership",
    "cone_type",
    "elementary_symmetric",
    "gamma_inclusion_falsifier",
    "invariant_report",
    "project_cone",
    "sample_interior",
    "sample_near_boundary",
    "transform_cone",
    "verify_subset_sums",
]

R_CAP_DOUBLINGS = 60


class ConeError(ValueError):
    """Invalid cone description or violated operation precondition."""


class InvariantViolation(RuntimeError):
    """A numerically computed invariant contradicts a proven bound."""


class ThetaSearchError(RuntimeError):
    def __init__(self, message, sign_pattern):
        super().__init__(message)
        self.sign_pattern = sign_pattern


class SamplerStarvation(RuntimeError):
    pass


def elementary_symmetric(lam, kmax):
    """Return sigma_0..sigma_kmax of the last axis of ``lam``.

    Output has shape ``lam.shape[:-1] + (kmax + 1,)``.
    """
    lam = np.asarray(lam, dtype=float)
    e = np.zeros(lam.shape[:-1] + (kmax + 1,))
    e[..., 0] = 1.0
    for j in range(lam.shape[-1]):
        e[..., 1:] += lam[..., j, None] * e[..., :-1]
    return e


def _signed_root(x, p):
    return np.sign(x) * np.abs(x) ** (1.0 / p)


class Membership(str, enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    EXTERIOR = "Exterior"


class ConeType(str, enum.Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"


@dataclass(frozen=True)
class MembershipVerdict:
    verdict: Membership
    margin: float
    r_cap_exhausted: bool = False

    @property
    def interior(self) -> bool:
        return self.verdict is Membership.INTERIOR


@dataclass(frozen=True)
class ConeSpec:
    """Constructive description of an open symmetric convex cone.

    ``n`` is always the ambient dimension of the cone itself; for a
    projection it equals ``target_dim`` and ``base.n`` is larger.
    """

    kind: str
    n: int
    k: int | None = None
    rho: float | None = None
    base: ConeSpec | None = None
    target_dim: int | None = None

    def __post_init__(self):
        if self.kind not in ("garding", "pk", "halfspace", "transform", "projection"):
            raise ConeError(f"unknown cone kind {self.kind!r}")
        if self.kind == "projection":
            if self.base is None or self.target_dim is None:
                raise ConeError("projection needs base and target_dim")
            if self.n != self.target_dim or not 1 <= self.target_dim < self.base.n:
                raise ConeError("projection target_dim must satisfy 1 <= target_dim < base.n")
            return
        if self.n < 2:
            raise ConeError(f"dimension must be >= 2, got {self.n}")
        if self.kind in ("garding", "pk"):
            if self.k is None or not 1 <= self.k <= self.n:
                raise ConeError(f"{self.kind} needs 1 <= k <= n, got k={self.k}")
        elif self.kind == "halfspace":
            if self.rho is None or self.rho > 1.0:
                # rho > 1 loses the positive orthant, e.g. (1, eps, ..., eps)
                raise ConeError(f"halfspace cone needs rho <= 1, got {self.rho}")
        elif self.kind == "transform":
            if self.base is None or self.rho is None:
                raise ConeError("transform needs base and rho")
            if self.base.n != self.n:
                raise ConeError("transform must keep the dimension of its base")
            if self.rho == 0.0:
                raise ConeError("transform parameter rho must be nonzero")
            if self.rho >= self.n:
                raise ConeError(f"transform parameter rho={self.rho} must be < n={self.n}")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def garding(cls, n, k):
        return cls("garding", n, k=k)

    @classmethod
    def positive_orthant(cls, n):
        return cls("garding", n, k=n)

    @classmethod
    def pk(cls, n, k):
        return cls("pk", n, k=k)

    @classmethod
    def halfspace(cls, n, rho):
        return cls("halfspace", n, rho=float(rho))

    # -- labels ---------------------------------------------------------------

    @property
    def label(self) -> str:
        if self.kind == "garding":
            return f"Gamma_{self.k}(R^{self.n})"
        if self.kind == "pk":
            return f"P_{self.k}(R^{self.n})"
        if self.kind == "halfspace":
            return f"H[rho={self.rho:g}](R^{self.n})"
        if self.kind == "transform":
            return f"T[{self.base.label}, rho={self.rho:g}]"
        return f"Proj[{self.base.label} -> R^{self.target_dim}]"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.k is not None:
            d["k"] = self.k
        if self.rho is not None:
            d["rho"] = self.rho
        if self.base is not None:
            d["base"] = self.base.to_dict()
        if self.target_dim is not None:
            d["target_dim"] = self.target_dim
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ConeSpec:
        kind = d.get("kind")
        base = cls.from_dict(d["base"]) if d.get("base") is not None else None
        if kind == "transform":
            return transform_cone(base, float(d["rho"]))
        if kind == "projection":
            return project_cone(base, int(d["target_dim"]))
        return cls(kind, int(d["n"]), k=d.get("k"), rho=d.get("rho"))

    # -- transform map --------------------------------------------------------

    def to_base(self, lam):
        """lambda -> mu for a transform cone: mu_i = (sum(lam) - rho lam_i)/(n - rho)."""
        lam = np.asarray(lam, dtype=float)
        return (lam.sum(axis=-1, keepdims=True) - self.rho * lam) / (self.n - self.rho)

    def from_base(self, mu):
        """mu -> lambda: lam_i = (sum(mu) - (n - rho) mu_i)/rho."""
        mu = np.asarray(mu, dtype=float)
        return (mu.sum(axis=-1, keepdims=True) - (self.n - self.rho) * mu) / self.rho

    # -- oracle ---------------------------------------------------------------

    def _check(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.shape[-1] != self.n:
            raise ConeError(f"expected vectors of length {self.n}, got {lam.shape[-1]}")
        return lam

    def _raw(self, lam):
        # degree-1 homogeneous defining value; positive exactly on the interior
        if self.kind == "garding":
            e = elementary_symmetric(lam, self.k)
            vals = [_signed_root(e[..., j] / comb(self.n, j), j) for j in range(1, self.k + 1)]
            return np.min(np.stack(vals, axis=-1), axis=-1)
        if self.kind == "pk":
            return np.sort(lam, axis=-1)[..., : self.k].sum(axis=-1) / self.k
        if self.kind == "halfspace":
            s = lam.sum(axis=-1, keepdims=True)
            return np.min(s - self.rho * lam, axis=-1) / (self.n - self.rho)
        if self.kind == "transform":
            return self.base._raw(self.to_base(lam))
        raise AssertionError("projection has no closed-form defining function")

    def is_interior(self, lam):
        """Boolean interior test, vectorized."""
        lam = self._check(lam)
        if self.kind == "projection":
            return self._projection_interior(lam)
        if self.kind == "transform":
            return self.base.is_interior(self.to_base(lam))
        return self._raw(lam) > 0.0

    def _projection_interior(self, lam):
        flat = lam.reshape(-1, self.n)
        pad = self.base.n - self.n
        scale = np.max(np.abs(flat), axis=-1)
        out = np.zeros(flat.shape[0], dtype=bool)
        pending = scale > 0
        R = scale.copy()
        # Gamma + Gamma_n lies in Gamma, so once (lam, R..R) is inside it stays inside
        for _ in range(R_CAP_DOUBLINGS + 1):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            full = np.concatenate([flat[idx], np.repeat(R[idx, None], pad, axis=1)], axis=1)
            ok = self.base.is_interior(full)
            out[idx[ok]] = True
            pending[idx[ok]] = False
            R[idx] *= 2.0
        return out.reshape(lam.shape[:-1])

    def margin(self, lam):
        """Signed margin normalized by ``max|lam_i|``; zero vector has margin 0."""
        lam = self._check(lam)
        scale = np.max(np.abs(lam), axis=-1)
        if self.kind == "projection":
            return self._projection_margin(lam, scale)
        raw = self._raw(lam)
        safe = np.where(scale > 0, scale, 1.0)
        return np.where(scale > 0, raw / safe, 0.0)

    def _projection_margin(self, lam, scale):
        # sup{s : lam - s*|lam|_inf*1 in cone}, found by bisection on s in [-1.5, 1.5]
        flat = lam.reshape(-1, self.n)
        sc = scale.reshape(-1)
        lo = np.full(sc.shape, -1.5)
        hi = np.full(sc.shape, 1.5)
        ones = np.ones(self.n)
        for _ in range(55):
            mid = 0.5 * (lo + hi)
            ok = self._projection_interior(flat - (mid * sc)[:, None] * ones)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out = np.where(sc > 0, 0.5 * (lo + hi), 0.0)
        return out.reshape(lam.shape[:-1])

    def membership(self, lam, tol=1e-12) -> MembershipVerdict:
        return cone_membership(self, lam, tol)


def cone_membership(spec: ConeSpec, lam, tol=1e-12) -> MembershipVerdict:
    """Classify a single vector as Interior, Boundary or Exterior."""
    if tol <= 0:
        raise ConeError("tolerance must be positive")
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (spec.n,):
        raise ConeError(f"expected a vector of length {spec.n}, got shape {lam.shape}")
    m = float(spec.margin(lam))
    if abs(m) <= tol:
        verdict = Membership.BOUNDARY
    elif m > 0:
        verdict = Membership.INTERIOR
    else:
        verdict = Membership.EXTERIOR
    capped = spec.kind == "projection" and not bool(spec.is_interior(lam))
    return MembershipVerdict(verdict, m, capped)


# -- invariants -----------------------------------------------------------------


def _zeros_then_ones(n, k):
    v = np.ones(n)
    v[:k] = 0.0
    return v


def compute_kappa(spec: ConeSpec, tol=1e-12) -> int:
    """Largest k such that (0,..,0,1,..,1) with k zeros is interior."""
    kappa = 0
    for k in range(spec.n):
        if cone_membership(spec, _zeros_then_ones(spec.n, k), tol).interior:
            kappa = k
    return kappa


def compute_varrho(spec: ConeSpec, tol=1e-10, max_iter=200) -> float:
    """The constant varrho with (1,..,1,1-varrho) on the cone boundary."""
    n = spec.n

    def probe(r):
        v = np.ones(n)
        v[-1] = 1.0 - r
        return v

    if float(spec.margin(probe(1.0))) < -1e-9:
        raise InvariantViolation(f"{spec.label}: (1,..,1,0) outside the closure, varrho < 1")
    if float(spec.margin(probe(float(n)))) > 1e-9:
        raise InvariantViolation(f"{spec.label}: (1,..,1,1-n) interior, varrho > n")
    lo, hi = 1.0, float(n)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if spec.is_interior(probe(mid)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cone_type(spec: ConeSpec) -> ConeType:
    e_n = np.zeros(spec.n)
    e_n[-1] = 1.0
    return ConeType.TYPE2 if cone_membership(spec, e_n).interior else ConeType.TYPE1


def transform_cone(spec: ConeSpec, rho: float, varrho=None) -> ConeSpec:
    """Image of ``spec`` under lam_i = (sum(mu) - (n - rho) mu_i)/rho.

    Valid for rho != 0 and rho <= varrho(spec).
    """
    if rho == 0:
        raise ConeError("rho = 0 is excluded (need rho < varrho_Gamma and rho != 0)")
    vr = compute_varrho(spec) if varrho is None else varrho
    if rho > vr + 1e-9:
        raise ConeError(f"rho = {rho} exceeds varrho_Gamma = {vr:.12g}")
    if rho >= spec.n:
        raise ConeError(f"rho = {rho} >= n makes the transform degenerate")
    return ConeSpec("transform", spec.n, rho=float(rho), base=spec)


def project_cone(spec: ConeSpec, target_dim: int) -> ConeSpec:
    """Projection {lam in R^k : (lam, R, .., R) in Gamma for some R > 0}."""
    kappa = compute_kappa(spec)
    if kappa >= spec.n - 1:
        raise ConeError(f"{spec.label} is type 2; its projection is the whole space")
    if not kappa + 1 <= target_dim <= spec.n - 1:
        raise ConeError(
            f"target_dim must lie in [kappa+1, n-1] = [{kappa + 1}, {spec.n - 1}], got {target_dim}"
        )
    return ConeSpec("projection", target_dim, base=spec, target_dim=target_dim)


# -- sampling -------------------------------------------------------------------


def sample_interior(spec: ConeSpec, m: int, rng, spread=2.0, max_draws=None):
    """Rejection sampler from N(1, spread^2 I) restricted to the interior.

    Transform cones are sampled through their base cone.
    """
    if spec.kind == "transform":
        return spec.from_base(sample_interior(spec.base, m, rng, spread, max_draws))
    max_draws = max_draws or 2000 * m + 10_000
    out, drawn, have = [], 0, 0
    batch = max(64, 2 * m)
    while have < m:
        if drawn >= max_draws:
            raise SamplerStarvation(
                f"{spec.label}: only {have} of {m} interior samples after {drawn} draws"
            )
        x = 1.0 + spread * rng.standard_normal((batch, spec.n))
        drawn += batch
        x = x[spec.is_interior(x)]
        out.append(x)
        have += len(x)
    return np.concatenate(out)[:m]


def _two_level_directions(n, m, rng):
    split = rng.integers(1, n, size=m)
    a = rng.standard_normal(m)
    b = rng.standard_normal(m)
    d = np.where(np.arange(n)[None, :] < split[:, None], a[:, None], b[:, None])
    idx = np.argsort(rng.random((m, n)), axis=1)
    return np.take_along_axis(d, idx, axis=1)


def sample_near_boundary(spec: ConeSpec, m: int, rng, depth=(1.0, 7.0), max_rounds=20):
    """Interior points close to the boundary along rays from (1, .., 1).

    Half the rays use Gaussian directions, half use two-level directions
    (a,..,a,b,..,b) permuted, which reach the extreme points of symmetric
    cones.  Each point sits a relative distance 10**-U inside the boundary
    with U uniform in ``depth``.  Rays that never leave the cone are
    redrawn, so up to ``max_rounds`` batches are used to collect ``m`` points.
    """
    if spec.kind == "transform":
        return spec.from_base(sample_near_boundary(spec.base, m, rng, depth, max_rounds))
    batches, have = [], 0
    for _ in range(max_rounds):
        pts = _near_boundary_batch(spec, m, rng, depth)
        batches.append(pts)
        have += len(pts)
        if have >= m:
            break
    return np.concatenate(batches)[:m]


def _near_boundary_batch(spec: ConeSpec, m: int, rng, depth):
    n = spec.n
    d = np.concatenate(
        [rng.standard_normal((m - m // 2, n)), _two_level_directions(n, m // 2, rng)]
    )
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    one = np.ones(n)
    lo = np.zeros(m)
    hi = np.ones(m)
    bounded = np.zeros(m, dtype=bool)
    for _ in range(40):
        out = ~spec.is_interior(one + hi[:, None] * d)
        bounded |= out
        if bounded.all():
            break
        hi = np.where(bounded, hi, 2.0 * hi)
    hi = np.where(bounded, hi, 1e6)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = spec.is_interior(one + mid[:, None] * d)
        lo = np.where(ok | ~bounded, mid, lo)
        hi = np.where(ok | ~bounded, hi, mid)
    u = rng.uniform(depth[0], depth[1], size=m)
    t = lo * (1.0 - 10.0 ** (-u))
    # rays that never leave the cone carry no boundary information
    pts = (one + t[:, None] * d)[bounded]
    return pts[spec.is_interior(pts)]


# -- theta ----------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaBounds:
    lower: float
    estimate: float
    kappa: int
    evaluations: int
    witness: np.ndarray | None = field(default=None, compare=False)


def compute_theta(spec: ConeSpec, budget=4000, seed=0, kappa=None, varrho=None) -> ThetaBounds:
    """Certified lower bound and estimate for the partial-ellipticity constant.

    The supremum runs over vectors (-a_1,..,-a_kappa, a_{kappa+1},..,a_n) in
    the cone with all a_i > 0 of  a_1 / (n (sum_{i>kappa} a_i - sum_{2<=i<=kappa} a_i)).
    For fixed a_2..a_n the ratio grows with a_1 and membership is monotone in
    a_1, so each candidate is pushed to the boundary by bisection on a_1.
    ``lower`` is attained at a strictly interior point; ``estimate`` at the
    boundary limit.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = spec.n
    kappa = compute_kappa(spec) if kappa is None else kappa
    varrho = compute_varrho(spec) if varrho is None else varrho
    if abs(varrho - 1.0) <= 1e-8:
        return ThetaBounds(1.0 / n, 1.0 / n, kappa, 0)
    rng = np.random.default_rng(seed)
    pattern = "-" * kappa + "+" * (n - kappa)

    if kappa == 0:
        # every positive vector is inside; the ratio tends to 1/n as a_1 grows
        big = 1e8
        v = np.ones(n)
        v[0] = big
        return ThetaBounds(big / (n * v.sum()), 1.0 / n, 0, 1, v)

    def assemble(a1, rest):
        v = np.empty((len(a1), n))
        v[:, 0] = -a1
        v[:, 1:kappa] = -rest[:, : kappa - 1]
        v[:, kappa:] = rest[:, kappa - 1 :]
        return v

    def ratio(a1, rest):
        P = rest[:, kappa - 1 :].sum(axis=1)
        Q = rest[:, : kappa - 1].sum(axis=1)
        return a1 / (n * (P - Q))

    def evaluate(rest):
        P = rest[:, kappa - 1 :].sum(axis=1)
        lo = 1e-12 * P
        feasible = spec.is_interior(assemble(lo, rest))
        hi = P.copy()
        for _ in range(80):
            inside = spec.is_interior(assemble(hi, rest)) & feasible
            if not inside.any():
                break
            lo = np.where(inside, hi, lo)
            hi = np.where(inside, 2.0 * hi, hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            ok = spec.is_interior(assemble(mid, rest))
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        # back off slightly so the certified point keeps a margin above round-off
        lo = lo * (1.0 - 1e-9)
        r_lo = np.where(feasible, ratio(lo, rest), -np.inf)
        r_hi = np.where(feasible, ratio(hi, rest), -np.inf)
        return r_lo, r_hi, lo

    def draw(m):
        rest = np.exp(rng.standard_normal((m, n - 1)))
        rest[:, : kappa - 1] *= 10.0 ** rng.uniform(-4, 0, size=(m, 1))
        return rest

    first = max(1, budget // 4)
    rest = draw(first)
    r_lo, r_hi, a1 = evaluate(rest)
    used = first
    if not np.isfinite(r_lo).any():
        raise ThetaSearchError(
            f"{spec.label}: no feasible sample with sign pattern {pattern} in {used} draws",
            pattern,
        )
    pool_rest, pool_lo, pool_hi, pool_a1 = rest, r_lo, r_hi, a1
    step = 0.5
    while used < budget:
        top = np.argsort(pool_lo)[-8:]
        m = min(64, budget - used)
        parents = pool_rest[top[rng.integers(0, len(top), size=m)]]
        kids = parents * np.exp(step * rng.standard_normal(parents.shape))
        k_lo, k_hi, k_a1 = evaluate(kids)
        used += m
        pool_rest = np.concatenate([pool_rest[top], kids])
        pool_lo = np.concatenate([pool_lo[top], k_lo])
        pool_hi = np.concatenate([pool_hi[top], k_hi])
        pool_a1 = np.concatenate([pool_a1[top], k_a1])
        step = max(0.01, step * 0.93)
    best = int(np.argmax(pool_lo))
    witness = assemble(pool_a1[best : best + 1], pool_rest[best : best + 1])[0]
    return ThetaBounds(
        float(pool_lo[best]), float(np.max(pool_hi)), kappa, used, witness
    )


# -- subset sums and inclusions -------------------------------------------------


@dataclass(frozen=True)
class SubsetSumReport:
    cone: str
    kappa: int
    samples: int
    subset_size: int
    violations: int
    min_subset_sum: float
    type1: bool
    type1_violations: int
    min_cofactor_sum: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.type1_violations == 0


def verify_subset_sums(spec: ConeSpec, samples=10_000, seed=0, kappa=None) -> SubsetSumReport:
    """Check that every (kappa+1)-subset sum of interior points is positive.

    Type 1 cones are also checked for sum_{j != i} lam_j > 0.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    kappa = compute_kappa(spec) if kappa is None else kappa
    rng = np.random.default_rng(seed)
    lam = sample_interior(spec, samples, rng)
    s = np.sort(lam, axis=1)
    # the smallest (kappa+1)-subset sum is the sum of the kappa+1 smallest entries
    sub = s[:, : kappa + 1].sum(axis=1)
    scale = np.max(np.abs(lam), axis=1)
    viol = int(np.count_nonzero(sub <= 0))
    type1 = kappa <= spec.n - 2
    cof = s[:, : spec.n - 1].sum(axis=1)
    viol1 = int(np.count_nonzero(cof <= 0)) if type1 else 0
    return SubsetSumReport(
        spec.label,
        kappa,
        samples,
        kappa + 1,
        viol,
        float(np.min(sub / scale)),
        type1,
        viol1,
        float(np.min(cof / scale)),
    )


def gamma_inclusion_falsifier(spec: ConeSpec, samples=2000, seed=0, kappa=None):
    """Search for points of Gamma_{n-kappa} outside ``spec``.

    Returns the counterexamples found (possibly none).  Nothing is asserted:
    whether Gamma_{n-kappa} always lies inside such a cone is open.
    """
    kappa = compute_kappa(spec) if kappa is None else kappa
    if not 1 <= kappa <= spec.n - 2:
        return np.empty((0, spec.n))
    probe = ConeSpec.garding(spec.n, spec.n - kappa)
    rng = np.random.default_rng(seed)
    pts = np.concatenate(
        [sample_interior(probe, samples // 2, rng), sample_near_boundary(probe, samples // 2, rng)]
    )
    return pts[~spec.is_interior(pts) & (spec.margin(pts) < -1e-9)]


@dataclass(frozen=True)
class ConeInvariants:
    cone: str
    n: int
    kappa: int
    varrho: float
    theta_lower: float
    theta_estimate: float
    cone_type: ConeType
    rigidity: bool
    checks: dict
    tolerances: dict
    sample_counts: dict

    @property
    def checks_passed(self) -> bool:
        return all(self.checks.values())

    def row(self, cone_id) -> dict:
        return {
            "cone_id": cone_id,
            "n": self.n,
            "kappa": self.kappa,
            "varrho": self.varrho,
            "theta_lower": self.theta_lower,
            "type": self.cone_type.value,
            "rigidity": self.rigidity,
            "checks_passed": self.checks_passed,
        }


def invariant_report(
    spec: ConeSpec, theta_budget=2000, seed=0, rigidity_samples=2000, varrho_tol=1e-10, strict=False
) -> ConeInvariants:
    """Compute kappa, varrho, theta and cross-check the proven inequalities.

    With ``strict`` a failed check raises InvariantViolation.
    """
    n = spec.n
    kappa = compute_kappa(spec)
    varrho = compute_varrho(spec, tol=varrho_tol)
    ctype = cone_type(spec)
    theta = compute_theta(spec, budget=theta_budget, seed=seed, kappa=kappa, varrho=varrho)
    tl = theta.lower
    eps = 1e-8
    rigid = abs(varrho - (kappa + 1)) <= eps
    checks = {
        "kappa_range": 0 <= kappa <= n - 1,
        "varrho_range": 1.0 - eps <= varrho <= n + eps,
        "varrho_le_kappa_plus_1": varrho <= kappa + 1 + eps,
        "type_matches_kappa": (ctype is ConeType.TYPE2) == (kappa == n - 1),
        "theta_ordered": tl <= theta.estimate + 1e-15,
        "chain_varrho_ge_1_plus_n_kappa_theta": varrho >= 1.0 + n * kappa * tl - eps,
        "chain_inner": 1.0 + n * kappa * tl >= (1.0 - 1e-9) / (1.0 - kappa * tl),
    }
    if kappa <= n - 3:
        checks["sharp_threshold_ge_2"] = 1.0 + (n - 2) / varrho >= 2.0 - eps
    counts = {"theta_evaluations": theta.evaluations}
    if rigid:
        rng = np.random.default_rng(seed + 1)
        pts = 0.5 + rng.standard_normal((rigidity_samples, n))
        pk = ConeSpec.pk(n, kappa + 1)
        clear = (np.abs(spec.margin(pts)) > 1e-9) & (np.abs(pk.margin(pts)) > 1e-9)
        agree = spec.is_interior(pts[clear]) == pk.is_interior(pts[clear])
        checks["rigidity_equals_P_kappa_plus_1"] = bool(agree.all())
        counts["rigidity_samples"] = int(clear.sum())
    inv = ConeInvariants(
        spec.label,
        n,
        kappa,
        varrho,
        tl,
        theta.estimate,
        ctype,
        rigid,
        checks,
        {"varrho_tol": varrho_tol, "rigidity_tol": eps, "membership_tol": 1e-12},
        counts,
    )
    if strict and not inv.checks_passed:
        failed = [k for k, v in checks.items() if not v]
        raise InvariantViolation(f"{spec.label}: failed checks {failed}")
    return inv


def builtin_battery(max_n=6):
    """Named cones used by reports and acceptance runs (>= 30 entries).

    Each entry is ``(cone_id, spec, equals_some_pk)`` where the flag records
    whether the cone coincides with some P_k as a set.
    """
    out = []
    for n in range(3, max_n + 1):
        for k in range(1, n + 1):
            # Gamma_n = P_1 and Gamma_1 = P_n
            out.append((f"garding_n{n}_k{k}", ConeSpec.garding(n, k), k in (1, n)))
        for k in range(1, n + 1):
            out.append((f"pk_n{n}_k{k}", ConeSpec.pk(n, k), True))
        for rho in (-2.0, 0.5, 1.0):
            # rho = 1 gives sum_{j != i} lam_j > 0, i.e. P_{n-1}
            out.append((f"halfspace_n{n}_rho{rho:g}", ConeSpec.halfspace(n, rho), rho == 1.0))
    for n in (4, 5):
        g2 = ConeSpec.garding(n, 2)
        out.append((f"transform_garding2_n{n}_rho-1", transform_cone(g2, -1.0), False))
        out.append((f"transform_garding2_n{n}_rho1", transform_cone(g2, 1.0), False))
    return out
