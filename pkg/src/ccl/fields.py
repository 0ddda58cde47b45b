"""Scalar fields on grids: analytic test fields and conformal factors.

``TrigField`` is a finite sum of products of one-variable factors, enough to
express every test field used here (trigonometric perturbations, ``log x``,
linear ramps) with exact first and second derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grids import Grid

_FACTORS = ("sin", "cos", "exp", "log", "id")


def _factor(fn, k, p, x):
    """Value, first and second derivative of one factor at x."""
    if fn == "sin":
        s, c = np.sin(k * x + p), np.cos(k * x + p)
        return s, k * c, -k * k * s
    if fn == "cos":
        s, c = np.sin(k * x + p), np.cos(k * x + p)
        return c, -k * s, -k * k * c
    if fn == "exp":
        e = np.exp(k * x + p)
        return e, k * e, k * k * e
    if fn == "log":
        y = k * x + p
        return np.log(y), k / y, -k * k / y**2
    if fn == "id":
        y = k * x + p
        return y, np.full_like(x, k), np.zeros_like(x)
    raise ValueError(f"unknown factor {fn!r}")


@dataclass(frozen=True)
class Factor:
    axis: int
    fn: str
    k: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.fn not in _FACTORS:
            raise ValueError(f"factor function must be one of {_FACTORS}, got {self.fn!r}")


@dataclass(frozen=True)
class TrigField:
    """sum_t coef_t * prod_f fn_f(k_f x_{axis_f} + phase_f)."""

    terms: tuple = ()

    @classmethod
    def parse(cls, spec):
        """Build from ``{"terms": [{"coef": c, "factors": [{"axis", "fn", "k", "phase"}]}]}``."""
        if isinstance(spec, TrigField):
            return spec
        terms = []
        for t in spec.get("terms", []):
            factors = tuple(
                Factor(int(f["axis"]), f["fn"], float(f.get("k", 1.0)), float(f.get("phase", 0.0)))
                for f in t.get("factors", [])
            )
            terms.append((float(t["coef"]), factors))
        return cls(tuple(terms))

    def to_dict(self):
        return {
            "terms": [
                {
                    "coef": c,
                    "factors": [
                        {"axis": f.axis, "fn": f.fn, "k": f.k, "phase": f.phase} for f in fs
                    ],
                }
                for c, fs in self.terms
            ]
        }

    def __add__(self, other):
        return TrigField(self.terms + TrigField.parse(other).terms)

    def scaled(self, s):
        return TrigField(tuple((s * c, fs) for c, fs in self.terms))

    @staticmethod
    def constant(c):
        return TrigField(((float(c), ()),))

    @staticmethod
    def monomial(coef, *factors):
        return TrigField(((float(coef), tuple(Factor(*f) for f in factors)),))

    def evaluate(self, coords, derivatives=2):
        """Return ``(u, du, d2u)`` on the coordinate arrays ``coords``."""
        n = len(coords)
        shape = np.shape(coords[0])
        u = np.zeros(shape)
        du = np.zeros(shape + (n,))
        d2u = np.zeros(shape + (n, n))
        for coef, factors in self.terms:
            vals = [_factor(f.fn, f.k, f.phase, coords[f.axis]) for f in factors]
            m = len(factors)

            def prod_except(skip):
                out = np.full(shape, coef)
                for q in range(m):
                    if q not in skip:
                        out = out * vals[q][0]
                return out

            u += prod_except(())
            if derivatives < 1:
                continue
            for p in range(m):
                a = factors[p].axis
                du[..., a] += vals[p][1] * prod_except((p,))
                if derivatives < 2:
                    continue
                d2u[..., a, a] += vals[p][2] * prod_except((p,))
                for q in range(m):
                    if q == p:
                        continue
                    b = factors[q].axis
                    d2u[..., a, b] += vals[p][1] * vals[q][1] * prod_except((p, q))
        return u, du, d2u

    def on(self, grid: Grid):
        return self.evaluate(grid.coords())


@dataclass
class ConformalFactor:
    """A scalar field u on a grid with cached coordinate derivatives.

    Without ``exact`` the caches come from the grid stencil of the given
    order; with ``exact`` (value, gradient, Hessian) they are taken as given.
    """

    grid: Grid
    u: np.ndarray
    order: int = 2
    exact: tuple | None = field(default=None, repr=False)

    @classmethod
    def from_field(cls, grid: Grid, tf: TrigField, exact=True, order=2):
        u, du, d2u = tf.on(grid)
        return cls(grid, u, order, (du, d2u) if exact else None)

    @classmethod
    def exp_of(cls, v: "ConformalFactor", N: float):
        """u = exp(N v) with derivatives from the chain rule on v's caches."""
        e = np.exp(N * v.u)
        du = N * e[..., None] * v.du
        d2u = N * e[..., None, None] * (v.d2u + N * v.du[..., :, None] * v.du[..., None, :])
        return cls(v.grid, e, v.order, (du, d2u))

    @classmethod
    def constant(cls, grid: Grid, c):
        n = grid.ndim
        return cls(grid, np.full(grid.shape, float(c)), 2, (np.zeros(grid.shape + (n,)), np.zeros(grid.shape + (n, n))))

    def with_stencil(self, order=None):
        """Same values, derivatives regenerated from the stencil."""
        return ConformalFactor(self.grid, self.u.copy(), order or self.order, None)

    @cached_property
    def du(self):
        if self.exact is not None:
            return self.exact[0]
        return self.grid.gradient(self.u, self.order)

    @cached_property
    def d2u(self):
        if self.exact is not None:
            return self.exact[1]
        return self.grid.hessian(self.u, self.order)

    def __add__(self, other: "ConformalFactor"):
        exact = None
        if self.exact is not None and other.exact is not None:
            exact = (self.du + other.du, self.d2u + other.d2u)
        return ConformalFactor(self.grid, self.u + other.u, self.order, exact)
