import itertools
from math import prod, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccl.cones import ConeSpec, compute_theta, sample_interior
from ccl.symmetric import (
    DomainError,
    SymmetricFunctionSpec,
    TransformedOperator,
    certify_concavity,
    certify_full_ellipticity,
    certify_partial_ellipticity,
    eval_f,
    full_ellipticity_dichotomy,
    grad_f,
    sigma_n_ratio_witness,
    tilde_eval_grad,
)


def sigma_bruteforce(lam, j):
    return sum(prod(c) for c in itertools.combinations(lam, j))


def f_oracle(spec, lam):
    if spec.family == "sigma1":
        return sum(lam)
    k, l = spec.k, spec.l
    sl = sigma_bruteforce(lam, l) if l else 1.0
    return (sigma_bruteforce(lam, k) / sl) ** (1.0 / (k - l))


def central_diff(fun, lam, h):
    g = np.zeros_like(lam)
    for i in range(len(lam)):
        e = np.zeros_like(lam)
        e[i] = h
        g[i] = (fun(lam + e) - fun(lam - e)) / (2 * h)
    return g


FAMILIES = [
    SymmetricFunctionSpec.sigma1(4),
    SymmetricFunctionSpec.sigma_k_root(4, 2),
    SymmetricFunctionSpec.sigma_k_root(5, 3),
    SymmetricFunctionSpec.sigma_k_root(4, 4),
    SymmetricFunctionSpec.quotient(4, 3, 1),
    SymmetricFunctionSpec.quotient(5, 2, 1),
    SymmetricFunctionSpec.quotient(5, 4, 2),
]
ids = [s.label + f"_n{s.n}" for s in FAMILIES]


def test_eval_examples():
    assert eval_f(SymmetricFunctionSpec.sigma_k_root(4, 2), np.ones(4)) == pytest.approx(sqrt(6))
    assert eval_f(SymmetricFunctionSpec.sigma1(5), np.full(5, 0.7)) == pytest.approx(3.5)
    assert eval_f(SymmetricFunctionSpec.quotient(3, 2, 1), np.ones(3)) == pytest.approx(1.0)


def test_grad_examples():
    assert np.array_equal(grad_f(SymmetricFunctionSpec.sigma1(3), np.array([1.0, -0.2, 3])), np.ones(3))
    g = grad_f(SymmetricFunctionSpec.sigma_k_root(4, 2), np.ones(4))
    assert np.allclose(g, 3 / (2 * sqrt(6)), atol=1e-15)
    r = sigma_n_ratio_witness(5, np.array([2.0, 7.0, 1e3]))
    assert np.allclose(r, [1 / 2, 1 / 7, 1e-3], rtol=1e-12)


def test_domain_error():
    with pytest.raises(DomainError):
        eval_f(SymmetricFunctionSpec.sigma_k_root(4, 2), np.array([-1.0, -1, 1, 1]))
    with pytest.raises(DomainError):
        grad_f(SymmetricFunctionSpec.sigma1(3), np.array([-1.0, -1, 1]))


def test_family_domain_mismatch():
    with pytest.raises(ValueError):
        SymmetricFunctionSpec("sigma_k_root", 4, k=2, domain=ConeSpec.garding(4, 3))
    # Gamma_1 and P_n are the same set
    SymmetricFunctionSpec("sigma1", 4, domain=ConeSpec.pk(4, 4))


@pytest.mark.parametrize("spec", FAMILIES, ids=ids)
def test_values_match_bruteforce(spec, rng):
    lam = sample_interior(spec.domain, 50, rng)
    got = eval_f(spec, lam)
    want = [f_oracle(spec, list(v)) for v in lam]
    assert np.allclose(got, want, rtol=1e-10)


@pytest.mark.parametrize("spec", FAMILIES, ids=ids)
def test_gradient_second_order(spec, rng):
    lam = sample_interior(spec.domain, 20, rng)
    lam = lam[spec.domain.margin(lam) > 0.05][:5]
    for v in lam:
        exact = grad_f(spec, v)
        errs = []
        hs = [1e-3, 5e-4, 2.5e-4]
        for h in hs:
            fd = central_diff(lambda x: f_oracle(spec, list(x)), v, h)
            errs.append(np.max(np.abs(fd - exact)) / np.max(np.abs(exact)))
        assert errs[-1] <= 1e-4
        if errs[0] > 1e-11:
            order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
            assert order >= 1.9


@pytest.mark.parametrize("spec", FAMILIES, ids=ids)
def test_euler_identity(spec, rng):
    lam = sample_interior(spec.domain, 1000, rng)
    lhs = np.einsum("ij,ij->i", lam, grad_f(spec, lam))
    assert np.allclose(lhs, spec.degree * eval_f(spec, lam), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("spec", FAMILIES, ids=ids)
def test_homogeneity_and_positivity(spec, rng):
    lam = sample_interior(spec.domain, 300, rng)
    t = np.exp(rng.uniform(-3, 3, size=300))
    f = eval_f(spec, lam)
    assert np.all(f > 0)
    assert np.allclose(eval_f(spec, t[:, None] * lam), t * f, rtol=1e-10)


@pytest.mark.parametrize("spec", FAMILIES[1:], ids=ids[1:])
def test_vanishes_at_boundary(spec, rng):
    from ccl.cones import sample_near_boundary

    pts = sample_near_boundary(spec.domain, 200, rng, depth=(10, 12))
    vals = eval_f(spec, pts) / np.max(np.abs(pts), axis=1)
    # sigma_k vanishes linearly at the boundary, so f decays like depth^(1/k)
    assert np.max(vals) < 10 * 10.0 ** (-10 / spec.k)


@given(st.integers(0, len(FAMILIES) - 1), st.integers(0, 2**31), st.randoms(use_true_random=False))
def test_gradient_permutation_equivariance(which, seed, rnd):
    spec = FAMILIES[which]
    v = sample_interior(spec.domain, 1, np.random.default_rng(seed))[0]
    perm = list(range(spec.n))
    rnd.shuffle(perm)
    g = grad_f(spec, v)
    gp = grad_f(spec, v[perm])
    assert np.allclose(gp, g[perm], rtol=1e-13, atol=0)
    assert eval_f(spec, v[perm]) == pytest.approx(eval_f(spec, v), rel=1e-14)


# -- transformed operator ----------------------------------------------------------


def test_tilde_sigma1_is_trace(rng):
    for rho in (-3.0, -0.5, 0.5, 2.0, 3.5):
        op = TransformedOperator(SymmetricFunctionSpec.sigma1(4), rho)
        lam = op.tilde_domain.from_base(sample_interior(op.base.domain, 200, rng))
        val, g = tilde_eval_grad(op, lam)
        assert np.allclose(val, lam.sum(axis=1), rtol=1e-13, atol=1e-13)
        assert np.allclose(g, 1.0, rtol=1e-13)


def test_tilde_example():
    op = TransformedOperator(SymmetricFunctionSpec.sigma_k_root(4, 2), 1.0)
    val, g = tilde_eval_grad(op, np.ones(4))
    assert val == pytest.approx(sqrt(6))
    assert np.allclose(g, 3 / (2 * sqrt(6)))


@pytest.mark.parametrize("rho", [-2.0, 0.5, 1.5])
def test_tilde_gradient_matches_composed_differences(rho, rng):
    base = SymmetricFunctionSpec.sigma_k_root(4, 2)
    op = TransformedOperator(base, rho)
    mu = sample_interior(base.domain, 10, rng)
    mu = mu[base.domain.margin(mu) > 0.05][:4]
    n = 4

    def composed(x):
        s = sum(x)
        return f_oracle(base, [(s - rho * xi) / (n - rho) for xi in x])

    for v in op.tilde_domain.from_base(mu):
        _, g = tilde_eval_grad(op, v)
        fd = central_diff(composed, v, 1e-4)
        assert np.allclose(fd, g, rtol=1e-6, atol=1e-8)


def test_tilde_diagonal_derivative():
    op = TransformedOperator(SymmetricFunctionSpec.quotient(5, 3, 1), -1.0)
    _, g = tilde_eval_grad(op, np.ones(5))
    val, _ = tilde_eval_grad(op, np.ones(5))
    assert g.sum() == pytest.approx(op.degree * val, rel=1e-12)


# -- certificates -------------------------------------------------------------------


def test_partial_sigma1():
    spec = SymmetricFunctionSpec.sigma1(4)
    cert = certify_partial_ellipticity(spec, 0.25, samples=500)
    assert cert.passed and cert.theta == pytest.approx(0.25)


def test_partial_gamma2():
    spec = SymmetricFunctionSpec.sigma_k_root(4, 2)
    th = compute_theta(spec.domain, budget=2000).lower
    cert = certify_partial_ellipticity(spec, th, samples=10_000, seed=0)
    assert cert.passed and cert.violations == 0 and cert.kappa_used == 2


def test_partial_detects_wrong_theta():
    # theta above the true 1/16 must produce violations near the boundary
    spec = SymmetricFunctionSpec.sigma_k_root(4, 2)
    cert = certify_partial_ellipticity(spec, 0.2, samples=2000, seed=0)
    assert not cert.passed and cert.violations > 0


def test_partial_sigma_n_excludes_last_index():
    r = sigma_n_ratio_witness(4, np.array([1e2, 1e4, 1e6]))
    assert r[-1] < 1e-5 and np.all(np.diff(r) < 0)


def test_full_sigma1():
    op = TransformedOperator(SymmetricFunctionSpec.sigma1(4), 1.5)
    cert = certify_full_ellipticity(op, samples=500)
    assert cert.theta == pytest.approx(0.25, rel=1e-12)


def test_full_gamma2_and_sweep():
    base = SymmetricFunctionSpec.sigma_k_root(4, 2)
    cert = certify_full_ellipticity(TransformedOperator(base, 1.0), samples=10_000)
    assert cert.passed and cert.theta > 0.1
    thetas = [
        certify_full_ellipticity(TransformedOperator(base, r), samples=4000, seed=5).theta
        for r in (1.0, 1.5, 1.9, 1.99)
    ]
    assert all(a > b for a, b in zip(thetas, thetas[1:]))
    assert thetas[-1] < 0.01


def test_full_respects_proven_floor():
    for base, rho in [
        (SymmetricFunctionSpec.sigma_k_root(5, 2), 2.0),
        (SymmetricFunctionSpec.quotient(5, 3, 1), -1.0),
        (SymmetricFunctionSpec.sigma_k_root(4, 3), 1.0),
    ]:
        cert = certify_full_ellipticity(TransformedOperator(base, rho), samples=2000)
        assert cert.passed
        assert cert.theta >= cert.details["proven_floor"] - 1e-12


@pytest.mark.parametrize(
    "base,rho",
    [
        (SymmetricFunctionSpec.sigma_k_root(4, 2), 1.0),
        (SymmetricFunctionSpec.sigma_k_root(4, 2), 2.0),
        (SymmetricFunctionSpec.sigma_k_root(5, 3), -1.0),
        (SymmetricFunctionSpec.sigma_k_root(5, 3), 5 / 3),
    ],
)
def test_dichotomy(base, rho):
    uniform, type2 = full_ellipticity_dichotomy(TransformedOperator(base, rho), samples=2000)
    assert uniform == type2


def test_concavity():
    s1 = certify_concavity(SymmetricFunctionSpec.sigma1(4), samples=1000)
    assert s1.passed and abs(s1.worst_gap) < 1e-12
    assert certify_concavity(SymmetricFunctionSpec.sigma_k_root(4, 2), samples=10_000).passed
    op = TransformedOperator(SymmetricFunctionSpec.sigma_k_root(4, 2), 1.0)
    assert certify_concavity(op, samples=4000).passed
    for spec in FAMILIES:
        assert certify_concavity(spec, samples=1000).passed, spec.label


def test_function_spec_json_round_trip():
    s = SymmetricFunctionSpec.quotient(5, 3, 1)
    assert SymmetricFunctionSpec.from_dict(s.to_dict()) == s
