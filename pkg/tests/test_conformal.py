import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ccl import conformal as cf
from ccl.cones import ConeSpec
from ccl.fields import ConformalFactor, TrigField

G1_3, G1_4, G2_4 = ConeSpec.garding(3, 1), ConeSpec.garding(4, 1), ConeSpec.garding(4, 2)


def sympy_ricci(metric, xs):
    """Ricci tensor and scalar curvature of a symbolic metric (independent oracle)."""
    n = len(xs)
    g = sp.Matrix(metric)
    gi = g.inv()
    Gam = [[[sum(gi[k, l] * (sp.diff(g[l, j], xs[i]) + sp.diff(g[l, i], xs[j]) - sp.diff(g[i, j], xs[l]))
                 for l in range(n)) / 2 for j in range(n)] for i in range(n)] for k in range(n)]
    ric = sp.zeros(n, n)
    for i in range(n):
        for j in range(n):
            ric[i, j] = sum(
                sp.diff(Gam[k][i][j], xs[k]) - sp.diff(Gam[k][i][k], xs[j])
                + sum(Gam[k][k][l] * Gam[l][i][j] - Gam[k][j][l] * Gam[l][i][k] for l in range(n))
                for k in range(n)
            )
    scal = sum(gi[i, j] * ric[i, j] for i in range(n) for j in range(n))
    return ric, scal


def _eval_at(expr, xs, pt):
    return np.array(sp.lambdify(xs, expr, "numpy")(*pt), dtype=float)


U_FIELD = TrigField.monomial(0.2, (0, "sin"), (1, "cos")) + TrigField.monomial(0.1, (2, "sin", 1.0, 0.4))


def test_conformal_formula_matches_symbolic_ricci():
    xs = sp.symbols("x0:3")
    u = 0.2 * sp.sin(xs[0]) * sp.cos(xs[1]) + 0.1 * sp.sin(xs[2] + 0.4)
    ric, scal = sympy_ricci(sp.exp(2 * u) * sp.eye(3), xs)
    man = cf.ModelManifold.flat_torus(3, 8)
    uf = ConformalFactor.from_field(man.grid, U_FIELD)
    node = (1, 3, 5)
    pt = [man.grid.axis(a)[node[a]] for a in range(3)]
    R = float(_eval_at(scal, xs, pt))
    Ric = _eval_at(ric, xs, pt)
    gt = np.exp(2 * uf.u[node]) * np.eye(3)
    for tau, alpha in ((0.0, -1), (3.0, 1), (1.0, 1)):
        want = alpha * (Ric - tau * R / 4 * gt)
        got = cf.conformal_modified_schouten(man, uf, tau, alpha)[node]
        assert np.allclose(got, want, atol=1e-12)


def test_warped_exact_curvature_matches_symbolic():
    xs = sp.symbols("x0:3")
    f2, f3 = 0.3 * sp.cos(xs[0]), -0.2 * sp.sin(xs[0])
    ric, scal = sympy_ricci(sp.diag(1, sp.exp(2 * f2), sp.exp(2 * f3)), xs)
    man = cf.ModelManifold.warped_torus(
        3, 8, [TrigField.monomial(0.3, (0, "cos")), TrigField.monomial(-0.2, (0, "sin"))]
    )
    curv = cf.curvature(man, "exact")
    for i in (0, 3, 6):
        pt = [man.grid.axis(0)[i], 0.0, 0.0]
        assert np.allclose(curv.ric[i, 0, 0], _eval_at(ric, xs, pt), atol=1e-12)
        assert curv.scal[i, 0, 0] == pytest.approx(float(_eval_at(scal, xs, pt)), abs=1e-12)


def test_space_form_goldens():
    s = cf.curvature(cf.ModelManifold.sphere_chart(4, 8))
    A = s.schouten
    assert np.max(np.abs(A - 0.5 * s.g)) < 1e-13
    assert np.max(np.abs(s.scal - 12.0)) < 1e-12
    h = cf.curvature(cf.ModelManifold.hyperbolic_chart(3, 8))
    assert np.max(np.abs(h.scal + 6.0)) < 1e-12
    assert np.max(np.abs(h.schouten + 0.5 * h.g)) < 1e-13


def test_exact_and_fd_curvature_agree_on_conformal_torus():
    man = cf.ModelManifold.conformal_torus(4, 12, TrigField.monomial(0.2, (0, "cos"), (1, "cos")))
    ex = cf.curvature(man, "exact")
    errs = []
    for m in (12, 24):
        mm = cf.ModelManifold.conformal_torus(4, m, man.phi) if m != 12 else man
        e = cf.curvature(mm, "exact")
        d = cf.curvature(mm, "fd", order=4)
        errs.append(np.max(np.abs(e.ric - d.ric)))
    assert errs[0] < 1e-2
    assert np.log2(errs[0] / errs[1]) > 3.5
    assert ex.method == "exact"


def test_direct_route_converges_at_second_order():
    phi = TrigField.monomial(0.2, (0, "cos"), (1, "cos"))
    sizes, errs = (8, 12, 16), []
    for m in sizes:
        man = cf.ModelManifold.conformal_torus(4, m, phi)
        u = ConformalFactor.from_field(man.grid, U_FIELD)
        a = cf.conformal_modified_schouten(man, u, 3.0, 1, cf.curvature(man, "exact"))
        d = cf.direct_modified_schouten(man, u.with_stencil(2), 3.0, 1)
        errs.append(np.max(np.abs(a - d)))
    order = -np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert order >= 1.8


def test_reduction_constants():
    c = cf.ReductionConstants(3.0, 1, 4)
    assert c.varrho == 1.0 and c.gamma == pytest.approx(0.5) and c.scale == 1.0
    with pytest.raises(cf.GeometryError):
        cf.ReductionConstants(1.0, 1, 4)
    with pytest.raises(cf.GeometryError):
        cf.ReductionConstants(2.0, 2, 4)


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.sampled_from([(0.0, -1), (2.5, 1), (3.0, 1), (-1.0, -1)]))
def test_V_equals_scaled_conformal_schouten(seed, pair):
    tau, alpha = pair
    rng = np.random.default_rng(seed)
    from ccl.acceptance import random_field

    man = cf.ModelManifold.conformal_torus(3, 8, TrigField.monomial(0.2, (0, "cos")))
    curv = cf.curvature(man, "exact")
    consts = cf.ReductionConstants(tau, alpha, 3)
    u = ConformalFactor.from_field(man.grid, random_field(rng, 3))
    V = cf.V_operator(man, u, consts, curv)
    At = cf.conformal_modified_schouten(man, u, tau, alpha, curv)
    assert np.max(np.abs(V - consts.scale * At)) <= 1e-12 * max(1.0, np.max(np.abs(V)))


@settings(max_examples=8)
@given(st.integers(0, 2**31), st.sampled_from([1.0, 3.0, 16.0]))
def test_V_additivity_and_exponential_closed_form(seed, N):
    rng = np.random.default_rng(seed)
    from ccl.acceptance import random_field

    man = cf.ModelManifold.warped_torus(4, 8, [TrigField.monomial(c, (0, "cos")) for c in (0.5, -0.25, -0.25)])
    curv = cf.curvature(man)
    consts = cf.ReductionConstants(3.0, 1, 4)
    ub = ConformalFactor.from_field(man.grid, random_field(rng, 4))
    w = ConformalFactor.from_field(man.grid, random_field(rng, 4))
    lhs = cf.V_operator(man, ub + w, consts, curv)
    assert np.max(np.abs(lhs - cf.V_additivity_rhs(man, ub, w, consts, curv))) <= 1e-12 * np.max(np.abs(lhs))
    v = ConformalFactor.from_field(man.grid, TrigField.constant(-1.5) + random_field(rng, 4))
    e = ConformalFactor.exp_of(v, N)
    lhs = cf.V_operator(man, e, consts, curv) - consts.scale * curv.modified_schouten(3.0, 1)
    rhs = cf.key3_rhs(man, v, N, consts, curv)
    # lhs is a difference of O(|A|) terms, so round-off scales with |A|, not |lhs|
    ref = max(np.max(np.abs(lhs)), np.max(np.abs(curv.modified_schouten(3.0, 1))))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * ref


@given(st.integers(3, 7), st.integers(0, 2**31), st.sampled_from([0.0, 2.5, 4.0, -1.0]), st.sampled_from([1, -1]))
def test_schouten_algebra_identities(n, seed, tau, alpha):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    S = S + S.T
    o = cf.schouten_algebra(S, tau, alpha)
    scale = max(1.0, np.max(np.abs(o["check1_rhs"])))
    assert np.max(np.abs(o["check1_lhs"] - o["check1_rhs"])) <= 1e-12 * scale
    # Ric, R, G consistency
    assert np.trace(o["Ric"]) == pytest.approx(o["R"], abs=1e-10)
    assert np.allclose(o["G"], o["Ric"] - 0.5 * o["R"] * np.eye(n), atol=1e-10)


def test_schouten_algebra_rejects_asymmetric():
    with pytest.raises(cf.GeometryError):
        cf.schouten_algebra(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))


def test_eigenvalues_wrt_generalized():
    g = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]])
    t = np.array([[1.0, 0.2, 0.0], [0.2, -1.0, 0.4], [0.0, 0.4, 0.5]])
    from scipy.linalg import eigh

    assert np.allclose(np.sort(cf.eigenvalues_wrt(g, t)), eigh(t, g, eigvals_only=True), atol=1e-13)


def test_space_form_einstein_sectional():
    for man, want in ((cf.ModelManifold.hyperbolic_chart(3, 8), 1.0), (cf.ModelManifold.sphere_chart(3, 8), -1.0)):
        Gnn, msec = cf.sectional_vs_einstein(man, [1, 1, 0], [0, 1, -1])
        assert np.max(np.abs(Gnn - want)) < 1e-10 and np.max(np.abs(msec - want)) < 1e-10


def test_einstein_sectional_on_conformal_torus_converges():
    phi = TrigField.monomial(0.2, (0, "cos"), (1, "sin"))
    errs = []
    for m in (12, 24):
        Gnn, msec = cf.sectional_vs_einstein(cf.ModelManifold.conformal_torus(3, m, phi), [1, 0, 0], [0, 1, 0])
        errs.append(np.max(np.abs(Gnn - msec)))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_einstein_sectional_needs_dimension_three():
    with pytest.raises(cf.GeometryError):
        cf.sectional_vs_einstein(cf.ModelManifold.flat_torus(4, 8), [1, 0, 0, 0], [0, 1, 0, 0])


def test_classification_examples():
    sph = cf.classify_admissibility(cf.ModelManifold.sphere_chart(4, 8), 1.0, 1, G2_4)
    assert sph.verdict is cf.Admissibility.ADMISSIBLE
    hyp = cf.classify_admissibility(cf.ModelManifold.hyperbolic_chart(3, 8), 0.0, -1, G1_3)
    assert hyp.verdict is cf.Admissibility.ADMISSIBLE
    flat = cf.classify_admissibility(cf.ModelManifold.flat_torus(4, 8), 3.0, 1, G1_4)
    assert flat.verdict is cf.Admissibility.PSEUDO
    # alpha = +1 on the round sphere with tau large flips the sign of A^{tau,alpha}
    neg = cf.classify_admissibility(cf.ModelManifold.sphere_chart(4, 8), 4.0, 1, G1_4)
    assert neg.verdict is cf.Admissibility.NONE


def test_classify_margins_thresholds():
    assert cf.classify_margins(np.array([0.0, 1.0])).verdict is cf.Admissibility.QUASI
    assert cf.classify_margins(np.zeros(3)).verdict is cf.Admissibility.PSEUDO
    assert cf.classify_margins(np.array([-1e-3, 1.0])).verdict is cf.Admissibility.NONE
    r = cf.classify_margins(np.array([[0.5, 0.2], [0.9, 0.3]]))
    assert r.verdict is cf.Admissibility.ADMISSIBLE and r.worst_node == (0, 1)


def test_condition_ladder_examples():
    g2 = ConeSpec.garding(4, 2)
    lad = cf.condition_ladder(3.0, 1, g2, theta_budget=300)
    # varrho = n/k = 2, sharp threshold 1 + (n-2)/varrho = 2
    assert lad["sharp"] and lad["tau_alpha_4"] and lad["varrho_cone"] == pytest.approx(2.0, abs=1e-8)
    assert not cf.condition_ladder(1.5, 1, g2, theta_budget=300)["sharp"]
    lm = cf.condition_ladder(0.0, -1, g2, theta_budget=300)
    assert lm["sharp"] and lm["tau_alpha_3"]
    with pytest.raises(cf.GeometryError):
        cf.condition_ladder(1.0, 1, g2)


@pytest.mark.parametrize("tau, alpha", [(3.0, 1), (4.0, 1), (0.0, -1), (-1.0, -1)])
def test_sharp_condition_puts_key_vector_in_closure(tau, alpha):
    for k in (1, 2, 3):
        lad = cf.condition_ladder(tau, alpha, ConeSpec.garding(4, k), theta_budget=200)
        if lad["sharp"]:
            assert lad["key_vector_in_closure"]


def test_slab_construction_succeeds_and_verifies():
    from ccl.acceptance import slab_construction

    res = slab_construction()
    assert res.success and res.verified and res.N is not None
    assert res.hypotheses["grad_v_nonvanishing"]


def test_flat_torus_construction_fails_with_pseudo_background():
    from ccl.acceptance import flat_construction

    res = flat_construction()
    assert not res.success and res.u_bar is None
    assert res.hypotheses["background"] == "PseudoAdmissible"


def test_warped_construction_succeeds():
    from ccl.acceptance import warped_construction

    res = warped_construction()
    assert res.success and res.verified
    assert res.hypotheses["background_quasi"] and res.hypotheses["v_le_minus_1"]


def test_manifold_dict_round_trip():
    for man in (
        cf.ModelManifold.flat_torus(3, 8),
        cf.ModelManifold.conformal_torus(3, 8, TrigField.monomial(0.1, (0, "cos"))),
        cf.ModelManifold.warped_torus(3, 8, [TrigField.monomial(0.1, (0, "cos"))] * 2),
        cf.ModelManifold.slab(4, 8, m_interval=10),
        cf.ModelManifold.sphere_chart(3, 8, radius=2.0),
    ):
        back = cf.ModelManifold.from_dict(man.to_dict())
        assert back.kind == man.kind and back.grid == man.grid
        assert np.allclose(back.metric(), man.metric())


def test_manifold_validation():
    with pytest.raises(cf.GeometryError):
        cf.ModelManifold.flat_torus(2, 8)
    with pytest.raises(cf.GeometryError):
        cf.ModelManifold.hyperbolic_chart(4, 8, half_width=0.6)
    with pytest.raises(cf.GeometryError):
        cf.ModelManifold.from_dict({"kind": "klein_bottle", "n": 3, "grid": [8]})
