import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minkowski_lab import kernel as K
from minkowski_lab.kernel import KernelModelParams as P

FIELDS = ("gamma", "k0", "k1", "k11", "K0", "K1", "K11a", "K11aa", "K111a", "K111d")


def test_params_validation():
    with pytest.raises(ValueError):
        P(0.0)
    with pytest.raises(ValueError):
        P(1.0, tau=-0.1)
    with pytest.raises(ValueError):
        P(1.0, n=0)
    assert P(50, 0.1).a1 == pytest.approx(6.0) and P(50, 0.1).a2 == pytest.approx(11.0)


def test_omega_examples():
    assert K.omega_delta_sq(P(50, 0.1, 0.0)) == 1.0
    assert K.omega_delta_sq(P(50, 0.1, 0.5, 2)) == pytest.approx(1 + 0.25 / 11 + 0.25 / 36, abs=1e-12)
    assert K.omega_delta_sq(P(50, 0.1, 0.5, 2)) == pytest.approx(1.0296717, abs=1e-7)
    assert K.omega_delta_sq(P(7, 0.0, 0.3, 3)) == pytest.approx(1 + 2 * 0.09)


def test_rho_examples():
    assert K.rho_model(0.0, P(50, 0.1, 0.5)) == pytest.approx(1.0, abs=1e-15)
    assert K.rho_model(0.3, P(50, 0.1, 0.0)) == pytest.approx(math.exp(-15))
    p = P(1, 1, 1, 1)
    w = 1 + 3 ** -0.5 + 0.5
    want = (math.exp(-1) + 3 ** -0.5 * math.exp(-4 / 3) + 0.5 * math.exp(-1)) / w
    assert K.rho_model(1.0, p) == pytest.approx(want, rel=1e-14)


def test_gaussian_limit_has_no_cumulants():
    p = P(50, 0.1, 0.0)
    assert K.kappa3_model(0.1, 0.2, 0.3, p) == 0
    assert K.kappa4_model([0.1] * 6, p) == 0
    for variant in ("closed", "wick"):
        c = K.analytic_cumulants(p, variant)
        assert c.gamma == pytest.approx(50.0)
        assert all(getattr(c, f) == 0 for f in FIELDS[1:])
    fd = K.fd_cumulants(p)
    assert fd.gamma == pytest.approx(50.0, rel=1e-9)


def test_graph_counts():
    chains = K.directed_chains4()
    assert len(chains) == 24 and len(set(chains)) == 24
    loops = K.loops4()
    assert len(loops) == 3
    # each loop uses four distinct edges and misses one perfect matching
    for lp in loops:
        assert len(set(lp)) == 4


def test_closed_forms_agree_with_term_lists():
    rng = np.random.default_rng(3)
    p = P(30, 0.07, 0.4, 2)
    for _ in range(10):
        x = rng.uniform(0, 0.05, 6)
        assert K.eval_terms(K.model_terms(2, p), x[:1]) == pytest.approx(K.rho_model(x[0], p), rel=1e-13)
        assert K.eval_terms(K.model_terms(3, p), x[:3]) == pytest.approx(K.kappa3_model(*x[:3], p), rel=1e-13)
        assert K.eval_terms(K.model_terms(4, p), x) == pytest.approx(K.kappa4_model(x, p), rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(g=st.floats(1, 100), gt=st.floats(0, 5), d=st.floats(-0.8, 0.8), n=st.integers(1, 3),
       seed=st.integers(0, 1000))
def test_wick_matches_closed_forms_for_two_and_three_points(g, gt, d, n, seed):
    p = P(g, gt / g, d, n)
    x = np.random.default_rng(seed).uniform(0, 1 / g, 3)
    assert K.eval_terms(K.wick_terms(2, p), x[:1]) == pytest.approx(K.rho_model(x[0], p), rel=1e-12)
    assert K.eval_terms(K.wick_terms(3, p), x) == pytest.approx(K.kappa3_model(*x, p), rel=1e-12, abs=1e-14)


def test_four_point_forms_coincide_without_smoothing():
    rng = np.random.default_rng(4)
    for _ in range(5):
        p = P(rng.uniform(1, 80), 0.0, rng.uniform(-0.7, 0.7), int(rng.integers(1, 4)))
        x = rng.uniform(0, 1 / p.g, 6)
        assert K.kappa4_wick(x, p) == pytest.approx(K.kappa4_model(x, p), rel=1e-12)


def test_four_point_forms_differ_with_smoothing():
    p = P(50, 0.1, 0.5, 2)
    a, b = K.kappa4_wick([0] * 6, p), K.kappa4_model([0] * 6, p)
    assert abs(a - b) > 0.1 * abs(a)


def _relabel(edges, x, perm):
    # relabeling the vertices permutes the edge arguments
    idx = K.edge_index(edges)
    y = [0.0] * len(edges)
    for (i, j), v in zip(edges, x):
        y[idx[frozenset((perm[i], perm[j]))]] = v
    return y


def test_symmetry_under_vertex_relabeling():
    p = P(40, 0.05, 0.45, 2)
    rng = np.random.default_rng(1)
    w4 = K.wick_terms(4, p)
    for _ in range(50):
        x3 = rng.uniform(0, 0.05, 3)
        x4 = rng.uniform(0, 0.05, 6)
        for perm in itertools.permutations(range(3)):
            y = _relabel(K.EDGES3, x3, perm)
            assert K.kappa3_model(*y, p) == pytest.approx(K.kappa3_model(*x3, p), rel=1e-13)
        for perm in itertools.permutations(range(4)):
            y = _relabel(K.EDGES4, x4, perm)
            assert K.kappa4_model(y, p) == pytest.approx(K.kappa4_model(x4, p), rel=1e-13)
            assert K.eval_terms(w4, y) == pytest.approx(K.eval_terms(w4, x4), rel=1e-13)


def test_basic_kernel_bounds():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = P(rng.uniform(1, 100), rng.uniform(0, 0.5), rng.uniform(-0.8, 0.8), int(rng.integers(1, 4)))
        assert K.omega_delta_sq(p) >= 1
        assert K.rho_model(0.0, p) == pytest.approx(1.0, abs=1e-15)
        K.check_positivity(p)
        K.check_positivity(p, "wick")


@pytest.mark.parametrize("variant", ["closed", "wick"])
def test_single_slot_multiplicities(variant):
    p = P(50, 0.1, 0.5, 2)
    t3, t4 = K.point_terms(3, p, variant), K.point_terms(4, p, variant)
    d3 = [K.derivative_at_origin(t3, tuple(int(i == e) for i in range(3))) for e in range(3)]
    d4 = [K.derivative_at_origin(t4, tuple(int(i == e) for i in range(6))) for e in range(6)]
    assert max(d3) - min(d3) <= 1e-10 * abs(d3[0])
    assert max(d4) - min(d4) <= 1e-10 * abs(d4[0])


def test_positivity_window():
    K.check_positivity(P(50, 0.1, 0.5, 2))
    K.check_positivity(P(50, 0.1, 0.5, 2), "wick")
    g, a, b = K.hessian_moments(P(50, 0.0, 0.0, 2))
    assert g == pytest.approx(50) and a == pytest.approx(2 * 2500) and b == pytest.approx(0, abs=1e-9)


def test_unknown_variant():
    with pytest.raises(ValueError):
        K.point_terms(3, P(1.0), "other")
    with pytest.raises(ValueError):
        K.model_terms(5, P(1.0))


def test_fd_step_limits():
    with pytest.raises(ValueError):
        K.fd_cumulants(P(50, 0.1, 0.5), h=0.01)
    with pytest.raises(ValueError):
        K.fd_cumulants(P(50, 0.1, 0.5), h=-1e-4)


def test_richardson_improves_on_polynomial_test_function():
    f = lambda x: math.exp(-3 * x[0] - 2 * x[1])
    exact = 6.0
    errs = [abs(K.fd_derivative(f, 2, (1, 1), 0.05, levels) - exact) for levels in (0, 1, 2)]
    assert errs[2] < errs[1] < errs[0]


@pytest.mark.parametrize("variant", ["closed", "wick"])
def test_fd_agrees_with_analytic(variant):
    rng = np.random.default_rng(17)
    for _ in range(5):
        p = P(rng.uniform(1, 100), rng.uniform(0, 0.5), rng.uniform(-0.8, 0.8), int(rng.integers(1, 4)))
        a = K.analytic_cumulants(p, variant)
        f = K.fd_cumulants(p, variant=variant)
        for name in FIELDS:
            av, fv = getattr(a, name), getattr(f, name)
            scale = p.g ** name.count("1") if name != "gamma" else p.g
            assert abs(av - fv) <= 1e-6 * max(abs(av), 1e-4 * scale), (name, av, fv)


# ---- independent oracle: Gaussian quadrature over (X_s, S_s, X_t, S_t) ----

def _quadrature_moments(p, x, deg=8):
    """Joint moments of ``(Y_s, Y_t)`` by tensor Gauss-Hermite quadrature, exact for polynomials."""
    n, g = p.n, p.g
    cxs, cxx2 = p.a1 ** (-n / 2), p.a2 ** (-n / 2)
    cov = np.array([
        [1.0, cxs, math.exp(-g * x), cxs * math.exp(-g * x / p.a1)],
        [cxs, cxx2, cxs * math.exp(-g * x / p.a1), cxx2 * math.exp(-g * x / p.a2)],
        [math.exp(-g * x), cxs * math.exp(-g * x / p.a1), 1.0, cxs],
        [cxs * math.exp(-g * x / p.a1), cxx2 * math.exp(-g * x / p.a2), cxs, cxx2],
    ])
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0, None))
    nodes, weights = np.polynomial.hermite_e.hermegauss(deg)
    weights = weights / weights.sum()
    grid = np.stack(np.meshgrid(*[nodes] * 4, indexing="ij"), -1).reshape(-1, 4)
    wt = np.prod(np.stack(np.meshgrid(*[weights] * 4, indexing="ij"), -1).reshape(-1, 4), axis=1)
    z = grid @ root.T
    ys = z[:, 0] + p.delta * z[:, 0] * z[:, 1]
    yt = z[:, 2] + p.delta * z[:, 2] * z[:, 3]
    ys = ys - wt @ ys
    yt = yt - wt @ yt
    return ys, yt, wt


@pytest.mark.parametrize("g,tau,delta,n", [(50, 0.1, 0.5, 2), (20, 0.3, -0.4, 1), (80, 0.02, 0.3, 3)])
def test_wick_four_point_against_quadrature(g, tau, delta, n):
    p = P(g, tau, delta, n)
    w2 = K.omega_delta_sq(p)
    for x in (0.0, 0.4 / g, 1.5 / g):
        ys, yt, wt = _quadrature_moments(p, x)
        e = lambda f: float(wt @ f)
        cum_sstt = e(ys**2 * yt**2) - e(ys**2) * e(yt**2) - 2 * e(ys * yt) ** 2
        cum_sstt /= w2**2
        # pair (1,2) at s, pair (3,4) at t
        args = (0.0, x, x, x, x, 0.0)
        assert K.kappa4_wick(args, p) == pytest.approx(cum_sstt, rel=1e-9, abs=1e-12)
        cum_sst = e(ys**2 * yt) / w2**1.5
        assert K.kappa3_model(0.0, x, x, p) == pytest.approx(cum_sst, rel=1e-9, abs=1e-12)
        assert K.rho_model(x, p) == pytest.approx(e(ys * yt) / w2, rel=1e-10)


def test_site_moments():
    p = P(50, 0.1, 0.5, 2)
    k3, k4 = K.site_moments(p, "wick")
    assert k3 == pytest.approx(K.kappa3_model(0, 0, 0, p))
    k3p, k4p = K.site_moments(p, "closed")
    assert k3p == pytest.approx(k3)
    assert k4 == pytest.approx(0.50, abs=0.01) and k4p == pytest.approx(0.32, abs=0.01)
