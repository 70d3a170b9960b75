import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrris import beamopt as bo
from nrris.multiport import compose_circulator_group, transmission_line_element
from nrris.surface import reflect_pattern

from oracles import dense_response

r = math.radians


def _spec(structure="three-element", step=1.0, **kw):
    grid = np.radians(np.round(np.arange(-90, 90 + step / 2, step), 10))
    return bo.BeamSpec.box(r(20), r(40), r(40), r(-50), grid=grid, structure=structure, **kw)


def _phi(N, seed):
    return np.exp(2j * np.pi * np.random.default_rng(seed).random(N))


# ---------------------------------------------------------------- forms

@pytest.mark.parametrize("structure,N", [("three-element", 12), ("two-element", 10)])
@pytest.mark.parametrize("placement", ["consecutive", "interleaved"])
def test_form_equivalence_with_surface_response(structure, N, placement):
    spec = _spec(structure, step=7.5)
    F = bo.build_quadratic_forms(spec, N, 0.5, placement)
    for seed in range(3):
        phi = _phi(N, seed)
        S = bo.surface_from_phases(phi, structure, 0.5, placement)
        dl = np.abs(reflect_pattern(S, spec.theta_b, spec.grid)) ** 2
        ul = np.abs(reflect_pattern(S, spec.theta_u, spec.grid)) ** 2
        np.testing.assert_allclose(F.dl.values(phi), dl, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(F.ul.values(phi), ul, rtol=1e-10, atol=1e-10)
        quad = np.einsum("i,lij,j->l", phi.conj(), F.A_B, phi).real
        np.testing.assert_allclose(quad, dl, rtol=1e-10, atol=1e-10)


def test_forms_are_rank_one_hermitian_psd():
    F = bo.build_quadratic_forms(_spec(step=30.0), 6)
    for A in F.A_U:
        np.testing.assert_allclose(A, A.conj().T, atol=1e-14)
        w = np.linalg.eigvalsh(A)
        assert w[0] > -1e-12 and np.sum(w > 1e-9) == 1


def test_row_permutation_patterns():
    np.testing.assert_array_equal(bo.row_permutation(6, "three-element"), [2, 0, 1, 5, 3, 4])
    np.testing.assert_array_equal(bo.row_permutation(4, "two-element"), [1, 0, 3, 2])
    np.testing.assert_array_equal(bo.row_permutation(6, "two-element", "interleaved"), [3, 4, 5, 0, 1, 2])
    with pytest.raises(ValueError):
        bo.row_permutation(7, "three-element")


def test_beamspec_validation():
    g = np.radians([0.0, 10.0, 20.0])
    with pytest.raises(ValueError):
        bo.BeamSpec(0.0, 0.0, g, [0, 0, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        bo.BeamSpec(0.0, 0.0, g[::-1], [1, 0, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        bo.BeamSpec(0.0, 0.0, g, [1, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        bo.BeamSpec(0.0, 0.0, g, [1, 0, 0], [1, 0, 0], w_dl=[0, 1, 1])
    s = bo.BeamSpec(0.0, 0.0, g, [1, 0, 0], [1, 0, 0])
    np.testing.assert_array_equal(s.w_dl, 1.0)


def test_box_weights():
    s = _spec(step=0.5, halfwidth=r(1), sidelobe_weight=(3.0, 2.0), null_weight=50.0)
    assert s.p_dl.sum() == 5 and s.p_ul.sum() == 5
    assert set(np.unique(s.w_dl)) == {1.0, 3.0}
    near = np.abs(s.grid - r(20)) <= r(1) + 1e-9
    np.testing.assert_array_equal(s.w_ul[near], 50.0)
    assert np.all(s.w_ul[s.p_ul > 0] == 1.0)


# ---------------------------------------------------------------- objective

def _dense_objective(phi, spec, N, alpha, alpha_ul):
    """Objective built from explicit surface double sums."""
    S = bo.surface_from_phases(phi, spec.structure).S
    tot = 0.0
    for l, th in enumerate(spec.grid):
        q = abs(dense_response(S, 0.5, spec.theta_b, th)) ** 2
        qu = abs(dense_response(S, 0.5, spec.theta_u, th)) ** 2
        tot += spec.w_dl[l] * (q - alpha * spec.p_dl[l]) ** 2
        tot += spec.w_ul[l] * (qu - alpha_ul * spec.p_ul[l]) ** 2
    return tot / spec.L



def test_objective_golden_n8_against_dense_evaluation():
    spec = bo.BeamSpec.box(r(20), r(40), r(40), r(-50), grid=np.radians(np.arange(-90, 91, 15.0)),
                           halfwidth=r(7.5), structure="two-element")
    F = bo.build_quadratic_forms(spec, 8)
    phi = _phi(8, 1234)
    a, au = 3.5, 1.25
    got = bo.objective(phi, F, spec.p_dl, spec.p_ul, a, au)
    assert got == pytest.approx(_dense_objective(phi, spec, 8, a, au), rel=1e-12)


def test_weighted_objective_against_dense_evaluation():
    spec = _spec(step=15.0, halfwidth=r(7.5), sidelobe_weight=(2.0, 0.5), null_weight=9.0)
    F = bo.build_quadratic_forms(spec, 9)
    phi = _phi(9, 5)
    got = bo.objective(phi, F, spec.p_dl, spec.p_ul, 2.0, 3.0, spec.w_dl, spec.w_ul)
    assert got == pytest.approx(_dense_objective(phi, spec, 9, 2.0, 3.0), rel=1e-12)


def test_perfect_match_objective_and_gradient_vanish():
    spec = _spec(step=10.0)
    F = bo.build_quadratic_forms(spec, 12)
    phi = _phi(12, 2)
    P, Pu = F.dl.values(phi), F.ul.values(phi)
    assert bo.objective(phi, F, P, Pu, 1.0, 1.0) == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(bo.riemannian_gradient(phi, F, P, Pu, 1.0, 1.0), 0.0, atol=1e-12)


def test_optimal_scaling_closed_form():
    spec = _spec(step=10.0)
    F = bo.build_quadratic_forms(spec, 12)
    phi = _phi(12, 3)
    a = bo.optimal_scaling(phi, F.dl, spec.p_dl)
    assert a == pytest.approx(bo.optimal_scaling(phi, F.A_B, spec.p_dl), rel=1e-12)
    f = lambda x: bo.objective(phi, F, spec.p_dl, spec.p_ul, x, 1.0)
    assert f(a) <= min(f(a * 1.01), f(a * 0.99))
    with pytest.raises(ZeroDivisionError):
        bo.optimal_scaling(phi, F.dl, np.zeros(spec.L))


@pytest.mark.parametrize("weighted", [False, True])
def test_gradient_matches_central_differences(weighted):
    kw = dict(sidelobe_weight=(2.0, 1.0), null_weight=30.0) if weighted else {}
    spec = _spec(step=2.0, **kw)
    N = 24
    F = bo.build_quadratic_forms(spec, N)
    rng = np.random.default_rng(99)
    w, wu = (spec.w_dl, spec.w_ul) if weighted else (None, None)
    for k in range(20):
        phi = _phi(N, k)
        a, au = rng.uniform(0.5, 2.0, 2) * N
        g = bo.riemannian_gradient(phi, F, spec.p_dl, spec.p_ul, a, au, w, wu)
        np.testing.assert_allclose((g * phi.conj()).real, 0.0, atol=1e-12 * np.abs(g).max())
        eta = rng.standard_normal(N)
        xi = 1j * eta * phi
        h = 1e-6
        fp = bo.objective(phi * np.exp(1j * h * eta), F, spec.p_dl, spec.p_ul, a, au, w, wu)
        fm = bo.objective(phi * np.exp(-1j * h * eta), F, spec.p_dl, spec.p_ul, a, au, w, wu)
        fd = (fp - fm) / (2 * h)
        an = 2 * np.vdot(g, xi).real
        assert abs(fd - an) <= 1e-6 * abs(an), (k, fd, an)


# ---------------------------------------------------------------- optimizer

def test_descent_and_feasibility_at_every_iterate():
    spec = _spec(step=1.0)
    for seed in range(10):
        seen = []

        def cb(restart, it, phi, f):
            assert np.max(np.abs(np.abs(phi) - 1)) < 1e-12
            seen.append(f)

        tr = bo.optimize(spec, 24, seed=seed, restarts=1, max_iters=150, callback=cb)
        obj = np.array(tr.objective)
        assert np.all(np.diff(obj) <= 1e-12)
        np.testing.assert_array_equal(obj, seen)
        assert len(tr.rows()) == tr.iterations + 1


def _zero_objective_spec():
    # DL null at th2 and UL null at th1 coincide when w_b - w(th2) = w_u - w(th1)
    tb, tu, t1 = r(20), r(40), 0.0
    t2 = math.asin(math.sin(tb) - math.sin(tu) + math.sin(t1))
    grid = np.array([t2, t1])
    return bo.BeamSpec(tb, tu, grid, [0.0, 1.0], [1.0, 0.0], "two-element")


def test_n2_zero_objective_point_exists_by_brute_force():
    spec = _zero_objective_spec()
    F = bo.build_quadratic_forms(spec, 2)
    t = np.linspace(0, 2 * np.pi, 721)
    best = np.inf
    for a in t[::8]:
        phis = np.stack([np.full(t.size, np.exp(1j * a)), np.exp(1j * t)], axis=1)
        for phi in phis:
            f = bo.objective(phi, F, spec.p_dl, spec.p_ul,
                             bo.optimal_scaling(phi, F.dl, spec.p_dl),
                             bo.optimal_scaling(phi, F.ul, spec.p_ul))
            best = min(best, f)
    assert best < 1e-3


def test_n2_reaches_zero_objective():
    spec = _zero_objective_spec()
    for seed in range(5):
        tr = bo.optimize(spec, 2, seed=seed, restarts=1, max_iters=200, tol=1e-14)
        assert tr.final_objective < 1e-8
        assert tr.iterations <= 200


def test_scale_invariance_identical_iterates():
    spec = _spec(step=2.0)
    spec2 = bo.BeamSpec(spec.theta_b, spec.theta_u, spec.grid, 2 * spec.p_dl, 2 * spec.p_ul)
    runs = []
    for s in (spec, spec2):
        it = []
        bo.optimize(s, 24, seed=4, restarts=1, max_iters=60,
                    callback=lambda r_, k, phi, f: it.append(phi.copy()))
        runs.append(it)
    assert len(runs[0]) == len(runs[1])
    for a, b in zip(*runs):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_restarts_pick_best_and_threads_agree():
    spec = _spec(step=2.0)
    a = bo.optimize(spec, 24, seed=1, restarts=4, max_iters=80)
    b = bo.optimize(spec, 24, seed=1, restarts=4, max_iters=80, threads=3)
    assert a.final_objective == min(a.restart_objectives)
    np.testing.assert_array_equal(a.phi, b.phi)
    assert a.restart_objectives == b.restart_objectives


def test_cg_method_descends():
    spec = _spec(step=2.0)
    tr = bo.optimize(spec, 24, seed=0, restarts=1, max_iters=100, method="cg")
    assert np.all(np.diff(tr.objective) <= 1e-12)
    gd = bo.optimize(spec, 24, seed=0, restarts=1, max_iters=100)
    assert tr.final_objective <= gd.objective[0]


def test_uniform_init_and_explicit_init():
    spec = _spec(step=5.0)
    tr = bo.optimize(spec, 6, init="uniform", max_iters=5)
    assert tr.restart_objectives and len(tr.restart_objectives) == 1
    tr = bo.optimize(spec, 6, init=2 * np.ones(6), max_iters=5)
    np.testing.assert_allclose(np.abs(tr.phi), 1.0)
    with pytest.raises(ValueError):
        bo.optimize(spec, 6, init=np.ones(5))
    with pytest.raises(ValueError):
        bo.optimize(spec, 6, init="zeros")
    with pytest.raises(ValueError):
        bo.optimize(spec, 6, max_iters=0)
    with pytest.raises(ValueError):
        bo.optimize(spec, 6, tol=0.0)


# ---------------------------------------------------------------- realization

def test_all_ones_triple_gives_zero_line_phases():
    p = bo.phases_to_group_params(np.ones(3), "three-element")
    np.testing.assert_allclose(p[0].betas, 0.0, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_triple_round_trip(seed):
    phi = _phi(3, seed)
    (p,) = bo.phases_to_group_params(phi, "three-element")
    S = compose_circulator_group(*(transmission_line_element(b) for b in p.betas)).S
    np.testing.assert_allclose([S[0, 2], S[1, 0], S[2, 1]], phi, atol=1e-10)


def test_two_element_crack_block():
    phi = np.exp(1j * np.array([math.pi / 3, -math.pi / 3]))
    (p,) = bo.phases_to_group_params(phi, "two-element")
    assert isinstance(p, bo.TerminatedPair)
    assert p.psi == pytest.approx(-math.pi / 6)
    S = p.realize().S
    np.testing.assert_allclose(S, [[0, phi[0]], [phi[1], 0]], atol=1e-12)
    assert np.angle(S[0, 1]) == pytest.approx(-np.angle(S[1, 0]), abs=1e-12)


@pytest.mark.parametrize("structure,N", [("three-element", 24), ("two-element", 24)])
@pytest.mark.parametrize("placement", ["consecutive", "interleaved"])
def test_optimized_round_trip(structure, N, placement):
    spec = _spec(structure, step=2.0)
    tr = bo.optimize(spec, N, seed=0, restarts=1, max_iters=40, placement=placement)
    want = bo.surface_from_phases(tr.phi, structure, 0.5, placement).S
    got = bo.realize_groups(bo.phases_to_group_params(tr.phi, structure, placement), 0.5, placement).S
    np.testing.assert_allclose(got, want, atol=1e-10)
