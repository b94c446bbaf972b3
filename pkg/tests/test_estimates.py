import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyhcheck.estimates import (
    FAIL, K45, PASS, PASS_FLAGS, SQRT2, CheckReport, EstimateParams, ParameterError, Snapshot, Tolerance,
    cd_condition, hamilton_bound, hamilton_eta, hamilton_hessian, hamilton_xi, harnack_bound, hessian_AB,
    hessian_global, hessian_lambda, hessian_local, hessian_omega, lambda_alpha_eps, li_yau_compact,
    li_yau_global, li_yau_local, li_yau_local_A, liouville_assess, ly_hessian, required_C, reversed_harnack,
    reversed_harnack_exponents, snapshots, window_bounds,
)
from lyhcheck.geometry import ScalarField, build_cutoff, make_torus_grid
from lyhcheck.model import BoundSet, Nonlinearity, PotentialSpec, WeightSpec
from lyhcheck.solver import Equation, SolverState, evolve

TWO_PI = 2 * math.pi
BOUND_KEYS = ("theta1", "theta2", "theta3", "theta4", "K1", "K2", "K3", "K4", "K5", "K6", "K7", "K8")


def constant_window(d=1, n=16, times=np.linspace(0.1, 0.2, 17), c=1.3):
    g = make_torus_grid(d, [TWO_PI] * d, [n] * d)
    eq = Equation(g)
    return [Snapshot(eq, t, np.full(g.shape, c)) for t in times]


@pytest.fixture(scope="module")
def allen_run():
    g = make_torus_grid(1, [TWO_PI], [64])
    x = g.coords()[0]
    eq = Equation(g, nl=Nonlinearity("allen_cahn", {"c": 1.0}))
    traj = evolve(eq, SolverState(0.5 + 0.2 * np.sin(x)), 0.5, output_times=np.linspace(0, 0.5, 11))
    return snapshots(eq, traj)


@pytest.fixture(scope="module")
def heat_run():
    g = make_torus_grid(1, [TWO_PI], [64])
    x = g.coords()[0]
    eq = Equation(g, WeightSpec("0.3*cos(x)"))
    traj = evolve(eq, SolverState(2 + np.sin(x) + 0.5 * np.cos(2 * x)), 1.0, output_times=np.linspace(0, 1, 81))
    return snapshots(eq, traj)


# -- closed-form constants ------------------------------------------------------------


@pytest.mark.parametrize("K,expected", [(0.0, 8.0), (1.0, 24.0)])
def test_lambda_hand_values(K, expected):
    assert lambda_alpha_eps(2, 2, 0.5, K) == pytest.approx(expected)


@pytest.mark.parametrize("alpha,eps", [(1.0, 0.5), (2.0, 0.0), (2.0, 1.0)])
def test_lambda_rejects_bad_parameters(alpha, eps):
    with pytest.raises(ParameterError):
        lambda_alpha_eps(2, alpha, eps, 0.0)


def test_lambda_independent_of_window():
    g1 = li_yau_global(constant_window()[0], EstimateParams(m=2, alpha=2, eps=0.5), window=constant_window()[:3])
    g2 = li_yau_global(constant_window()[5], EstimateParams(m=2, alpha=2, eps=0.5), window=constant_window())
    assert g1.intermediates["Lambda_alpha_eps"] == g2.intermediates["Lambda_alpha_eps"] == 8.0


def test_xi_and_eta_with_zeros():
    assert hamilton_xi(0, 0, 0, 0) == 1
    assert hamilton_eta(BoundSet()) == 1
    assert hamilton_xi(0, 0, 1, 1) == 3  # fisher_kpp(c = 1), q = 0, f = 0


def test_B_with_everything_zero():
    delta, beta, T = 0.3, 0.9, 0.7
    A, B = hessian_AB(BoundSet(), 1.0, beta, delta, T)
    assert B == pytest.approx(2 / (delta * beta * T ** 2))
    assert A == pytest.approx(1 / ((delta * beta) ** 2 * T ** 2))


def test_local_A_limit():
    C1, C2 = 3.0, 12.0
    vals = [li_yau_local_A(2, C1, C2, R, 0.0) * R ** 2 for R in (1, 10, 100)]
    assert vals == pytest.approx([C1 + C2 + 2 * C1 ** 2] * 3)


def test_reversed_window_arithmetic():
    # independent high-precision route
    k = 4 * mpmath.sqrt(2) - 1
    dmax = 1 / (1 + k ** 2 * 4)
    bmax = 1 / (2 * k)
    assert float(dmax) == pytest.approx(0.0113967, rel=1e-5)
    assert float(bmax) == pytest.approx(0.10737, rel=1e-4)
    ok = EstimateParams(alpha=2, delta=float(dmax) * 0.999, beta=float(bmax) * 0.999)
    assert not [v for v in ok.violations("reversed_harnack", 1) if "δ ≤" in v or "β <" in v]
    bad = EstimateParams(alpha=2, delta=float(dmax) * 1.001, beta=float(bmax))
    msgs = bad.violations("reversed_harnack", 1)
    assert any("δ ≤" in v for v in msgs) and any("β <" in v for v in msgs)


def test_N2_high_precision():
    k = 4 * mpmath.sqrt(2) - 1
    beta, alpha, m, eps = mpmath.mpf("0.1"), 2, 3, mpmath.mpf("0.5")
    oracle = k * beta * m * alpha ** 2 / (2 * (1 - eps) * (1 - k * beta * alpha))
    p = EstimateParams(m=3, alpha=2, eps=0.5, beta=0.1, delta=0.0099)
    _, N2 = reversed_harnack_exponents(BoundSet(), p, 0.0, 1.0)
    assert float(1 - k * beta * alpha) == pytest.approx(0.0686, abs=1e-4)
    assert N2 == pytest.approx(float(oracle), rel=1e-12)
    assert N2 == pytest.approx(81.4, abs=0.05)


@pytest.mark.parametrize("check,params,needle", [
    ("hessian_global", dict(delta=0.5, beta=0.5), "β ≥ √(δ/(1−δ)) = 1"),
    ("li_yau_global", dict(alpha=1.0), "α > 1 required"),
    ("li_yau_global", dict(eps=1.0), "0 < ε < 1"),
    ("li_yau_compact", dict(m=0.5), "m ≥ n"),
    ("hessian_global", dict(C=0.0), "C > 0"),
    ("li_yau_local", dict(R=None), "R > 0"),
])
def test_parameter_violations(check, params, needle):
    msgs = EstimateParams(**params).violations(check, 1)
    assert any(needle in v for v in msgs), msgs
    with pytest.raises(ParameterError):
        EstimateParams(**params).validate(check, 1)


def test_violations_are_all_collected():
    assert len(EstimateParams(alpha=0.5, eps=2.0, m=0.1).violations("li_yau_global", 1)) == 3


# -- monotonicity in the bound inputs ----------------------------------------------

nonneg = st.floats(0, 10, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(nonneg, min_size=12, max_size=12), st.sampled_from(BOUND_KEYS), st.floats(0.01, 5))
def test_constants_monotone_in_bounds(vals, key, bump):
    b0 = BoundSet(**dict(zip(BOUND_KEYS, vals)))
    b1 = BoundSet(**{**dict(zip(BOUND_KEYS, vals)), key: getattr(b0, key) + bump})
    p = EstimateParams(m=2, alpha=2, eps=0.5, beta=0.1, delta=0.0099, C=1.0)
    pairs = [
        (hessian_omega(b0, 1.0, 0.5), hessian_omega(b1, 1.0, 0.5)),
        (hessian_lambda(b0, 1.0), hessian_lambda(b1, 1.0)),
        (hamilton_xi(b0.K1, b0.theta1, b0.theta2, b0.theta3), hamilton_xi(b1.K1, b1.theta1, b1.theta2, b1.theta3)),
        (hamilton_eta(b0), hamilton_eta(b1)),
        (lambda_alpha_eps(2, 2, 0.5, b0.K1, b0.K6), lambda_alpha_eps(2, 2, 0.5, b1.K1, b1.K6)),
        (li_yau_local_A(2, 3, 12, 1.0, b0.K1), li_yau_local_A(2, 3, 12, 1.0, b1.K1)),
        *zip(hessian_AB(b0, 1.0, 0.5, 0.2, 1.0, 1.0), hessian_AB(b1, 1.0, 0.5, 0.2, 1.0, 1.0)),
        *zip(reversed_harnack_exponents(b0, p, 8.0, 1.0), reversed_harnack_exponents(b1, p, 8.0, 1.0)),
    ]
    for lo, hi in pairs:
        assert hi >= lo


# -- constant solutions pass everything ----------------------------------------------


def test_constant_solution_every_checker():
    win = constant_window(d=2, n=16, times=np.linspace(0.0, 0.2, 33))
    b = window_bounds(win)
    s = win[-1]
    p = EstimateParams(m=2, alpha=2, eps=0.5, beta=1.0, delta=0.5, C=1.0, R=1.0)
    pr = EstimateParams(m=2, alpha=2, eps=0.5, beta=0.1, delta=0.0099)
    cut = build_cutoff((math.pi, math.pi), 1.0, s.grid)
    reps = [
        li_yau_compact(s, 2, window=win), li_yau_global(s, p, win), li_yau_local(s, p, cut, win),
        hamilton_bound(s, b, window=win), hessian_global(s, p, b), hessian_local(s, p, b),
        ly_hessian(s, p, b, win), hamilton_hessian(s, p, b, window=win),
        harnack_bound(win, ((1.0, 1.0), 0.1), ((2.0, 3.0), 0.2), p),
        reversed_harnack(win, (1.0, 2.0), 0.1, 0.2, pr, b),
        cd_condition(ScalarField(s.grid, s.w), s.f_field(), 2, 0.0),
    ]
    for rep in reps:
        assert rep.lhs_max == rep.lhs_min == 0.0 or rep.name == "harnack", rep.name
        assert rep.min_margin == rep.rhs_min, rep.name
        assert rep.verdict == PASS, (rep.name, rep.flagged)
    liou = liouville_assess(win)
    assert liou.verdict == PASS


def test_uniform_reaction_state_li_yau_compact():
    g = make_torus_grid(1, [TWO_PI], [16])
    eq = Equation(g, nl=Nonlinearity("fisher_kpp", {"c": 1.0}))
    rep = li_yau_compact(Snapshot(eq, 0.5, np.full(16, 0.4)), 1)
    assert rep.lhs_max == pytest.approx(0.0, abs=1e-15)
    assert rep.verdict in (PASS, PASS_FLAGS)


# -- individual checkers ------------------------------------------------------------------


def test_harnack_hand_case():
    win = constant_window(c=0.7)
    p = EstimateParams(m=2, alpha=2, eps=0.5)
    g = win[0].grid
    a, b = g.node_position((3,)), g.node_position((10,))
    rep = harnack_bound(win, (a, 0.1), (b, 0.2), p)
    straight = rep.intermediates["exponent_integral"]
    disp = 7 * g.h  # shorter than half the period
    kinetic = 0.5 * (disp / 0.1) ** 2 * 0.1
    assert straight == pytest.approx(0.4 + kinetic, rel=1e-12)
    same = harnack_bound(win, ((1.0,), 0.1), ((1.0,), 0.2), p)
    assert same.intermediates["ratio"] == 1.0
    assert same.intermediates["bound"] == pytest.approx(2 ** 4 * math.exp(0.4), abs=1e-9)
    assert same.intermediates["bound"] == pytest.approx(23.86919516, abs=1e-8)
    assert same.intermediates["bound_with_t1_over_t2_prefactor"] < 1.0  # the other prefactor fails here


def test_harnack_cadence_and_ordering():
    p = EstimateParams(m=2, alpha=2, eps=0.5)
    sparse = constant_window(times=np.linspace(0.1, 0.2, 5))
    with pytest.raises(ValueError, match="spacing"):
        harnack_bound(sparse, ((1.0,), 0.1), ((1.0,), 0.2), p)
    with pytest.raises(ValueError):
        harnack_bound(constant_window(), ((1.0,), 0.2), ((1.0,), 0.1), p)
    with pytest.raises(ValueError):
        harnack_bound(constant_window(), ((1.0,), 0.1), ((1.0,), 0.2), p, path_policy="wiggly")


def test_harnack_sampled_never_exceeds_straight(heat_run):
    p = EstimateParams(m=1.5, alpha=2, eps=0.5)
    win = heat_run[20:]
    for seed in range(4):
        rng = np.random.default_rng(seed)
        x1, x2 = rng.uniform(0, TWO_PI, 2)
        st_ = harnack_bound(win, ((x1,), 0.25), ((x2,), 1.0), p)
        sa = harnack_bound(win, ((x1,), 0.25), ((x2,), 1.0), p, path_policy="sampled", seed=seed)
        assert sa.intermediates["exponent_integral"] <= st_.intermediates["exponent_integral"] + 1e-12
        assert sa.verdict != FAIL and st_.verdict != FAIL


def test_li_yau_compact_K_inflation(heat_run):
    s = heat_run[40]
    r0 = li_yau_compact(s, 2, K=0.0)
    r1 = li_yau_compact(s, 2, K=1.0)
    assert r1.rhs_min - r0.rhs_min == pytest.approx(2.0)
    assert r1.min_margin - r0.min_margin == pytest.approx(2.0)


def test_li_yau_global_on_heat_run(heat_run):
    p = EstimateParams(m=2, alpha=1.5, eps=0.5)
    reps = [li_yau_global(s, p, heat_run) for s in heat_run[4:]]
    assert all(r.verdict != FAIL for r in reps)
    rhs = [r.rhs_min for r in reps]
    assert all(b < a for a, b in zip(rhs, rhs[1:]))


def test_li_yau_local_ball_and_constants(heat_run):
    s = heat_run[40]
    p = EstimateParams(m=2, alpha=2, eps=0.5, R=1.0)
    cut = build_cutoff((math.pi,), 1.0, s.grid)
    loc = li_yau_local(s, p, cut, heat_run)
    glob = li_yau_global(s, p, heat_run)
    assert loc.intermediates["C2"] == pytest.approx(12.0)
    assert loc.rhs_min >= glob.rhs_min
    with pytest.raises(ValueError):
        li_yau_local(s, EstimateParams(R=0.5), cut)


def test_scaling_invariance_of_log_quantities(heat_run):
    s = heat_run[30]
    p = EstimateParams(m=2, alpha=2, eps=0.5)
    scaled = Snapshot(s.eq, s.t, 7.0 * s.w)
    a, b = li_yau_global(s, p), li_yau_global(scaled, p)
    assert a.lhs_max == pytest.approx(b.lhs_max, rel=1e-12)
    assert a.lhs_min == pytest.approx(b.lhs_min, rel=1e-12, abs=1e-14)
    assert li_yau_compact(s, 2).lhs_max == pytest.approx(li_yau_compact(scaled, 2).lhs_max, rel=1e-12)


def test_hamilton_fisher():
    g = make_torus_grid(1, [TWO_PI], [64])
    x = g.coords()[0]
    eq = Equation(g, nl=Nonlinearity("fisher_kpp", {"c": 1.0}))
    win = snapshots(eq, evolve(eq, SolverState(0.5 + 0.2 * np.sin(x)), 1.0, output_times=np.linspace(0, 1, 6)))
    b = window_bounds(win)
    rep = hamilton_bound(win[-1], b, window=win)
    assert rep.intermediates["xi"] == pytest.approx(3.0)
    assert rep.verdict != FAIL
    with pytest.raises(ValueError, match="ceiling"):
        hamilton_bound(win[-1], b, A=0.5, window=win)


def test_hessian_checks_on_allen_cahn(allen_run):
    b = window_bounds(allen_run)
    p = EstimateParams(beta=1.0, delta=0.5, C=1.0)
    for s in allen_run[2:]:
        rep = hessian_global(s, p, b)
        assert rep.verdict != FAIL
        assert rep.intermediates["T"] == pytest.approx(s.t - b.window[0])
    with pytest.raises(ValueError):
        hessian_local(allen_run[-1], EstimateParams(R=4.0), b)


def test_ly_hessian_uniform_floor():
    win = constant_window()
    b = window_bounds(win)
    p = EstimateParams(m=2, alpha=2, eps=0.5, beta=1.0, delta=0.5)
    rep = ly_hessian(win[-1], p, b, win)
    assert rep.rhs_min >= SQRT2 * rep.intermediates["B_hess"]


def test_required_C_bisection():
    C, found = required_C(lambda C: C - 3.3)
    assert found and C == pytest.approx(3.3, rel=1e-6)
    assert required_C(lambda C: 1.0) == (0.0, True)
    assert required_C(lambda C: -1.0)[1] is False


@pytest.mark.xfail(strict=True, reason="the C-dependent terms of 𝒜 and ℬ scale like 1/β, so a larger β "
                   "needs a larger C whenever the gradient term cannot cover the deficit")
def test_required_C_nonincreasing_in_beta():
    # a snapshot with a Hessian large enough that C = 0 does not suffice
    g = make_torus_grid(1, [TWO_PI], [64])
    x = g.coords()[0]
    eq = Equation(g)
    win = [Snapshot(eq, t, 2 + np.sin(3 * x) + 0.8 * np.cos(5 * x)) for t in (0.0, 2.0)]
    b = window_bounds(win)
    reqs = []
    for beta in (1.0, 1.5, 2.0, 3.0, 5.0):
        rep = hessian_global(win[-1], EstimateParams(beta=beta, delta=0.5), b)
        reqs.append(rep.intermediates["required_C"])
    assert reqs[0] > 0
    assert all(b_ <= a + 1e-6 * max(1, a) for a, b_ in zip(reqs, reqs[1:])), reqs


def test_reversed_harnack_constant_and_pairing():
    win = constant_window(times=np.linspace(0.0, 0.2, 33))
    b = window_bounds(win)
    p = EstimateParams(m=2, alpha=2, eps=0.5, beta=0.1, delta=0.0099)
    rep = reversed_harnack(win, (1.0,), 0.1, 0.2, p, b)
    assert rep.lhs_max == 0.0 and rep.verdict == PASS
    N1, N2 = rep.intermediates["N1"], rep.intermediates["N2"]
    assert rep.rhs_min == pytest.approx(N1 * 0.1 + N2 * math.log(2))
    assert rep.intermediates["rhs_swapped_pairing"] == pytest.approx(N1 * math.log(2) + N2 * 0.1)
    assert rep.notes


def test_liouville_decay_and_gate():
    g = make_torus_grid(1, [TWO_PI], [32])
    x = g.coords()[0]
    eq = Equation(g)
    win = snapshots(eq, evolve(eq, SolverState(2 + np.sin(x)), 20.0, output_times=np.linspace(0, 20, 41)))
    rep = liouville_assess(win)
    assert rep.verdict == PASS
    assert rep.intermediates["final_grad_stat"] <= 1e-8
    gated = Equation(g, nl=Nonlinearity("fisher_kpp", {"c": 1.0}))
    w = [Snapshot(gated, t, np.full(32, 0.5 + 0.1 * t) + 0.1 * np.sin(x)) for t in (0.0, 1.0)]
    rep2 = liouville_assess(w)
    assert rep2.verdict == PASS_FLAGS and "G ≡ 0" in rep2.flagged


def test_cd_condition_examples():
    g = make_torus_grid(1, [TWO_PI], [128])
    x = g.coords()[0]
    u = ScalarField(g, np.sin(x) + 0.2 * np.cos(2 * x))
    f0 = ScalarField(g, np.zeros(128))
    rep = cd_condition(u, f0, 1, 0.0)
    assert rep.min_margin >= -10 * g.h ** 2 and rep.verdict == PASS
    lower = cd_condition(u, f0, 1, -1.0)
    assert np.allclose(lower.margin - rep.margin, norm_sq_1d(g, u.data))
    const = cd_condition(ScalarField(g, np.full(128, 2.0)), f0, 1, 0.0)
    assert const.min_margin == 0.0


def norm_sq_1d(g, u):
    return g.grad(u)[0] ** 2


@pytest.mark.parametrize("d,m,seed", [(1, 2.0, 0), (1, 2.0, 1), (2, 3.5, 2), (2, 3.5, 3), (1, 2.0, 4)])
def test_cd_condition_random_trig(d, m, seed):
    rng = np.random.default_rng(seed)
    g = make_torus_grid(d, [TWO_PI] * d, [96] * d if d == 1 else [48] * d)
    xs = g.coords()
    u = sum(rng.normal() * np.sin(k * xs[a] + rng.uniform(0, TWO_PI)) for a in range(d) for k in (1, 2))
    f = 0.3 * sum(rng.normal() * np.cos(xs[a] + rng.uniform(0, TWO_PI)) for a in range(d))
    from lyhcheck.geometry import bakry_emery
    ff = ScalarField(g, f)
    K = -bakry_emery(ff, m, "finite").K
    rep = cd_condition(ScalarField(g, u), ff, m, K)
    assert rep.verdict == PASS, rep.min_margin


def test_report_roundtrip():
    rep = li_yau_compact(constant_window()[-1], 2)
    back = CheckReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()


def test_tolerance_formula():
    tol = Tolerance(1e-9, 10.0)
    assert tol.value(0.1, np.array([2.0, -3.0]), np.array([1.0])) == pytest.approx(1e-9 + 0.1 * (1 + 3 + 1))
