"""Inequality verifier: statuses, report bookkeeping, hierarchy, convexity
of weights, and the regular-region escape estimates."""

import math

import numpy as np
import pytest

from cdknlab.cdcheck import (
    OmegaTable,
    cd_suite,
    default_nprime_grid,
    default_t_grid,
    estimate_omega,
    hierarchy_check,
    kn_convexity_check,
    margin_scale,
    mass_in_intervals,
    omega_to_Omega,
    regular_intervals,
    richardson_check,
    sample_pair_specs,
    t_functional,
    verify_cd,
)
from cdknlab.distortion import tau_KN_vec
from cdknlab.errors import (
    DomainError,
    InvalidParams,
    MismatchedInputs,
    NotAbsolutelyContinuous,
    SamplerEntropyViolation,
    SupportViolation,
)
from cdknlab.measure import (
    measure_from_dict,
    optimal_test_function,
    legendre_entropy,
    radon_nikodym,
    renyi_entropy,
    uniform_block,
)
from cdknlab.mmspace import Grid1D, ModelSpec, PointedSpace1D, build_model_space
from cdknlab.transport import monotone_map

from conftest import flat_space


# ---------------------------------------------------------------------------
# grids, scales, and the right-hand side


def test_default_grids():
    ts = default_t_grid(11)
    assert ts[0] == 0.0 and ts[-1] == 1.0 and len(ts) == 11
    nps = default_nprime_grid(-2.0, 9)
    assert len(nps) == 9
    assert np.all((nps >= -2.0) & (nps < 0.0))
    assert nps[0] == -2.0
    with pytest.raises(DomainError):
        default_nprime_grid(1.0)


def test_margin_scale_saturates_at_one():
    assert margin_scale(0.3, 0.9) == 1.0
    assert margin_scale(5.0, 2.0) == 5.0
    assert margin_scale(math.inf, 3.0) == 3.0
    assert margin_scale(math.nan, math.inf) == 1.0


def test_t_functional_hand_check(lebesgue):
    mu0 = uniform_block(lebesgue.grid, 0.1, 0.3)
    mu1 = uniform_block(lebesgue.grid, 0.6, 0.9)
    coup = monotone_map(mu0, mu1).as_coupling()
    rho0 = radon_nikodym(mu0, lebesgue)
    rho1 = radon_nikodym(mu1, lebesgue)
    K, N, t = 1.5, -2.0, 0.4
    theta = np.abs(coup.x - coup.y)
    want = float(np.sum(coup.w * (
        tau_KN_vec(K, N, 1.0 - t, theta) * rho0.values[coup.i] ** (1.0 / 2.0)
        + tau_KN_vec(K, N, t, theta) * rho1.values[coup.j] ** (1.0 / 2.0))))
    got = t_functional(coup, rho0, rho1, K, N, t)
    assert got == pytest.approx(want, rel=1e-12)


def test_t_functional_infinite_tau(lebesgue):
    # K < 0 puts the tau coefficient on the sin branch; long transport
    # distances then push it to infinity and the bound is vacuous
    mu0 = uniform_block(lebesgue.grid, 0.02, 0.06)
    mu1 = uniform_block(lebesgue.grid, 0.94, 0.98)
    coup = monotone_map(mu0, mu1).as_coupling()
    rho0 = radon_nikodym(mu0, lebesgue)
    rho1 = radon_nikodym(mu1, lebesgue)
    val = t_functional(coup, rho0, rho1, -80.0, -1.0, 0.5)
    assert math.isinf(val) and val > 0


# ---------------------------------------------------------------------------
# verify_cd statuses


def test_trivial_flat_equality(lebesgue):
    mu = uniform_block(lebesgue.grid, 0.0, 1.0)
    rep = verify_cd(lebesgue, mu, mu, K=0.0, N=-2.0, t_grid=7, nprime_grid=5)
    assert rep.passes()
    for row in rep.rows:
        assert row.status == "ok"
        assert abs(row.margin) <= 1e-10


def test_equal_marginals_zero_margin_on_curved_space():
    sp = build_model_space(ModelSpec(kind="cosh_n", K=1.0, N=-2.0,
                                     domain=(-2.0, 2.0), grid_n=256))
    mu = uniform_block(sp.grid, -0.75, 0.5)
    rep = verify_cd(sp, mu, mu, K=1.0, N=-2.0, t_grid=5, nprime_grid=3)
    for row in rep.rows:
        assert abs(row.margin) <= 1e-9 * margin_scale(row.s_value, row.t_value)


def test_endpoint_rows_have_exact_zero_margin(lebesgue, rng):
    from conftest import random_measure

    mu0 = random_measure(lebesgue.grid, rng, sparsity=0.5)
    mu1 = random_measure(lebesgue.grid, rng, sparsity=0.5)
    rep = verify_cd(lebesgue, mu0, mu1, K=0.0, N=-1.5,
                    t_grid=np.array([0.0, 1.0]),
                    nprime_grid=np.array([-1.5, -1.0, -0.5]))
    for row in rep.rows:
        assert row.status == "ok"
        assert abs(row.margin) <= 1e-9 * margin_scale(row.s_value, row.t_value)


def test_scaling_leaves_statuses_invariant(rng):
    # both sides pick up c^(1/N'), so scaled margins and statuses agree;
    # stay away from N' ~ 0 where the margin is cancellation noise
    sp = build_model_space(ModelSpec(kind="cos_n", K=-2.0, N=-2.0, grid_n=256))
    specs = sample_pair_specs(sp, -2.0, 2, seed=4)
    npg = np.array([-1.0, -0.6, -0.3])
    for c in (0.5, 2.0):
        for s0, s1 in specs:
            mu0 = measure_from_dict(sp.grid, s0)
            mu1 = measure_from_dict(sp.grid, s1)
            base = verify_cd(sp, mu0, mu1, K=-2.0, N=-1.0,
                             t_grid=5, nprime_grid=npg)
            scaled = verify_cd(sp.scaled(c), mu0, mu1, K=-2.0, N=-1.0,
                               t_grid=5, nprime_grid=npg)
            for a, b in zip(base.rows, scaled.rows):
                assert a.status == b.status
                if math.isfinite(a.margin):
                    ratio = c ** (1.0 / a.nprime)
                    tiny = 1e-9 * margin_scale(b.s_value, b.t_value)
                    assert b.margin == pytest.approx(a.margin * ratio,
                                                     rel=1e-6, abs=tiny)


def test_entropy_column_agrees_with_dual_route(lebesgue):
    mu0 = uniform_block(lebesgue.grid, 0.1, 0.45)
    mu1 = uniform_block(lebesgue.grid, 0.55, 0.95)
    nprime = -1.25
    rep = verify_cd(lebesgue, mu0, mu1, K=0.0, N=-2.0,
                    t_grid=np.array([0.0]), nprime_grid=np.array([nprime]))
    rho = radon_nikodym(mu0, lebesgue).values
    dual = legendre_entropy(mu0, lebesgue, nprime,
                            [optimal_test_function(rho, nprime)])
    assert rep.rows[0].s_value == pytest.approx(dual, rel=1e-9)


def test_measure_charging_null_cell_is_rejected(lebesgue):
    g = Grid1D.uniform(0.0, 1.0, 10)
    dens = np.ones(10)
    dens[4] = 0.0  # reference vanishes here
    sp = PointedSpace1D(grid=g, density=dens, singular_points=(),
                        base_point=0.2)
    mu = uniform_block(g, 0.35, 0.65)  # charges the null cell
    with pytest.raises(NotAbsolutelyContinuous):
        verify_cd(sp, mu, mu, K=0.0, N=-2.0, t_grid=3, nprime_grid=2)


def test_skipped_rows_on_infinite_endpoint_entropy(lebesgue):
    # rho = 10 on the support and the N' -> 0 exponent is ~1e3, so the
    # endpoint entropy overflows to +inf and those rows are set aside
    mu = uniform_block(lebesgue.grid, 0.45, 0.55)
    rep = verify_cd(lebesgue, mu, mu, K=0.0, N=-2.0, t_grid=3,
                    nprime_grid=np.array([-0.001]))
    assert all(r.status == "skipped_entropy_inf" for r in rep.rows)
    assert rep.passes()  # skips are not violations
    assert rep.worst_deficit() == 0.0


def test_interior_slice_in_null_region_is_violated():
    # endpoints live on the reference, but the geodesic must cross a null
    # corridor: the slice entropy blows up and the row counts as violated
    g = Grid1D.uniform(0.0, 1.0, 20)
    dens = np.ones(20)
    dens[8:12] = 0.0
    sp = PointedSpace1D(grid=g, density=dens, singular_points=(),
                        base_point=0.1)
    mu0 = uniform_block(g, 0.05, 0.3)
    mu1 = uniform_block(g, 0.7, 0.95)
    rep = verify_cd(sp, mu0, mu1, K=0.0, N=-2.0,
                    t_grid=np.array([0.5]),
                    nprime_grid=np.array([-2.0, -1.0]))
    assert all(r.status == "violated" for r in rep.rows)
    assert all(r.margin == -math.inf for r in rep.rows)
    assert rep.worst_deficit() == math.inf
    assert not rep.passes()


def test_vacuous_rows_present_for_negative_K_long_range():
    sp = build_model_space(ModelSpec(kind="cos_n", K=-2.0, N=-2.0, grid_n=256))
    a, b = sp.grid.a, sp.grid.b
    span = b - a
    mu0 = uniform_block(sp.grid, a + 0.05 * span, a + 0.12 * span)
    mu1 = uniform_block(sp.grid, b - 0.12 * span, b - 0.05 * span)
    rep = verify_cd(sp, mu0, mu1, K=-2.0, N=-1.0, t_grid=5)
    counts = rep.counts()
    assert counts.get("vacuous_inf", 0) > 0
    assert rep.passes()


def test_restrict_to_regular_region():
    sp = build_model_space(ModelSpec(kind="power_n", N=-2.0,
                                     domain=(0.0, 2.0), grid_n=256))
    inside = uniform_block(sp.grid, 0.9, 1.3)
    near_blowup = uniform_block(sp.grid, 0.05, 0.3)
    rep = verify_cd(sp, inside, inside, K=0.0, N=-1.0, t_grid=3,
                    restrict_to_regular_k=0)
    assert rep.passes()
    with pytest.raises(SupportViolation):
        verify_cd(sp, near_blowup, inside, K=0.0, N=-1.0, t_grid=3,
                  restrict_to_regular_k=0)


def test_verify_cd_input_validation(lebesgue):
    mu = uniform_block(lebesgue.grid, 0.2, 0.8)
    with pytest.raises(DomainError):
        verify_cd(lebesgue, mu, mu, K=0.0, N=1.0)
    with pytest.raises(InvalidParams):
        verify_cd(lebesgue, mu, mu, K=0.0, N=-1.0,
                  nprime_grid=np.array([-2.0]))  # below N
    with pytest.raises(InvalidParams):
        verify_cd(lebesgue, mu, mu, K=0.0, N=-1.0,
                  nprime_grid=np.array([0.5]))


# ---------------------------------------------------------------------------
# sampling and suites


def test_sample_pair_specs_deterministic(lebesgue):
    a = sample_pair_specs(lebesgue, -2.0, 5, seed=42)
    b = sample_pair_specs(lebesgue, -2.0, 5, seed=42)
    assert a == b
    c = sample_pair_specs(lebesgue, -2.0, 5, seed=43)
    assert a != c


def test_sample_pair_specs_entropy_cap(lebesgue):
    specs = sample_pair_specs(lebesgue, -2.0, 4, seed=1, entropy_cap=3.0)
    for s0, s1 in specs:
        for s in (s0, s1):
            mu = measure_from_dict(lebesgue.grid, s)
            assert renyi_entropy(mu, lebesgue, -2.0) <= 3.0
    with pytest.raises(SamplerEntropyViolation):
        sample_pair_specs(lebesgue, -2.0, 1, seed=1, entropy_cap=0.5)


def test_suite_reuses_specs_across_grids():
    mk = lambda n: build_model_space(ModelSpec(kind="cosh_n", K=1.0, N=-2.0,
                                               domain=(-2.0, 2.0), grid_n=n))
    coarse = cd_suite(mk(128), 1.0, -1.0, n_samples=2, seed=3, t_grid=3)
    fine = cd_suite(mk(256), 1.0, -1.0, n_samples=2, seed=3, t_grid=3,
                    pair_specs=coarse.pair_specs)
    assert coarse.pair_specs == fine.pair_specs
    assert fine.grid_n == 256
    assert coarse.passes() and fine.passes()


def test_richardson_check_runs():
    mk = lambda n: build_model_space(ModelSpec(kind="cosh_n", K=1.0, N=-2.0,
                                               domain=(-2.0, 2.0), grid_n=n))
    out = richardson_check(mk, 1.0, -1.0, n_samples=2, seed=8,
                           grids=(128, 256), t_grid=3)
    assert out["ok"]
    assert out["neg_fine"] <= out["neg_coarse"] / 1.5 + 1e-4


def test_cos_model_dimension_slot():
    # For the cos-type density with exponent N and curvature K = N, the
    # verified condition is CD(K, N+1).  Checking the same space against
    # CD(K, N) -- the dimension slot matching the exponent -- leaves a
    # deficit that grid refinement does NOT shrink, i.e. a real violation
    # of the stronger claim, not discretization error.
    mk = lambda n: build_model_space(ModelSpec(kind="cos_n", K=-2.0, N=-2.0,
                                               grid_n=n))
    shifted = cd_suite(mk(512), -2.0, -1.0, 6, 7)
    assert shifted.worst_deficit() <= 1e-9
    assert shifted.passes()

    matched = richardson_check(mk, -2.0, -2.0, n_samples=6, seed=7,
                               grids=(256, 512))
    assert not matched["ok"]
    assert matched["neg_coarse"] >= 1e-3
    assert matched["neg_fine"] >= 0.5 * matched["neg_coarse"]


def test_hierarchy_check_mechanics(lebesgue):
    mu0 = uniform_block(lebesgue.grid, 0.1, 0.4)
    mu1 = uniform_block(lebesgue.grid, 0.6, 0.9)
    strong = verify_cd(lebesgue, mu0, mu1, K=0.0, N=-2.0, t_grid=5)
    weak = verify_cd(lebesgue, mu0, mu1, K=-1.0, N=-2.0, t_grid=5)
    assert hierarchy_check(strong, weak)
    # a tightened condition is NOT weaker; the comparator must notice when
    # rows that pass under `strong` fail under the other report
    tight = verify_cd(lebesgue, mu0, mu1, K=6.0, N=-2.0, t_grid=5)
    if any(r.status == "violated" for r in tight.rows):
        assert not hierarchy_check(strong, tight)
    other_grid = verify_cd(flat_space(n=128), uniform_block(
        flat_space(n=128).grid, 0.1, 0.4), uniform_block(
        flat_space(n=128).grid, 0.6, 0.9), K=0.0, N=-2.0, t_grid=5)
    with pytest.raises(MismatchedInputs):
        hierarchy_check(strong, other_grid)
    disjoint = verify_cd(lebesgue, mu0, mu1, K=0.0, N=-2.0,
                         t_grid=np.array([0.123]))
    with pytest.raises(MismatchedInputs):
        hierarchy_check(strong, disjoint)


# ---------------------------------------------------------------------------
# (K, N)-convexity of weights


def test_convexity_equality_cases():
    # constant weight at K = 0 sits exactly on the boundary
    x = np.linspace(0.0, 1.0, 201)
    rep = kn_convexity_check((x, np.full_like(x, 1.7)), K=0.0, N=-2.0,
                             n_triples=300, seed=1)
    assert abs(rep.min_margin) <= 1e-12
    # cosh profile solving f'' = -(K/N) f is the equality case for that K
    K, N = 1.0, -2.0
    lam = math.sqrt(-K / N)
    x = np.linspace(-1.5, 1.5, 301)
    psi = -N * np.log(np.cosh(lam * x))
    rep = kn_convexity_check((x, psi), K=K, N=N, n_triples=400, seed=2)
    assert rep.min_margin >= -1e-9
    assert rep.min_margin <= 1e-6


def test_convexity_glued_arches_pass():
    # |cos| transform with interior zeros: kinks point the permitted way
    K, N = -2.0, -2.0
    lam = math.sqrt(K / N)
    x = np.linspace(0.0, 2.0 * math.pi / lam, 2001)
    with np.errstate(divide="ignore"):
        psi = -N * np.log(np.abs(np.cos(lam * x)))
    rep = kn_convexity_check((x, psi), K=K, N=N, n_triples=500, seed=3)
    assert rep.min_margin >= -1e-9


def test_convexity_detects_violation():
    # f_N = sin is concave, so midpoints overshoot the K = 0 chord
    x = np.linspace(0.05, math.pi - 0.05, 301)
    psi = 2.0 * np.log(np.sin(x))  # f_N = e^(-psi/N) = sin for N = -2
    rep = kn_convexity_check((x, psi), K=0.0, N=-2.0, n_triples=300, seed=4)
    assert rep.min_margin < -0.1
    assert rep.worst is not None


def test_convexity_domain_guards():
    x = np.linspace(0.0, 10.0, 101)
    psi = np.zeros_like(x)
    with pytest.raises(DomainError):
        kn_convexity_check((x, psi), K=0.0, N=2.0)
    with pytest.raises(InvalidParams):
        kn_convexity_check((x, psi[:-1]), K=0.0, N=-2.0)

    # K < 0 bounds admissible triple lengths by pi sqrt(N/K)
    def too_long(rng):
        return 0, 50, 100  # spans 10.0 > pi

    with pytest.raises(DomainError):
        kn_convexity_check((x, psi), K=-2.0, N=-2.0,
                           triple_sampler=too_long, n_triples=1)


# ---------------------------------------------------------------------------
# regular-region escape estimates


def test_regular_intervals_structure():
    sp = build_model_space(ModelSpec(kind="glued_cos_n", K=-2.0, N=-2.0, J=2,
                                     grid_n=256))
    ivs = regular_intervals(sp, 2)
    assert len(ivs) >= 2  # interior singular point splits the domain
    for a, b in ivs:
        assert b > a
        for s in sp.singular_points:
            assert not (a < s < b)


def test_mass_in_intervals_exact():
    u0 = np.array([0.0, 0.5])
    u1 = np.array([0.2, 0.9])
    w = np.array([1.0, 4.0])
    ivs = [(0.1, 0.6)]
    got = mass_in_intervals(u0, u1, w, ivs)
    assert got == pytest.approx(0.5 + 1.0, rel=1e-12)


def test_omega_zero_on_single_arch():
    sp = build_model_space(ModelSpec(kind="cos_n", K=-2.0, N=-2.0, grid_n=512))
    w = estimate_omega(sp, 0, 2, 10.0, n_samples=8, N=-2.0, seed=5)
    assert w <= 1e-12


def test_omega_monotone_in_h_same_seed():
    sp = build_model_space(ModelSpec(kind="glued_cos_n", K=-2.0, N=-2.0, J=2,
                                     grid_n=512))
    vals = [estimate_omega(sp, 2, h, 10.0, n_samples=10, N=-2.0, seed=6)
            for h in (2, 3, 4, 5)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0  # blocks straddling a joint do cross the hole


def test_omega_guards():
    sp = build_model_space(ModelSpec(kind="glued_cos_n", K=-2.0, N=-2.0, J=2,
                                     grid_n=256))
    with pytest.raises(InvalidParams):
        estimate_omega(sp, 3, 2, 10.0)

    def bad_sampler(rng):
        g = sp.grid
        return (uniform_block(g, g.a + 0.01, g.a + 0.05),
                uniform_block(g, g.b - 0.05, g.b - 0.01))

    with pytest.raises(SupportViolation):
        estimate_omega(sp, 0, 0, 100.0, sampler=bad_sampler, n_samples=1)
    with pytest.raises(SamplerEntropyViolation):
        estimate_omega(sp, 2, 2, 1e-6, n_samples=1, seed=1)


def test_omega_table_and_Omega():
    table = OmegaTable()
    table.add(2, 8, 28.284271247461902, 0.01, 50)
    assert table.value(2, 8, 28.284271247461902 * (1 + 1e-12)) == 0.01
    with pytest.raises(InvalidParams):
        table.value(2, 9, 28.28)
    assert omega_to_Omega(table, 2, 8, 10.0, delta=0.004, N=-2.0) == \
        pytest.approx(0.018)
    assert omega_to_Omega(table, 2, 8, 10.0, delta=0.3, N=-2.0) == 1.0
    assert omega_to_Omega(table, 2, 8, 10.0, delta=0.25, N=-2.0) == 1.0
    table.add(2, 8, 28.284271247461902, 0.9, 50)
    assert omega_to_Omega(table, 2, 8, 10.0, delta=0.1, N=-2.0) == 1.0
    with pytest.raises(InvalidParams):
        omega_to_Omega(table, 2, 8, 10.0, delta=-0.1, N=-2.0)
