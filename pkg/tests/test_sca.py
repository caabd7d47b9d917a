import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arisee import model, sca
from arisee.config import ScenarioConfig, db_to_linear


def n1_instance():
    """Single UE at the origin, one ARIS, direct link negligible."""
    cfg = ScenarioConfig(n_ues=1, n_aris=1, n_elements=1, n_antennas=1, direct_loss=1e-12)
    geom = model.Geometry(cfg.bs_position, np.zeros((1, 3)), model.circle_placement(cfg))
    fad = model.draw_fading(np.random.default_rng(0), cfg)
    ris = model.RisControl.all_on(cfg)
    g = np.ones((1, 1)) * math.sqrt(cfg.p_max)
    return cfg, geom, fad, ris, g


def grid_oracle(cfg):
    xs = np.arange(0, cfg.area + 1.0)
    x, y = np.meshgrid(xs, xs)
    p = np.stack([x.ravel(), y.ravel(), np.full(x.size, cfg.aris_altitude)], 1)
    d_b = np.linalg.norm(p - cfg.bs_position, axis=1)
    d_k = np.linalg.norm(p, axis=1)
    return p[np.argmax(d_b ** -cfg.path_loss_exp * d_k ** -cfg.path_loss_exp)]


def desk_problem(desk, seed):
    rng = np.random.default_rng(seed)
    geom = model.make_geometry(rng, desk)
    ch, fad = model.sample_channels(rng, desk, geom)
    ris = model.RisControl.random(rng, desk)
    g = model.mrt_beamformer(model.effective_channels(ch, ris), desk.p_max)
    return geom, ch, fad, ris, g


# -- surrogate construction -------------------------------------------------


def test_surrogate_outer_product_structure():
    cfg = ScenarioConfig(n_ues=1, n_aris=1, n_elements=1, n_antennas=1)
    geom = model.Geometry(cfg.bs_position, np.zeros((1, 3)), np.array([[30.0, 40.0, 20.0]]))
    c = 0.7
    ch = model.ChannelRealization(np.array([[c + 0j]]), np.ones((1, 1, 1), complex), np.ones((1, 1, 1), complex))
    sur = sca.build_surrogate(cfg, geom, ch, model.RisControl.all_off(cfg), np.ones((1, 1)))
    assert np.allclose(sur.H_prime[0, 0], [[c ** 2, 0], [0, 0]])


def test_surrogate_psd_and_hop_amplitudes(desk):
    for seed in range(100):
        geom, ch, _, ris, g = desk_problem(desk, seed) if seed < 5 else desk_problem(desk, seed % 5)
        sur = sca.build_surrogate(desk, geom, ch, ris, g)
        eig = np.linalg.eigvalsh(sur.H_prime.reshape(-1, *sur.H_prime.shape[2:]))
        assert np.all(eig >= -1e-12 * np.max(np.abs(eig)))
        if seed >= 5:
            break
    a, b = sur.h_ab
    d_bn = np.linalg.norm(geom.aris - geom.bs, axis=1)
    d_nk = np.linalg.norm(geom.aris[:, None] - geom.ues[None], axis=2)
    assert np.allclose(a, np.sqrt(d_bn ** -4.0))
    assert np.allclose(b, np.sqrt(d_nk ** -4.0))


def test_surrogate_psd_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = model.complex_normal(rng, (2, 2, 3))
        h = v[..., :, None] * np.conj(v[..., None, :])
        assert np.all(np.linalg.eigvalsh(h) >= -1e-12)


def test_surrogate_degenerate_geometry():
    cfg = ScenarioConfig(n_ues=1, n_aris=1)
    geom = model.Geometry(cfg.bs_position, np.array([[10.0, 10.0, 20.0]]), np.array([[10.0, 10.0, 20.0]]))
    with pytest.raises(ValueError):
        sca.hop_amplitudes(cfg, geom)


# -- DC decomposition and minorant ------------------------------------------


def _rate(p, sigma2):
    p = np.asarray(p)
    sig = np.diagonal(p)
    inter = p.sum(axis=1) - sig
    return float(np.sum(np.log2(1 + sig / (inter + sigma2))))


def test_dc_single_ue_constant_l_hat():
    dc = sca.dc_decompose(0.1)
    p = np.array([[3.0]])
    assert dc.l_hat(p) == pytest.approx(math.log2(0.1))
    assert np.all(dc.grad_l_hat(p) == 0)
    assert dc.h_hat(p) - dc.l_hat(p) == pytest.approx(_rate(p, 0.1))


def test_dc_gradient_finite_difference():
    rng = np.random.default_rng(1)
    dc = sca.dc_decompose(0.05)
    for _ in range(20):
        p = rng.uniform(0.01, 2.0, (3, 3))
        grad = dc.grad_l_hat(p)
        fd = np.zeros_like(p)
        h = 1e-6
        for idx in np.ndindex(p.shape):
            e = np.zeros_like(p)
            e[idx] = h
            fd[idx] = (dc.l_hat(p + e) - dc.l_hat(p - e)) / (2 * h)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-9)


def test_minorant_tangency_and_bound_sampled():
    rng = np.random.default_rng(2)
    sigma2 = 0.01
    dc = sca.dc_decompose(sigma2)
    worst = -np.inf
    for _ in range(10_000):
        prev = rng.exponential(1.0, (3, 3))
        cur = rng.exponential(1.0, (3, 3))
        exact = _rate(cur, sigma2)
        worst = max(worst, sca.surrogate_lower_bound(dc, cur, prev) - exact)
        assert sca.surrogate_lower_bound(dc, prev, prev) == pytest.approx(_rate(prev, sigma2), abs=1e-9)
    assert worst <= 1e-9


def test_minorant_exact_for_linear_l_hat():
    c = np.array([[0.3, -0.1], [0.2, 0.5]])
    dc = sca.DcDecomposition(lambda p: float(np.sum(np.log(p + 1))), lambda p: float(np.sum(c * p)),
                             lambda p: c)
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = rng.uniform(0, 3, (2, 2, 2))
        assert sca.surrogate_lower_bound(dc, a, b) == pytest.approx(dc.h_hat(a) - dc.l_hat(a))


# -- Taylor bounds ------------------------------------------------------------


def test_pathloss_bound_hand_example():
    c0, c1 = sca.taylor_pathloss_bound(1.0, 4.0)
    assert (c0, c1) == pytest.approx((2.0, -1.0))
    assert c0 + c1 * 1.0 == pytest.approx(1.0)


@given(st.floats(1e-3, 10.0), st.floats(2.0, 4.0))
def test_pathloss_bound_tight(a0, alpha):
    c0, c1 = sca.taylor_pathloss_bound(a0, alpha)
    assert c0 + c1 * a0 == pytest.approx(a0 ** (-4 / alpha), rel=1e-12)


@pytest.mark.parametrize("a0,alpha", [(1.0, 4.0), (0.01, 3.0), (2.5, 2.0)])
def test_pathloss_bound_grid(a0, alpha):
    c0, c1 = sca.taylor_pathloss_bound(a0, alpha)
    a = np.linspace(10 * a0 / 1000, 10 * a0, 1000)
    viol = c0 + c1 * a - a ** (-4 / alpha)
    assert np.max(viol / np.maximum(1.0, a ** (-4 / alpha))) <= 1e-12


@pytest.mark.parametrize("a0", [0.0, -1.0])
def test_pathloss_bound_rejects_nonpositive(a0):
    with pytest.raises(ValueError):
        sca.taylor_pathloss_bound(a0, 4.0)


def test_quadratic_bound_identity_example():
    h0 = np.array([1.0, 1.0])
    for a, b in [(0.0, 0.0), (2.0, -1.0), (0.5, 3.0)]:
        bound = sca.taylor_quadratic_bound(np.eye(2), [a, b], h0)
        assert bound == pytest.approx(2 * (a + b) - 2)
        assert bound <= a * a + b * b
    assert sca.taylor_quadratic_bound(np.eye(2), h0, h0) == pytest.approx(2.0)


def test_quadratic_bound_sampled_psd():
    rng = np.random.default_rng(4)
    worst = -np.inf
    for _ in range(10_000):
        v = rng.standard_normal(2)
        hp = np.outer(v, v) + rng.uniform(0, 1) * np.eye(2)
        h0 = rng.uniform(0, 2, 2)
        h = rng.uniform(0, 2, 2)
        worst = max(worst, sca.taylor_quadratic_bound(hp, h, h0) - sca.quadratic_form(hp, h))
        assert sca.taylor_quadratic_bound(hp, h0, h0) == pytest.approx(sca.quadratic_form(hp, h0))
    assert worst <= 1e-9


# -- separation linearization -----------------------------------------------


def test_separation_tangent_and_minorant():
    rng = np.random.default_rng(5)
    worst = -np.inf
    for _ in range(10_000):
        qi0, qj0 = rng.uniform(0, 100, (2, 3))
        lin = sca.linearize_separation(qi0, qj0)
        assert sca.separation_value(lin, qi0, qj0) == pytest.approx(np.sum((qi0 - qj0) ** 2))
        qi, qj = rng.uniform(0, 100, (2, 3))
        worst = max(worst, sca.separation_value(lin, qi, qj) - np.sum((qi - qj) ** 2))
    assert worst <= 1e-9


def test_separation_monotone_along_difference():
    lin = sca.linearize_separation([1.0, 0, 0], [0.0, 0, 0])
    values = [sca.separation_value(lin, [1.0 + t, 0, 0], [-t, 0, 0]) for t in (0.0, 0.5, 1.0)]
    assert values[0] < values[1] < values[2]


def test_separation_coincident_jitter_warns():
    with pytest.warns(RuntimeWarning):
        lin = sca.linearize_separation([5.0, 5, 5], [5.0, 5, 5], d_min=10.0)
    assert np.linalg.norm(lin[2] - lin[3]) == pytest.approx(1.0)


# -- subproblem and outer loop ---------------------------------------------


def test_n1_matches_grid_oracle():
    cfg, geom, fad, ris, g = n1_instance()
    sol = sca.sca_iterate(cfg, geom, fad, ris, g)
    best = grid_oracle(cfg)
    assert np.linalg.norm(sol.positions[0, :2] - best[:2]) <= 2.0


def test_zero_iteration_cap_returns_start():
    cfg, geom, fad, ris, g = n1_instance()
    sol = sca.sca_iterate(cfg, geom, fad, ris, g, sca.ScaParams(max_iter=0))
    assert np.array_equal(sol.positions, geom.aris)
    assert sol.iterations == 0 and len(sol.objective_trace) == 1


def test_huge_eps_stops_after_one_iteration():
    cfg, geom, fad, ris, g = n1_instance()
    sol = sca.sca_iterate(cfg, geom, fad, ris, g, sca.ScaParams(eps=1e9))
    assert sol.iterations == 1 and sol.converged


def test_vanishing_d_min_matches_inactive_separation(desk):
    # config requires d_min > 0; a vanishing value is the limiting case
    geom, ch, _, ris, g = desk_problem(desk, 1)
    sur = sca.build_surrogate(desk, geom, ch, ris, g)
    q_small, _, v_small, _ = sca.solve_convex_subproblem(desk.with_(d_min=1e-9), geom, sur)
    q_ref, _, v_ref, _ = sca.solve_convex_subproblem(desk, geom, sur)
    assert np.linalg.norm(geom.aris[0] - geom.aris[1]) >= 5 * desk.d_min
    # the local model is flat along some directions, so compare optimal values
    assert v_small == pytest.approx(v_ref, rel=1e-3)
    assert sca.separation_ok(q_small, desk.d_min)


def test_subproblem_does_not_lose_surrogate_value(desk):
    geom, ch, _, ris, g = desk_problem(desk, 0)
    sur = sca.build_surrogate(desk, geom, ch, ris, g)
    sp = sca._Subproblem(desk, geom, sur, sca.ScaParams(), 10.0)
    start = sp.surrogate_value(sp.start(shrink=0.0))
    _, _, val, _ = sca.solve_convex_subproblem(desk, geom, sur)
    assert val >= start - 1e-6 * abs(start)


def test_subproblem_infeasible_separation(desk):
    geom, ch, _, ris, g = desk_problem(desk, 0)
    close = geom.with_aris(np.array([[40.0, 40.0, 20.0], [45.0, 40.0, 20.0]]))
    sur = sca.build_surrogate(desk, close, ch, ris, g)
    with pytest.raises(sca.InfeasibleError) as err:
        sca.solve_convex_subproblem(desk.with_(d_min=50.0), close, sur)
    assert "separation" in err.value.violated


def test_no_feasible_start_raises():
    cfg = ScenarioConfig(n_aris=4, d_min=500.0)
    geom = model.Geometry(cfg.bs_position, np.zeros((1, 3)), np.zeros((4, 3)) + [50, 50, 20])
    with pytest.raises(sca.InfeasibleError):
        sca.feasible_start(cfg, geom, np.random.default_rng(0), restarts=2)


@pytest.mark.parametrize("seed", range(3))
def test_monotone_trace_and_feasible_output(desk, seed):
    geom, _, fad, ris, g = desk_problem(desk, seed)
    sol = sca.sca_iterate(desk, geom, fad, ris, g, sca.ScaParams(max_iter=10))
    assert np.all(np.diff(sol.objective_trace) >= -1e-6)
    assert sca.separation_ok(sol.positions, desk.d_min)
    assert np.all((sol.positions[:, :2] >= 0) & (sol.positions[:, :2] <= desk.area))
