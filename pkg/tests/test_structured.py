import numpy as np
import pytest

from structmc.generators import GeneratorSpec, gen_low_rank_sparse, normalize_spectral
from structmc.harness import relative_error
from structmc.sampling import ObservationMask, gather_missing, project, structured_sample
from structmc.seeding import make_rng
from structmc.sirls import LowRankConfig, solve_sirls
from structmc.structured import (StructuredConfig, nonneg_threshold,
                                 solve_structured_sirls, sparsity_step,
                                 sparsity_weights)


def test_sparsity_weights_examples():
    eps = 0.04
    assert np.allclose(sparsity_weights(np.zeros(4), eps, 1.0), eps ** -0.5)
    assert sparsity_weights(np.array([3.0]), 16.0, 1.0)[0] == pytest.approx(0.2)
    # q = 2 (admitted for testing): exponent 0, all ones
    z = make_rng(0).standard_normal(6)
    assert np.allclose(sparsity_weights(z, 0.5, 2.0), 1.0)
    w = sparsity_weights(z, 1e-8, 1.0)
    assert np.all(w > 0) and np.all(np.isfinite(w))
    with pytest.raises(ValueError):
        sparsity_weights(z, 0.0, 1.0)


def test_sparsity_step_examples():
    z = np.array([0.2])
    assert sparsity_step(z, np.array([5.0]), 0.0)[0] == 0.2
    assert sparsity_step(z, np.array([5.0]), 0.1)[0] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        sparsity_step(np.zeros(3), np.zeros(2), 0.1)
    with pytest.raises(ValueError):
        sparsity_step(z, np.array([5.0]), -1.0)


def test_sparsity_step_contracts_toward_zero():
    rng = make_rng(1)
    z = rng.standard_normal(50)
    w = sparsity_weights(z, 0.5, 1.0)
    c = 0.5 / w.max()  # ensures c*w_i < 1
    z_new = sparsity_step(z, w, c)
    assert np.all(np.abs(z_new) <= np.abs(z))
    nz = z != 0
    assert np.all(np.abs(z_new[nz]) < np.abs(z[nz]))
    # l1 norm strictly decreases for nonzero z
    assert np.abs(z_new).sum() < np.abs(z).sum()


def test_sparsity_gradient_identity():
    # fixed-weight objective g(z) = sum w_i z_i^2 has gradient 2 w z, so a
    # gradient step with size c/2 is exactly sparsity_step with c
    rng = make_rng(2)
    z = rng.standard_normal(20)
    w = sparsity_weights(z, 0.3, 1.0)

    def g(v):
        return float(np.sum(w * v * v))

    h = 1e-7
    grad_fd = np.array([(g(z + h * e) - g(z - h * e)) / (2 * h)
                        for e in np.eye(20)])
    grad = 2.0 * w * z
    assert np.linalg.norm(grad - grad_fd) / np.linalg.norm(grad_fd) < 1e-6
    c = 1e-3
    assert np.allclose(sparsity_step(z, w, c), z - (c / 2) * grad, atol=1e-15)


def test_nonneg_threshold():
    assert nonneg_threshold(np.array([0.5, 2.0])).tolist() == [0.5, 2.0]
    assert nonneg_threshold(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]


def test_solve_full_observation():
    M = make_rng(3).standard_normal((8, 8))
    res = solve_structured_sirls(M, ObservationMask.full(8, 8))
    assert res.iterations == 1 and res.converged
    assert relative_error(M, res.X_hat) == 0.0


def test_solve_requires_observations():
    with pytest.raises(ValueError):
        solve_structured_sirls(np.eye(3), ObservationMask.empty(3, 3))


def _rank1_zero_missing_instance(seed=21, zero_frac=0.3):
    # rank-1 with sparse factors: the zero entries form a row/column cross, so
    # masking every nonzero keeps the truth rank-1 with zero missing entries
    rng = make_rng(seed)
    u = rng.random(10) + 0.5
    v = rng.random(10) + 0.5
    u[rng.random(10) < zero_frac] = 0.0
    v[rng.random(10) < zero_frac] = 0.0
    M = np.outer(u, v)
    mask = structured_sample(M, 0.0, 1.0, rng=seed + 1)
    return M, mask


def test_solve_zero_missing_rank1():
    M, mask = _rank1_zero_missing_instance()
    assert np.all(gather_missing(M, mask) == 0.0)
    cfg = StructuredConfig(lowrank=LowRankConfig(max_iter=1000, rank_input=1, seed=0))
    res = solve_structured_sirls(project(M, mask), mask, cfg)
    assert relative_error(M, res.X_hat) < 1e-4


def test_ks_zero_reduces_to_baseline():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(40, 40, 4, seed=3)))
    mask = structured_sample(M, 0.3, 0.8, rng=2)
    M_obs = project(M, mask)
    base = solve_sirls(M_obs, mask, LowRankConfig(
        max_iter=200, rank_input=4, seed=5, steps_per_refresh=10))
    struct = solve_structured_sirls(M_obs, mask, StructuredConfig(
        lowrank=LowRankConfig(max_iter=200, rank_input=4, seed=5), k_s=0, k_l=10))
    assert np.max(np.abs(base.X_hat - struct.X_hat)) < 1e-12
    assert np.array_equal(base.distance_trace, struct.distance_trace)


def test_sparsity_block_only_touches_missing_entries():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(30, 30, 3, seed=7)))
    mask = structured_sample(M, 0.2, 0.9, rng=8)
    M_obs = project(M, mask)
    lr = LowRankConfig(max_iter=100, rank_input=3, seed=5)
    with_ks = solve_structured_sirls(M_obs, mask, StructuredConfig(lowrank=lr, k_s=1))
    without_ks = solve_structured_sirls(M_obs, mask, StructuredConfig(lowrank=lr, k_s=0))
    assert np.array_equal(project(with_ks.X_hat, mask), M_obs)
    assert np.array_equal(project(without_ks.X_hat, mask), M_obs)
    # the two runs may differ, but only on the missing entries
    diff = with_ks.X_hat - without_ks.X_hat
    assert np.all(diff[mask.observed] == 0.0)


def test_observed_preserved_every_iteration():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(20, 20, 2, seed=9)))
    mask = structured_sample(M, 0.3, 0.8, rng=10)
    M_obs = project(M, mask)
    for max_iter in (1, 2, 7):
        cfg = StructuredConfig(lowrank=LowRankConfig(
            max_iter=max_iter, rank_input=2, seed=1))
        res = solve_structured_sirls(M_obs, mask, cfg)
        assert np.array_equal(project(res.X_hat, mask), M_obs)


def test_nonneg_flag_does_not_hurt_nonnegative_truth():
    M, mask = _rank1_zero_missing_instance(seed=31)
    M_obs = project(M, mask)
    lr = LowRankConfig(max_iter=500, rank_input=1, seed=0)
    plain = solve_structured_sirls(M_obs, mask, StructuredConfig(lowrank=lr))
    thresh = solve_structured_sirls(M_obs, mask,
                                    StructuredConfig(lowrank=lr, nonneg=True))
    assert (relative_error(M, thresh.X_hat)
            <= relative_error(M, plain.X_hat) + 1e-12)
    assert np.all(gather_missing(thresh.X_hat, mask) >= 0.0)


def test_mu_shift_roundtrip():
    # shifting by the constant the missing entries cluster around and back
    M, mask = _rank1_zero_missing_instance(seed=41)
    mu = 2.5
    M_shifted = M + mu
    cfg = StructuredConfig(lowrank=LowRankConfig(max_iter=1000, rank_input=1, seed=0),
                           mu_shift=mu)
    res = solve_structured_sirls(project(M_shifted, mask), mask, cfg)
    assert relative_error(M_shifted, res.X_hat) < 1e-4
    assert np.array_equal(project(res.X_hat, mask), project(M_shifted, mask))


def test_z_l1_trace_recorded():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(15, 15, 2, seed=5)))
    mask = structured_sample(M, 0.4, 0.9, rng=6)
    res = solve_structured_sirls(project(M, mask), mask)
    assert res.z_l1_trace is not None
    assert res.z_l1_trace.size == res.iterations
    assert np.all(res.z_l1_trace >= 0)


def test_structured_beats_baseline_in_structured_regime():
    wins = 0
    for seed in range(3):
        M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(60, 60, 5, seed=seed)))
        mask = structured_sample(M, 0.2, 0.9, rng=50 + seed)
        M_obs = project(M, mask)
        e_b = relative_error(M, solve_sirls(
            M_obs, mask, LowRankConfig(rank_input=5, seed=1)).X_hat)
        e_s = relative_error(M, solve_structured_sirls(
            M_obs, mask, StructuredConfig(
                lowrank=LowRankConfig(max_iter=1000, rank_input=5, seed=1))).X_hat)
        wins += e_s < e_b
    assert wins >= 2


def test_large_scale_structured_regime_average_ratio():
    # 1000x1000 rank-10, zero-rate 0.3 / nonzero-rate 0.8: the structured
    # solver wins on average over 3 seeds (takes ~30 s)
    ratios = []
    for t in range(3):
        from structmc.seeding import derive_seed
        M = normalize_spectral(gen_low_rank_sparse(
            GeneratorSpec(1000, 1000, 10, seed=derive_seed(60, t))))
        mask = structured_sample(M, 0.3, 0.8, rng=derive_seed(61, t))
        M_obs = project(M, mask)
        e_b = relative_error(M, solve_sirls(
            M_obs, mask, LowRankConfig(rank_input=10, seed=1)).X_hat)
        e_s = relative_error(M, solve_structured_sirls(
            M_obs, mask, StructuredConfig(lowrank=LowRankConfig(
                max_iter=1000, rank_input=10, seed=1))).X_hat)
        ratios.append(e_s / e_b)
    assert np.mean(ratios) < 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        StructuredConfig(q=1.5)
    with pytest.raises(ValueError):
        StructuredConfig(k_s=-1)
    with pytest.raises(ValueError):
        StructuredConfig(k_l=0)
    with pytest.raises(ValueError):
        StructuredConfig(c_rule=-1e-6)


def test_eps_schedule_must_be_nonincreasing():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(10, 10, 2, seed=6)))
    mask = structured_sample(M, 0.5, 0.9, rng=7)
    cfg = StructuredConfig(lowrank=LowRankConfig(rank_input=2, max_iter=5),
                           eps_schedule=lambda k: 0.1 * k)
    with pytest.raises(ValueError):
        solve_structured_sirls(project(M, mask), mask, cfg)


def test_adaptive_eps_schedule_runs():
    M, mask = _rank1_zero_missing_instance(seed=51)
    cfg = StructuredConfig(
        lowrank=LowRankConfig(max_iter=500, rank_input=1, seed=0),
        eps_schedule="adaptive_z")
    res = solve_structured_sirls(project(M, mask), mask, cfg)
    assert relative_error(M, res.X_hat) < 1e-3


@pytest.mark.parametrize("p,q", [(0.0, 0.0), (0.5, 0.5), (0.0, 1.0)])
def test_solver_supports_whole_exponent_range(p, q):
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(20, 20, 2, seed=12)))
    mask = structured_sample(M, 0.3, 0.9, rng=13)
    cfg = StructuredConfig(lowrank=LowRankConfig(p=p, rank_input=2,
                                                 max_iter=300, seed=1), q=q)
    res = solve_structured_sirls(project(M, mask), mask, cfg)
    assert np.isfinite(res.X_hat).all()
    assert relative_error(M, res.X_hat) < 0.5


def test_c_rule_callable():
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(15, 15, 2, seed=8)))
    mask = structured_sample(M, 0.3, 0.9, rng=9)
    cfg = StructuredConfig(lowrank=LowRankConfig(rank_input=2, max_iter=100),
                           c_rule=lambda k: 1e-6 / k)
    res = solve_structured_sirls(project(M, mask), mask, cfg)
    assert np.isfinite(res.X_hat).all()
