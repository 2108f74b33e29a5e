import numpy as np
import pytest

from compobs.errors import ConfigError
from compobs.experiments import (
    FIG6_OMEGA_SETS,
    ExperimentConfig,
    cluster_sparse_state,
    com_verification_suite,
    multi_time_sweep,
    noise_histogram,
    phase_transition,
    rate_point,
    scattered_sparse_state,
    simulate,
)


def test_cluster_state_is_a_square():
    x = cluster_sparse_state((10, 10), (3, 3), seed=4).reshape(10, 10)
    rows, cols = np.nonzero(x)
    assert rows.size == 9
    assert rows.max() - rows.min() == 2 and cols.max() - cols.min() == 2
    assert np.all(x[x != 0] > 0)


def test_cluster_state_path_and_full_grid():
    x = cluster_sparse_state((1, 100), (1, 10), seed=1, amplitude="unit")
    idx = np.flatnonzero(x)
    assert idx.size == 10 and np.all(np.diff(idx) == 1) and np.all(x[idx] == 1)
    a = cluster_sparse_state((3, 3), (3, 3), seed=1)
    b = cluster_sparse_state((3, 3), (3, 3), seed=2)
    assert np.all(a != 0) and np.all(b != 0)
    with pytest.raises(ConfigError):
        cluster_sparse_state((2, 5), (3, 3), seed=0)


def test_scattered_state():
    x = scattered_sparse_state(100, 10, seed=3)
    assert np.count_nonzero(x) == 10 and set(x[x != 0]) == {1.0}
    g = scattered_sparse_state(50, 5, seed=3, amplitude="gaussian")
    assert np.count_nonzero(g) == 5


def test_config_validation():
    cfg = ExperimentConfig()
    assert cfg.N == 100 and cfg.S == 9
    with pytest.raises(ConfigError):
        ExperimentConfig(trials=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(block=(11, 3))
    with pytest.raises(ConfigError):
        ExperimentConfig(omega_sets=[[0, 20000]])
    with pytest.raises(ConfigError):
        ExperimentConfig(measurement="sparse")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(state="scattered", S=200)
    back = ExperimentConfig.from_dict(cfg.to_dict())
    assert back == cfg


def test_phase_transition_small_run():
    cfg = ExperimentConfig(M_list=[0, 10, 100], trials=6, omega_sets=[[0]], master_seed=3)
    (curve,) = phase_transition(cfg, threads=1)
    assert [p.M for p in curve] == [0, 10, 100]
    assert curve[0].rate == 0.0
    assert curve[2].rate == 1.0  # square Gaussian system
    for p in curve:
        assert p.exact_count == round(p.rate * p.trials)
        for r in p.records:
            assert not r.exact or r.rel_error <= cfg.exact_tol


def test_phase_requires_single_times():
    with pytest.raises(ConfigError):
        phase_transition(ExperimentConfig(omega_sets=[[0, 1]], trials=1))


def test_multi_time_matches_phase_point_for_single_time():
    cfg = ExperimentConfig(M_list=[30], trials=5, omega_sets=[[0]], master_seed=9)
    a = multi_time_sweep(cfg, threads=1)[0]
    b = phase_transition(cfg, threads=1)[0][0]
    assert a.rate == b.rate
    assert [r.l2_error for r in a.records] == [r.l2_error for r in b.records]


def test_thread_count_does_not_change_results():
    cfg = ExperimentConfig(M_list=[20], trials=8, omega_sets=[[0, 5]], measurement=["dense", "line"], master_seed=5)
    one = multi_time_sweep(cfg, threads=1)
    many = multi_time_sweep(cfg, threads=4)
    assert [r.csv_row() for p in one for r in p.records] == [r.csv_row() for p in many for r in p.records]


def test_same_seed_same_table():
    cfg = ExperimentConfig(M_list=[8], trials=4, omega_sets=[list(o) for o in FIG6_OMEGA_SETS[:3]], master_seed=1)
    a = [(p.omega, p.rate) for p in multi_time_sweep(cfg, 1)]
    b = [(p.omega, p.rate) for p in multi_time_sweep(cfg, 1)]
    assert a == b


def test_noise_histogram_small_noise_limit():
    cfg = ExperimentConfig(M_list=[60], trials=5, omega_sets=[[2]], noise_std=1e-9, master_seed=2)
    (p,) = noise_histogram(cfg, threads=1)
    assert all(r.l2_error <= 1e-3 for r in p.records)
    with pytest.raises(ConfigError):
        noise_histogram(ExperimentConfig(noise_std=0.0))


def test_noise_histogram_is_reproducible():
    cfg = ExperimentConfig(M_list=[16], trials=4, omega_sets=[[2]], noise_std=0.05, master_seed=2)
    a = [r.l2_error for r in noise_histogram(cfg, 1)[0].records]
    b = [r.l2_error for r in noise_histogram(cfg, 1)[0].records]
    assert a == b and all(np.isfinite(a))


def test_trial_records_exclude_wall_time():
    cfg = ExperimentConfig(M_list=[10], trials=2, master_seed=0)
    p = rate_point(cfg, "dense", 10, [0], threads=1)
    assert "wall_time" not in p.records[0].csv_row()


def test_simulate_conserves_mass():
    cfg = ExperimentConfig(experiment="simulate", grid=[1, 100], state="scattered", S=10, amplitude="unit",
                           sim_times=[0, 10, 100])
    times, states = simulate(cfg)
    assert list(times) == [0, 10, 100]
    assert np.count_nonzero(states[0]) == 10
    np.testing.assert_allclose(states.sum(axis=1), 10.0)


def test_com_suite_regimes():
    cfg = ExperimentConfig(experiment="com-verify", trials=200, com_regimes=["unitary", "scaled", "rotation", "identity"],
                           com_M=[16], com_K=[4], com_eps=[0.5], com_N=16, master_seed=1)
    reps = com_verification_suite(cfg, threads=1)
    assert [r.regime.value for r in reps] == ["unitary", "scaled-unitary", "identical", "identical"]
    unitary, scaled, rotation, identity = reps
    # the rotation keeps the A^k x0 orthogonal, so the identical-block bound equals the unitary one
    assert rotation.bound == pytest.approx(unitary.bound)
    # A = I leaves a single non-zero Gram eigenvalue: the weakest bound and the worst concentration
    assert identity.bound > rotation.bound
    assert identity.empirical_failure >= rotation.empirical_failure
    for r in reps:
        assert r.bound >= 1 or r.holds


def test_rates_grow_with_M_up_to_monte_carlo_slack():
    cfg = ExperimentConfig(M_list=[10, 20, 30, 40, 50], trials=20, omega_sets=[[0]], master_seed=4)
    rates = [p.rate for p in phase_transition(cfg, threads=1)[0]]
    assert all(b >= a - 0.1 for a, b in zip(rates, rates[1:]))
    assert rates[-1] > rates[0]


def test_deterministic_blocks_never_fail():
    from compobs.concentration import empirical_com
    from compobs.measure import MeasurementEnsemble, Sharing
    from compobs.system import SampleSet, random_orthogonal

    omega = SampleSet.consecutive(3)
    model = random_orthogonal(6, 1)

    def factory(seed):
        return MeasurementEnsemble((np.eye(6),) * 3, Sharing.IDENTICAL, "dense", seed)

    rep = empirical_com(model, omega, np.arange(1.0, 7.0), factory, 0.1, 100, 0, "unitary")
    assert rep.empirical_failure == 0.0
