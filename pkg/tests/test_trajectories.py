import math

import numpy as np
import pytest

import oracles
from conftest import random_density
from mris import extended, fixtures, models, trajectories
from mris.trajectories import TrajectoryConfig


def test_trajectory_config_validation():
    with pytest.raises(trajectories.TrajectoryError):
        TrajectoryConfig(n_steps=0, n_traj=1, seed=0)
    with pytest.raises(trajectories.TrajectoryError):
        TrajectoryConfig(n_steps=1, n_traj=1, seed=0, chunk=0)
    with pytest.raises(trajectories.TrajectoryError):
        TrajectoryConfig(n_steps=1, n_traj=1, seed=0, initial="blah")


def test_simulate_states_matches_one_step_oracle(canonical, rng):
    path = ["hot", "cold", "cold", "hot"]
    rho0 = random_density(rng, 2)
    states = trajectories.simulate_states(canonical, path, rho0=rho0)
    np.testing.assert_allclose(states[0], rho0, atol=1e-15)
    rho = rho0
    for k, label in enumerate(path[1:], start=1):
        rho = oracles.reduced_map_oracle(canonical.u[label],
                                         canonical.rho_env[label], rho)
        np.testing.assert_allclose(states[k], rho, atol=1e-13)
        assert abs(np.trace(states[k]) - 1) < 1e-12


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

def _oracle_branches(model, n):
    labels = model.labels
    return oracles.full_statistics_oracle(
        model.chain.pi, model.chain.P,
        [model.rho_init[l] for l in labels],
        [model.u[l] for l in labels],
        [model.rho_env[l] for l in labels], n)


def _svec_law(pairs, decimals=9):
    law = {}
    for prob, svec in pairs:
        key = tuple(np.round(svec, decimals))
        law[key] = law.get(key, 0.0) + prob
    return law


@pytest.mark.parametrize("n", [1, 2, 3])
def test_enumeration_against_branch_oracle(canonical, n):
    dist = trajectories.enumerate_full_statistics(canonical, n)
    assert abs(dist.total_probability() - 1.0) < 1e-12
    assert dist.probs.min() > -1e-14

    branches = _oracle_branches(canonical, n)
    # the joint law of the per-probe entropy vector must agree exactly
    law = _svec_law(zip(dist.probs, dist.svecs))
    want = _svec_law((p, s) for p, s, _ in branches)
    assert set(law) == set(want)
    for key in want:
        assert abs(law[key] - want[key]) < 1e-12

    for alpha in ([0.0, 0.0], [0.4, -0.3], [1.0, 1.0], [-0.8, 0.2]):
        got = dist.deformed_expectation(alpha)
        ref = oracles.deformed_expectation_oracle(branches, np.asarray(alpha))
        assert abs(got - ref) < 1e-12


def test_enumeration_guard_trips():
    m = fixtures.two_temperature_qubit()
    with pytest.raises(trajectories.TrajectoryError, match="guard"):
        trajectories.enumerate_full_statistics(m, 9)


def test_enumeration_word_bookkeeping(canonical):
    dist = trajectories.enumerate_full_statistics(canonical, 2)
    assert dist.words.shape == (len(dist.probs), 2, 2)
    # replaying the word's deltas must reproduce the branch svec
    for b in range(0, len(dist.probs), 7):
        svec = np.zeros(2)
        for w, x in dist.words[b]:
            svec[w] += canonical.unravelings[canonical.labels[w]].deltas[x]
        np.testing.assert_allclose(svec, dist.svecs[b], atol=1e-14)


# ---------------------------------------------------------------------------
# the sampling engine
# ---------------------------------------------------------------------------

def test_sampler_bitwise_deterministic_across_chunks_and_threads(canonical):
    base = TrajectoryConfig(n_steps=60, n_traj=45, seed=99)
    ref = trajectories.sample_entropy_process(canonical, base)
    for chunk, threads in ((7, 1), (512, 3), (11, 4)):
        cfg = TrajectoryConfig(n_steps=60, n_traj=45, seed=99,
                               chunk=chunk, n_threads=threads)
        got = trajectories.sample_entropy_process(canonical, cfg)
        assert np.array_equal(got.svec, ref.svec)
        assert got.floored == ref.floored


def test_sampler_reproduces_exact_law(canonical):
    """At n = 3 the sampled entropy vectors must follow the enumerated law."""
    n, t = 3, 4000
    dist = trajectories.enumerate_full_statistics(canonical, n, keep_words=False)
    law = _svec_law(zip(dist.probs, dist.svecs))

    sample = trajectories.sample_entropy_process(
        canonical, TrajectoryConfig(n_steps=n, n_traj=t, seed=2024))
    counts = {}
    for row in np.round(sample.svec, 9):
        key = tuple(row)
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) <= set(law)

    for key, p in law.items():
        if p < 5e-4:
            continue
        freq = counts.get(key, 0) / t
        sigma = math.sqrt(p * (1 - p) / t)
        assert abs(freq - p) < 4 * sigma, (key, freq, p)


def test_empirical_cumulant_agrees_with_exact_moment(canonical):
    n, t = 3, 4000
    alpha = np.array([0.3, -0.2])
    dist = trajectories.enumerate_full_statistics(canonical, n, keep_words=False)
    sample = trajectories.sample_entropy_process(
        canonical, TrajectoryConfig(n_steps=n, n_traj=t, seed=77))
    vals = np.exp(-sample.svec @ alpha)
    z = (vals.mean() - dist.deformed_expectation(alpha)) / (vals.std(ddof=1) / math.sqrt(t))
    assert abs(z) < 4
    # and the log form is just the stabilized version of the same number
    assert abs(math.exp(n * trajectories.empirical_cumulant(sample, alpha))
               - vals.mean()) < 1e-12


def test_sampler_flags_corrupted_outcome_law():
    m = fixtures.two_temperature_qubit()
    entry = m.unravelings["hot"]
    entry._prob_ops = entry._prob_ops * 1.01
    with pytest.raises(trajectories.NumericalCorruption):
        trajectories.sample_entropy_process(
            m, TrajectoryConfig(n_steps=20, n_traj=8, seed=5))


def test_decoupled_model_exchanges_nothing(decoupled):
    sample = trajectories.sample_entropy_process(
        decoupled, TrajectoryConfig(n_steps=40, n_traj=12, seed=3))
    assert np.all(sample.svec == 0.0)


# ---------------------------------------------------------------------------
# ergodic averages
# ---------------------------------------------------------------------------

def test_ergodic_average_hits_steady_expectation(canonical):
    x = models.flux_extended(canonical, "hot")
    r_plus, _ = canonical.ess()
    exact = extended.expectation(r_plus, x)
    est = trajectories.ergodic_average(
        canonical, x,
        TrajectoryConfig(n_steps=2000, n_traj=200, seed=11, initial="stationary"))
    assert est.stderr > 0
    assert abs(est.mean - exact) < 4 * est.stderr


def test_ergodic_average_pairs_observable_with_entering_state(canonical):
    """One step, one trajectory: the estimate must be tr(rho_0 X(w_1)), i.e.
    the state entering the interaction, not the one leaving it."""
    cfg = TrajectoryConfig(n_steps=1, n_traj=1, seed=1)
    x = models.flux_extended(canonical, "cold")
    est = trajectories.ergodic_average(canonical, x, cfg)
    # replay the same path by hand
    paths, _ = trajectories._batch_paths(canonical, 0, 1, cfg)
    w0, w1 = (canonical.labels[i] for i in paths[0])
    want = np.trace(canonical.rho_init[w0] @ x.block(w1)).real
    assert abs(est.mean - want) < 1e-14


# ---------------------------------------------------------------------------
# flux autocorrelation
# ---------------------------------------------------------------------------

def test_autocorrelation_requires_kept_increments(canonical):
    sample = trajectories.sample_entropy_process(
        canonical, TrajectoryConfig(n_steps=10, n_traj=4, seed=1))
    with pytest.raises(trajectories.TrajectoryError):
        trajectories.flux_autocorrelation(sample, "hot", "hot")


def test_autocorrelation_empirical_matches_analytic(canonical):
    sample = trajectories.sample_entropy_process(
        canonical, TrajectoryConfig(n_steps=3000, n_traj=300, seed=8,
                                    initial="stationary", keep_increments=True))
    for omega in canonical.labels:
        for nu in canonical.labels:
            exact = trajectories.flux_autocorrelation(canonical, omega, nu,
                                                      max_lag=5)
            emp = trajectories.flux_autocorrelation(sample, omega, nu, max_lag=5)
            assert emp.mode == "empirical"
            for k in range(6):
                z = (emp.values[k] - exact.values[k]) / emp.stderr[k]
                assert abs(z) < 4, (omega, nu, k, z)


def test_autocorrelation_decays(canonical):
    exact = trajectories.flux_autocorrelation(canonical, "hot", "hot", max_lag=40)
    assert abs(exact.values[40]) < 1e-3 * abs(exact.values[0])
