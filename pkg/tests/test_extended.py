import numpy as np
import pytest

import oracles
from conftest import random_density, random_hermitian
from mris import chains, extended, fixtures, models


def _oracle_inputs(model):
    labels = model.labels
    return ([model.rho_init[l] for l in labels],
            [model.u[l] for l in labels],
            [model.rho_env[l] for l in labels])


def test_initial_state_matches_oracle(canonical):
    r0 = canonical.initial_state()
    rinit, _, _ = _oracle_inputs(canonical)
    blocks = oracles.initial_blocks_oracle(canonical.chain.pi, canonical.chain.P,
                                           rinit)
    np.testing.assert_allclose(r0.blocks, blocks, atol=1e-14)
    assert abs(r0.total_trace() - 1.0) < 1e-12
    np.testing.assert_allclose(r0.marginal(), canonical.chain.pi @ canonical.chain.P,
                               atol=1e-13)


def test_generator_apply_agrees_with_blockwise_action(canonical, rng):
    g = canonical.generator
    blocks = np.stack([random_density(rng, 2) for _ in canonical.labels]) / 2
    r = extended.ExtendedState(canonical.labels, blocks)
    fast = g.apply(r)
    slow = g.apply_blockwise(r)
    np.testing.assert_allclose(fast.blocks, slow.blocks, atol=1e-13)


def test_duality_against_recursive_path_sum(canonical, rng):
    """<L^n R0, X> equals the exhaustive average over probe words."""
    rinit, us, renvs = _oracle_inputs(canonical)
    g = canonical.generator
    for n in (1, 2, 3):
        x_blocks = [random_hermitian(rng, 2) for _ in canonical.labels]
        x = extended.ExtendedObservable(canonical.labels, np.stack(x_blocks))
        want = oracles.path_expectation_oracle(
            canonical.chain.pi, canonical.chain.P, rinit, us, renvs, x_blocks, n)
        rn = extended.evolve(g, canonical.initial_state(), n)
        got = extended.expectation(rn, x)
        assert abs(got - want) < 1e-12


def test_evolution_preserves_trace_and_positivity(canonical):
    r = canonical.initial_state()
    g = canonical.generator
    for _ in range(25):
        r = g.apply(r)
        r.check(canonical.tol)


def test_adjoint_is_the_pairing_dual(canonical, rng):
    g = canonical.generator
    blocks = np.stack([random_density(rng, 2) for _ in canonical.labels]) / 2
    r = extended.ExtendedState(canonical.labels, blocks)
    x = extended.ExtendedObservable(
        canonical.labels, np.stack([random_hermitian(rng, 2) for _ in canonical.labels]))
    lhs = extended.expectation(g.apply(r), x)
    xd = extended.ExtendedObservable(
        canonical.labels,
        extended.big_unvec(extended.adjoint_matrix(g) @ extended.big_vec(x.blocks),
                           len(canonical.labels), 2))
    rhs = extended.expectation(r, xd)
    assert abs(lhs - rhs) < 1e-12


def test_identity_is_fixed_by_the_adjoint(canonical):
    ident = extended.identity_observable(canonical.labels, 2)
    out = extended.adjoint_matrix(canonical.generator) @ extended.big_vec(ident.blocks)
    np.testing.assert_allclose(out, extended.big_vec(ident.blocks), atol=1e-12)


# ---------------------------------------------------------------------------
# steady states
# ---------------------------------------------------------------------------

def test_find_ess_fixed_point(canonical):
    r_plus, residual = extended.find_ess(canonical.generator)
    assert residual < 1e-12
    r_plus.check(canonical.tol)
    moved = canonical.generator.apply(r_plus)
    np.testing.assert_allclose(moved.blocks, r_plus.blocks, atol=1e-12)


def test_ess_decomposition_reconstructs(canonical):
    r_plus, _ = extended.find_ess(canonical.generator)
    dec = extended.ess_decompose(canonical.generator, r_plus)
    np.testing.assert_allclose(dec.pi_plus, [4 / 7, 3 / 7], atol=1e-12)
    assert dec.reconstruction_residual(canonical.generator, r_plus) < 1e-12
    for l in canonical.labels:
        rho = dec.rho_plus[l]
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_find_ess_refuses_degenerate_fixed_space(decoupled):
    with pytest.raises(extended.NotIrreducibleError) as err:
        extended.find_ess(decoupled.generator)
    assert err.value.multiplicity > 1


def test_classification_canonical_vs_decoupled(canonical, decoupled):
    cls = extended.classify_generator(canonical.generator)
    assert cls.kind == "primitive"
    assert cls.period == 1
    assert cls.gap > 0.1
    assert cls.eigenvalue_one_multiplicity == 1
    assert cls.ess_faithful

    cls2 = extended.classify_generator(decoupled.generator)
    assert cls2.kind == "reducible"
    assert cls2.eigenvalue_one_multiplicity > 1


def test_deformed_generator_at_zero_is_the_generator(canonical):
    g0 = extended.deformed_generator(canonical, np.zeros(2))
    np.testing.assert_allclose(g0.matrix, canonical.generator.matrix, atol=1e-13)


def test_deformed_generator_shrinks_spectral_radius_inside_gc_interval(canonical):
    # strict convexity of e: spr < 1 strictly between the symmetry points
    g = extended.deformed_generator(canonical, 0.5 * np.ones(2))
    w = np.abs(np.linalg.eigvals(g.matrix))
    assert w.max() < 1.0 - 1e-6


def test_generator_matrix_layout(canonical):
    """Block (w', w) of the matrix must be P[w, w'] times the step superop."""
    g = canonical.generator
    d2 = 4
    for wi, w in enumerate(canonical.labels):
        s_w = canonical.channels[w].superop
        for vi in range(len(canonical.labels)):
            block = g.matrix[vi * d2:(vi + 1) * d2, wi * d2:(wi + 1) * d2]
            np.testing.assert_allclose(
                block, canonical.chain.P[wi, vi] * s_w, atol=1e-14)


def test_periodic_driving_gives_periodic_generator():
    m = fixtures.two_temperature_qubit(p_matrix=[[0.0, 1.0], [1.0, 0.0]])
    cls = extended.classify_generator(m.generator)
    assert cls.kind == "irreducible_periodic"
    assert cls.period == 2
    # steady state still exists and is unique for the period-2 mixture
    r_plus, residual = extended.find_ess(m.generator)
    assert residual < 1e-10
