import math

import numpy as np
import pytest

from qloss.fock import (
    FockVector,
    HeraldSpec,
    conditional_state,
    conditional_state_any,
    evolve_pure,
    evolve_product_state,
    fock_basis,
    fock_layer_unitary,
    fock_space,
    format_state,
    herald_patterns_with_total,
    input_loss_mixture,
    oracle_conditional_state_dilated,
    partial_trace,
    transition_amplitude,
)
from qloss.loss_model import compose_lossy, gamma_for
from qloss.numerics import haar_unitary, permanent_bruteforce

BS = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_basis_size_and_rank_roundtrip():
    b = fock_basis(4, 3)
    assert len(b) == math.comb(6, 3)
    for r in range(len(b)):
        assert b.rank(b.unrank(r)) == r
        assert b.index[tuple(b.states[r])] == r
    assert format_state((1, 0, 2)) == "1|0|2"


def test_fock_space_layers():
    sp = fock_space(3, 2)
    assert len(sp) == 1 + 3 + 6
    assert list(sp.photon_numbers[:4]) == [0, 1, 1, 1]


def test_hong_ou_mandel():
    assert abs(transition_amplitude(BS, (1, 1), (1, 1))) < 1e-15
    assert abs(transition_amplitude(BS, (1, 1), (2, 0))) ** 2 == pytest.approx(0.5)


def test_transition_amplitude_against_bruteforce(rng):
    u = haar_unitary(4, 8)
    s, t = (2, 1, 0, 1), (0, 1, 3, 0)
    rows = [i for i, k in enumerate(t) for _ in range(k)]
    cols = [j for j, k in enumerate(s) for _ in range(k)]
    norm = math.prod(math.factorial(k) for k in s + t)
    ref = permanent_bruteforce(u[np.ix_(rows, cols)]) / math.sqrt(norm)
    assert transition_amplitude(u, s, t) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(ValueError):
        transition_amplitude(u, s, (1, 0, 0, 0))


def test_evolution_matches_layer_unitary():
    u = haar_unitary(3, 1)
    big = fock_layer_unitary(u, 2)
    b = fock_basis(3, 2)
    for r, s in enumerate(b.states.tolist()):
        out = evolve_product_state(u, s)
        assert np.allclose(out.amplitudes, big[:, r], atol=1e-12)
    psi = FockVector(b, (big[:, 0] + big[:, 3]) / np.linalg.norm(big[:, 0] + big[:, 3]))
    assert evolve_pure(u, psi).norm() == pytest.approx(1)


def test_input_loss_mixture_binomial():
    mix = input_loss_mixture((2, 1), np.sqrt([0.5, 0.9]))
    probs = {tuple(s): p for p, s in mix}
    assert sum(probs.values()) == pytest.approx(1)
    assert probs[(2, 1)] == pytest.approx(0.25 * 0.9)
    assert probs[(1, 0)] == pytest.approx(0.5 * 0.1)
    # fully transmitting ports produce a single branch
    assert len(input_loss_mixture((1, 1), np.ones(2))) == 1


def test_identity_channel_conditional_transmittance():
    # no interference: photon 2 survives with probability eta^2 (rect, m = 2)
    eta = 0.7
    tr = compose_lossy(np.eye(2), gamma_for("rect", 2, eta))
    cs = conditional_state(tr, (1, 1), HeraldSpec((0,), (1,)))
    assert cs.p_s == pytest.approx(eta**2)
    assert 1 - cs.rho.vacuum_probability() == pytest.approx(eta**2)
    cs.rho.validate()


@pytest.mark.parametrize("design", ["rect", "tri"])
@pytest.mark.parametrize("eta", [0.5, 0.9, 1.0])
def test_kraus_path_matches_dilated_oracle(design, eta):
    u = haar_unitary(4, 21)
    tr = compose_lossy(u, gamma_for(design, 4, eta))
    h = HeraldSpec((0, 3), (1, 1))
    a = conditional_state(tr, (1, 1, 1, 0), h)
    b = oracle_conditional_state_dilated(tr, (1, 1, 1, 0), h)
    assert a.p_s == pytest.approx(b.p_s, abs=1e-12)
    assert np.abs(a.rho.matrix - b.rho.matrix).max() < 1e-10


def test_herald_probabilities_sum_to_one():
    tr = compose_lossy(haar_unitary(3, 2), gamma_for("tri", 3, 0.6))
    total = sum(
        conditional_state(tr, (1, 1, 1), h).p_s for n in range(4) for h in herald_patterns_with_total((0, 2), n)
    )
    assert total == pytest.approx(1, abs=1e-12)


def test_any_is_sum_of_single_patterns():
    tr = compose_lossy(haar_unitary(3, 5), gamma_for("rect", 3, 0.8))
    hs = herald_patterns_with_total((0, 1), 1)
    both = conditional_state_any(tr, (1, 1, 1), hs)
    parts = [conditional_state(tr, (1, 1, 1), h) for h in hs]
    assert both.p_s == pytest.approx(sum(p.p_s for p in parts))
    mix = sum(p.p_s * p.rho.matrix for p in parts) / both.p_s
    assert np.allclose(both.rho.matrix, mix, atol=1e-12)


def test_impossible_herald_is_degenerate():
    tr = compose_lossy(np.eye(2), gamma_for("rect", 2, 1.0))
    cs = conditional_state(tr, (1, 0), HeraldSpec((1,), (1,)))
    assert cs.degenerate
    assert cs.p_s == 0


def test_herald_spec_validation():
    with pytest.raises(ValueError):
        HeraldSpec((0, 0), (1, 1))
    with pytest.raises(ValueError):
        HeraldSpec((0,), (1, 1))
    with pytest.raises(ValueError):
        HeraldSpec((0,), (-1,))


def test_partial_trace_of_product():
    tr = compose_lossy(np.eye(3), gamma_for("rect", 3, 0.5))
    cs = conditional_state(tr, (1, 1, 0), HeraldSpec((2,), (0,)))
    red = partial_trace(cs.rho, [1])
    assert red.trace() == pytest.approx(1)
    # amplitude eta^(m/2), so probability eta^m
    assert 1 - red.vacuum_probability() == pytest.approx(0.5**3)
