import math

import numpy as np
import pytest

from qloss.fock import ConditionalState, DensityMatrix, fock_space
from qloss.metrics import (
    DegenerateStateError,
    MixedStateWarning,
    PauliString,
    QubitLayout,
    alpha_of,
    average_preimage_fidelity,
    conditional_transmittance,
    dual_rail_postselect,
    fidelity_from_alpha,
    ghz3_stabilizers,
    ghz_fidelity,
    ghz_vector,
    postselected_fidelity,
    power_law_fit,
    preimage_fidelities,
    purity,
    qubit_transmittances,
    stabilizer_error,
)
from qloss.numerics import haar_unitary


def test_postselected_fidelity_scale_invariant():
    u = haar_unitary(5, 0)
    assert postselected_fidelity(u, 0.3 * u) == pytest.approx(1, abs=1e-14)
    g = np.diag([1, 0.5, 1, 1, 1.0])
    assert postselected_fidelity(u, g @ u) < 1
    with pytest.raises(ValueError):
        postselected_fidelity(u, np.zeros((5, 5)))


def test_preimage_fidelity_uniform_loss():
    u = haar_unitary(4, 1)
    f = preimage_fidelities(u, 0.8 * u)
    assert np.allclose(f, 0.64)
    assert average_preimage_fidelity(u, u) == pytest.approx(1)


def test_pauli_algebra():
    x, y, z = (PauliString(c) for c in "XYZ")
    assert str(PauliString.parse("-XYY")) == "-XYY"
    with pytest.raises(ValueError):
        x * y  # i Z is not Hermitian
    assert PauliString("XX") * PauliString("YY") == PauliString("ZZ", -1)
    assert np.allclose(PauliString("XZ").matrix(), np.kron(x.matrix(), z.matrix()))


def test_ghz3_stabilizer_group():
    names = sorted(str(s) for s in ghz3_stabilizers())
    assert names == sorted(["XXX", "ZZI", "IZZ", "ZIZ", "-YYX", "-XYY", "-YXY"])
    g = ghz_vector(3)
    rho = np.outer(g, g.conj())
    for s in ghz3_stabilizers():
        assert stabilizer_error(rho, s) == pytest.approx(0, abs=1e-14)


def test_unbalanced_ghz():
    a = 0.7
    v = np.zeros(8, dtype=complex)
    v[0], v[7] = math.sin(a), math.cos(a)
    rho = np.outer(v, v.conj())
    assert alpha_of(rho) == pytest.approx(a)
    assert ghz_fidelity(rho) == pytest.approx(fidelity_from_alpha(a))
    errs = {str(s): stabilizer_error(rho, s) for s in ghz3_stabilizers()}
    # Z-type stabilizers do not see the imbalance; X/Y-type ones see (1 - sin 2a)/2
    for k, e in errs.items():
        expect = 0.0 if "X" not in k and "Y" not in k else (1 - math.sin(2 * a)) / 2
        assert e == pytest.approx(expect, abs=1e-14)


def test_alpha_warns_on_mixed_state():
    with pytest.warns(MixedStateWarning):
        alpha_of(np.eye(8) / 8)
    assert purity(np.eye(8) / 8) == pytest.approx(1 / 8)


def test_power_law_fit_recovers_parameters():
    x = np.linspace(0.02, 0.3, 9)
    fit = power_law_fit(zip(x, 0.03 * x**2))
    assert fit.exponent == pytest.approx(2)
    assert fit.coefficient == pytest.approx(0.03)
    assert fit.residual < 1e-12
    with pytest.raises(ValueError):
        power_law_fit([(1, 1), (2, -1), (3, 2)])


def _bell_like_state():
    # two dual-rail qubits on modes (0,1),(2,3): (|1010> + |0101>)/sqrt2 mixed with vacuum
    sp = fock_space(4, 2)
    v = np.zeros(sp.size, dtype=complex)
    v[sp.index[(1, 0, 1, 0)]] = v[sp.index[(0, 1, 0, 1)]] = 1 / math.sqrt(2)
    rho = 0.8 * np.outer(v, v.conj())
    rho[sp.index[(0, 0, 0, 0)], sp.index[(0, 0, 0, 0)]] = 0.2
    return ConditionalState(0.1, DensityMatrix(sp, rho), (0, 1, 2, 3))


def test_dual_rail_postselect_and_lambdas():
    cs = _bell_like_state()
    layout = QubitLayout(((0, 1), (2, 3)))
    dr = dual_rail_postselect(cs, layout)
    assert dr.probability == pytest.approx(0.8)
    assert dr.rho[0, 0] == pytest.approx(0.5)  # |00> = photons in first modes
    assert dr.rho[0, 3] == pytest.approx(0.5)
    dr2 = dual_rail_postselect(cs, layout, logical_zero="second")
    assert dr2.rho[3, 3] == pytest.approx(0.5)
    assert qubit_transmittances(cs, layout) == pytest.approx([0.8, 0.8])
    assert conditional_transmittance(cs) == pytest.approx(0.8)


def test_layout_must_be_disjoint():
    with pytest.raises(ValueError):
        QubitLayout(((0, 1), (1, 2)))


def test_degenerate_transmittance_raises():
    sp = fock_space(1, 1)
    cs = ConditionalState(0.0, DensityMatrix(sp, np.zeros((2, 2))), (0,), degenerate=True)
    with pytest.raises(DegenerateStateError):
        conditional_transmittance(cs)
