import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from qloss.experiments import (
    U_SUB_PRINTED,
    DistillationSpec,
    GhzSpec,
    distill_simulate,
    distillation_heralds,
    embed_columns,
    ghz_pipeline,
    ghz_transform,
    lambda_tri_closed,
    orthonormality_error,
    p0_lossless,
    postselected_sweep,
    preimage_sweep,
    u_sub_exact,
)
from qloss.fock import HeraldSpec, conditional_state_any
from qloss.numerics import fourier_unitary, is_unitary, permanent_bruteforce


def _p0_bruteforce(n):
    """Pr(exactly one photon in output 1) for |1..1> through the N-mode DFT."""
    f = fourier_unitary(n)
    total = 0.0
    for rows in itertools.combinations_with_replacement(range(n), n):
        if rows.count(0) != 1:
            continue
        mult = math.prod(math.factorial(rows.count(k)) for k in set(rows))
        total += abs(permanent_bruteforce(f[list(rows)])) ** 2 / mult
    return total


@pytest.mark.parametrize("n", [3, 4, 5])
def test_p0_matches_bruteforce(n):
    assert p0_lossless(n) == pytest.approx(_p0_bruteforce(n), abs=1e-12)


def test_p0_frozen_values():
    assert p0_lossless(3) == pytest.approx(1 / 3, abs=1e-15)
    assert p0_lossless(5) == pytest.approx(0.264, abs=1e-15)


def test_lambda_tri_frozen_value():
    assert lambda_tri_closed(5, 0.9) == pytest.approx(0.7390178, abs=5e-8)
    assert lambda_tri_closed(4, 1.0) == 1.0


def test_distillation_heralds_are_lossless_allowed_patterns():
    hs = distillation_heralds(4, 3)
    for h in hs:
        assert h.measured_modes == (0, 1, 2)
        assert h.photons == 3
    # the all-ones pattern is forbidden for N = 4: 1 + 2 = 3, plus 3 * 1 = 6, not 0 mod 4
    assert (1, 1, 1) not in [h.pattern for h in hs]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_distillation_lossless(n):
    for design in ("rect", "tri"):
        res = distill_simulate(DistillationSpec(n, design, 1.0))
        assert res.lam == pytest.approx(1, abs=1e-12)
        assert res.p_s == pytest.approx(p0_lossless(n), abs=1e-12)


def test_distillation_rejects_large_n():
    with pytest.raises(ValueError):
        distill_simulate(DistillationSpec(6, "rect", 0.9))


def test_preimage_sweep_rect_is_flat():
    sw = preimage_sweep(5, ["rect", "tri"], [0.8, 1.0], 20, 3)
    for r in sw.records:
        if r["design"] == "rect":
            assert r["avg_fidelity"] == pytest.approx(r["eta"] ** 5, abs=1e-12)
            assert r["min_mode_fidelity"] == pytest.approx(r["max_mode_fidelity"], abs=1e-12)
        if r["eta"] == 1.0:
            assert r["avg_fidelity"] == pytest.approx(1, abs=1e-12)
    assert sw.metadata()["seed"] == 3


def test_postselected_sweep_seeded():
    a = postselected_sweep(6, ["tri"], [0.0, 0.2], 10, 5)
    b = postselected_sweep(6, ["tri"], [0.0, 0.2], 10, 5)
    assert a.records == b.records
    assert a.records[0]["mean_fidelity"] == pytest.approx(1, abs=1e-12)
    assert a.records[1]["mean_fidelity"] < 1


def test_u_sub_variants():
    assert orthonormality_error(U_SUB_PRINTED) < 1e-3
    assert orthonormality_error(u_sub_exact()) < 1e-14
    assert np.abs(u_sub_exact() - U_SUB_PRINTED).max() < 5e-5
    full = embed_columns(u_sub_exact(), (4, 5, 6, 7, 8, 9), 10)
    assert is_unitary(full, 1e-12)
    assert np.allclose(full[:, 4:], u_sub_exact())


def test_ghz_lossless_is_perfect():
    r = ghz_pipeline(GhzSpec(eta=1.0))
    assert r.p_s == pytest.approx(1 / 108, abs=1e-12)
    assert r.purity == pytest.approx(1, abs=1e-9)
    assert r.fidelity == pytest.approx(1, abs=1e-9)
    assert r.alpha == pytest.approx(math.pi / 4, abs=1e-9)
    assert r.qubit_lambdas == pytest.approx([1, 1, 1], abs=1e-12)
    assert max(r.stabilizer_errors.values()) < 1e-9


def test_ghz_printed_table_rounding_floor():
    # the 4-decimal table leaks ~1e-9 of the lossless fidelity
    r = ghz_pipeline(GhzSpec(eta=1.0, u_sub_variant="printed"))
    assert 0 < 1 - r.fidelity < 1e-7


def test_ghz_literal_herald_leaves_spectator_photons():
    spec = GhzSpec(eta=1.0, dark_spectator=False)
    r = ghz_pipeline(spec)
    assert r.spectator_occupation == pytest.approx(1 / 3, abs=1e-9)
    assert r.p_s == pytest.approx(1 / 72, abs=1e-12)
    # darking output 2 keeps the 2/3 of those events where it is empty
    assert (1 - r.spectator_occupation) * r.p_s == pytest.approx(1 / 108, abs=1e-12)


def test_ghz_both_clean_patterns_give_one_in_54():
    spec = GhzSpec(eta=1.0)
    tr = ghz_transform(spec)
    hs = [HeraldSpec((0, 1, 2, 3), p) for p in [(1, 0, 1, 1), (0, 1, 1, 1)]]
    cs = conditional_state_any(tr, spec.input_state(), hs)
    assert cs.p_s == pytest.approx(1 / 54, abs=1e-12)


def test_ghz_alpha_depends_on_bit_convention():
    second = ghz_pipeline(GhzSpec(eta=0.9848))
    first = ghz_pipeline(GhzSpec(eta=0.9848, logical_zero="first"))
    assert second.alpha == pytest.approx(0.7969, abs=5e-4)
    assert first.alpha == pytest.approx(math.pi / 2 - second.alpha, abs=1e-12)


def test_ghz_spec_validation():
    with pytest.raises(ValueError):
        GhzSpec(input_ports=(1, 2, 3))
    with pytest.raises(ValueError):
        GhzSpec(u_sub_variant="rounded")


def test_ghz_rect_design_alpha_is_balanced():
    # uniform loss cannot unbalance |000> and |111>
    r = ghz_pipeline(replace(GhzSpec(eta=0.95), design="rect"))
    assert r.alpha == pytest.approx(math.pi / 4, abs=1e-9)
