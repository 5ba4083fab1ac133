"""Invariant checks run by ``qloss selftest``.

Each check returns a :class:`CheckResult`; nothing here raises on a violated
invariant, so the whole battery always runs to completion.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fock import (
    FockVector,
    HeraldSpec,
    apply_output_loss_kraus,
    conditional_state_any,
    evolve_product_state,
    fock_basis,
    fock_layer_unitary,
    herald_patterns_with_total,
    loss_vectors,
    oracle_conditional_state_dilated,
    transition_amplitude,
)
from .loss_model import compose_lossy, gamma_for
from .numerics import fourier_unitary, haar_unitary, permanent, permanent_bruteforce


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} tol={self.tolerance:.0e} ({self.seconds:.2f}s) {self.detail}"


# (input state, measured modes, patterns) per mode count; photons <= 4
ORACLE_CASES = {
    2: [((1, 1), (1,), [(1,)]), ((2, 1), (0,), [(1,), (2,)])],
    3: [((1, 1, 1), (1, 2), [(1, 1)]), ((2, 0, 1), (0,), [(1,)]), ((1, 1, 1), (2,), [(0,), (2,)])],
    4: [((1, 1, 1, 1), (0, 3), [(1, 0), (1, 1)]), ((1, 0, 2, 0), (1,), [(1,)])],
    5: [((1, 1, 1, 1, 0), (0, 2), [(1, 1)]), ((1, 0, 1, 0, 1), (4,), [(1,)])],
}
ORACLE_ETAS = (0.5, 0.9, 1.0)


def oracle_equivalence(seed: int = 11, tol_rho: float = 1e-10, tol_ps: float = 1e-12) -> CheckResult:
    """Kraus-path conditional states against the dilated-unitary oracle."""
    worst_rho = worst_ps = 0.0
    count = 0
    for m, cases in ORACLE_CASES.items():
        u = haar_unitary(m, seed + m)
        for design in ("rect", "tri"):
            for eta in ORACLE_ETAS:
                transform = compose_lossy(u, gamma_for(design, m, eta))
                for state, modes, patterns in cases:
                    for pattern in patterns:
                        herald = HeraldSpec(modes, pattern)
                        a = conditional_state_any(transform, state, herald)
                        b = oracle_conditional_state_dilated(transform, state, herald)
                        worst_ps = max(worst_ps, abs(a.p_s - b.p_s))
                        if a.degenerate != b.degenerate:
                            worst_rho = np.inf
                        elif not a.degenerate:
                            worst_rho = max(worst_rho, float(np.abs(a.rho.matrix - b.rho.matrix).max()))
                        count += 1
    ok = worst_rho <= tol_rho and worst_ps <= tol_ps
    return CheckResult(
        "oracle equivalence (Kraus vs dilation)",
        ok,
        max(worst_rho, worst_ps),
        tol_rho,
        detail=f"{count} cases, max|dp_s|={worst_ps:.1e}, max|drho|={worst_rho:.1e}",
    )


def kraus_completeness(seed: int = 5, tol: float = 1e-10) -> CheckResult:
    """sum_l E_l^dag E_l = I on each n-photon layer."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in (1, 2, 3):
        amps = np.sqrt(rng.uniform(0, 1, m))
        for n in range(0, 5):
            b = fock_basis(m, n)
            acc = np.zeros((b.size, b.size), dtype=np.complex128)
            for lost in loss_vectors(m, n):
                cols = [apply_output_loss_kraus(FockVector.basis_state(s), lost, amps).amplitudes for s in b.states]
                e = np.array(cols).T
                acc += e.conj().T @ e
            worst = max(worst, float(np.abs(acc - np.eye(b.size)).max()))
    return CheckResult("Kraus completeness", worst <= tol, worst, tol)


def fock_layer_unitarity(seed: int = 3, tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for m in (2, 3, 4):
        u = haar_unitary(m, seed + m)
        for n in (1, 2, 3):
            big = fock_layer_unitary(u, n)
            worst = max(worst, float(np.abs(big.conj().T @ big - np.eye(big.shape[0])).max()))
    return CheckResult("Fock-layer unitarity", worst <= tol, worst, tol)


def zero_transmission_law(tol: float = 1e-12) -> CheckResult:
    """Lossless Fourier interference of |1,...,1>: outputs with sum_k k n_k != 0 (mod N)
    are suppressed. Probabilities are computed by brute-force permanents."""
    worst = 0.0
    forbidden_total = 0
    for n in (3, 4, 5):
        f = fourier_unitary(n)
        ones = (1,) * n
        for s in fock_basis(n, n).states.tolist():
            if sum(k * c for k, c in enumerate(s)) % n == 0:
                continue
            forbidden_total += 1
            worst = max(worst, abs(transition_amplitude(f, ones, s)) ** 2)
    return CheckResult(
        "zero-transmission law", worst < tol, worst, tol, detail=f"{forbidden_total} forbidden patterns checked"
    )


def herald_completeness(seed: int = 9, tol: float = 1e-9) -> CheckResult:
    """Herald probabilities over every pattern of every photon count sum to one."""
    worst = 0.0
    for m, state, modes in ((3, (1, 1, 1), (1, 2)), (4, (1, 1, 0, 1), (0, 2)), (4, (2, 0, 1, 0), (3,))):
        u = haar_unitary(m, seed + m)
        for design, eta in (("rect", 0.7), ("tri", 0.6), ("tri", 1.0)):
            transform = compose_lossy(u, gamma_for(design, m, eta))
            total = 0.0
            for count in range(sum(state) + 1):
                for h in herald_patterns_with_total(modes, count):
                    total += conditional_state_any(transform, state, h).p_s
            worst = max(worst, abs(total - 1.0))
    return CheckResult("herald-probability completeness", worst <= tol, worst, tol)


def permanent_properties(seed: int = 17, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        ref = permanent(a)
        scale = max(1.0, abs(ref))
        rp, cp = rng.permutation(5), rng.permutation(5)
        worst = max(worst, abs(permanent(a[rp][:, cp]) - ref) / scale)
        c = complex(rng.standard_normal(), rng.standard_normal())
        b = a.copy()
        r = int(rng.integers(5))
        b[r] *= c
        worst = max(worst, abs(permanent(b) - c * ref) / (scale * abs(c)))
        worst = max(worst, abs(permanent(a, "glynn") - ref) / scale)
        worst = max(worst, abs(permanent_bruteforce(a) - ref) / scale)
    return CheckResult("permanent properties", worst <= tol, worst, tol, detail="perm invariance, multilinearity, Glynn, brute force")


def evolution_routes_agree(seed: int = 23, tol: float = 1e-10) -> CheckResult:
    """Creation-operator evolution against permanent transition amplitudes."""
    worst = 0.0
    for m in (2, 3, 4):
        u = haar_unitary(m, seed + m)
        for s in itertools.islice(fock_basis(m, 3).states.tolist(), 6):
            vec = evolve_product_state(u, s)
            ref = np.array([transition_amplitude(u, s, o) for o in vec.basis.states.tolist()])
            worst = max(worst, float(np.abs(vec.amplitudes - ref).max()))
    return CheckResult("evolution routes agree", worst <= tol, worst, tol)


ALL_CHECKS: tuple[Callable[[], CheckResult], ...] = (
    permanent_properties,
    fock_layer_unitarity,
    evolution_routes_agree,
    kraus_completeness,
    zero_transmission_law,
    herald_completeness,
    oracle_equivalence,
)


def run_selftest(checks=ALL_CHECKS) -> list[CheckResult]:
    results = []
    for check in checks:
        t0 = time.perf_counter()
        res = check()
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
