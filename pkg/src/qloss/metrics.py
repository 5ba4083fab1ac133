"""Figures of merit: circuit fidelities, conditional transmittance, dual-rail
qubit analysis and stabilizer errors."""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import ConditionalState, partial_trace
from .numerics import as_matrix


class DegenerateStateError(ValueError):
    """Raised when a quantity is undefined because nothing was heralded."""


class MixedStateWarning(UserWarning):
    pass


def postselected_fidelity(u, t) -> float:
    """|tr(U^dag T)|^2 / (tr(U^dag U) tr(T^dag T)); insensitive to uniform loss."""
    u = as_matrix(u)
    t = as_matrix(t)
    if u.shape != t.shape:
        raise ValueError("U and T differ in shape")
    tt = float(np.vdot(t, t).real)
    if tt == 0.0:
        raise ValueError("postselected fidelity undefined for T = 0")
    uu = float(np.vdot(u, u).real)
    return float(abs(np.vdot(u, t)) ** 2 / (uu * tt))


def preimage_fidelities(u, t) -> np.ndarray:
    """F_i = |sum_j conj(U_ij) T_ij|^2 for every output mode i."""
    u = as_matrix(u)
    t = as_matrix(t)
    return np.abs(np.sum(np.conj(u) * t, axis=1)) ** 2


def preimage_fidelity(u, t, i: int) -> float:
    u = as_matrix(u)
    if not 0 <= i < u.shape[0]:
        raise IndexError(f"mode {i} out of range")
    return float(preimage_fidelities(u, t)[i])


def average_preimage_fidelity(u, t) -> float:
    return float(np.mean(preimage_fidelities(u, t)))


def conditional_transmittance(cs: ConditionalState) -> float:
    """Probability that the heralded state is not the vacuum."""
    if cs.degenerate or cs.p_s <= 0:
        raise DegenerateStateError("conditional transmittance undefined: herald probability is zero")
    return 1.0 - cs.rho.vacuum_probability()


@dataclass(frozen=True)
class QubitLayout:
    """Dual-rail qubits as (mode_a, mode_b) pairs of physical output modes (0-based)."""

    pairs: tuple
    spectator_modes: tuple = ()

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        spectators = tuple(int(s) for s in self.spectator_modes)
        flat = [x for p in pairs for x in p] + list(spectators)
        if len(set(flat)) != len(flat):
            raise ValueError("qubit pairs and spectator modes must be disjoint")
        if any(x < 0 for x in flat):
            raise ValueError("negative mode index")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "spectator_modes", spectators)

    @property
    def n_qubits(self) -> int:
        return len(self.pairs)


def _local_index(cs: ConditionalState, mode: int) -> int:
    try:
        return cs.kept_modes.index(mode)
    except ValueError:
        raise ValueError(f"mode {mode} is measured, not part of the heralded state") from None


def qubit_transmittances(cs: ConditionalState, layout: QubitLayout) -> list[float]:
    """Per pair: 1 - Pr(both modes of the pair empty), from the two-mode marginal."""
    if cs.degenerate:
        raise DegenerateStateError("no heralded state")
    out = []
    for a, b in layout.pairs:
        red = partial_trace(cs.rho, [_local_index(cs, a), _local_index(cs, b)])
        out.append(1.0 - red.vacuum_probability())
    return out


def mode_occupation(cs: ConditionalState, mode: int) -> float:
    """Probability that ``mode`` holds at least one photon."""
    red = partial_trace(cs.rho, [_local_index(cs, mode)])
    return 1.0 - red.vacuum_probability()


@dataclass
class DualRailState:
    probability: float
    rho: np.ndarray
    degenerate: bool = False


def dual_rail_postselect(cs: ConditionalState, layout: QubitLayout, logical_zero: str = "first") -> DualRailState:
    """Project onto one photon per pair and no photons anywhere else.

    ``logical_zero="first"`` encodes |0> as a photon in the first mode of the
    pair (|10> -> |0>); ``"second"`` uses the other mode. Qubit 1 is the most
    significant bit of the returned 2^q x 2^q matrix.
    """
    if logical_zero not in ("first", "second"):
        raise ValueError("logical_zero must be 'first' or 'second'")
    q = layout.n_qubits
    dim = 1 << q
    if cs.degenerate:
        return DualRailState(0.0, np.zeros((dim, dim), dtype=np.complex128), degenerate=True)
    local_pairs = [(_local_index(cs, a), _local_index(cs, b)) for a, b in layout.pairs]
    n_local = len(cs.kept_modes)
    index = cs.rho.space.index
    rows = []
    for bits in itertools.product((0, 1), repeat=q):
        occ = [0] * n_local
        for bit, (a, b) in zip(bits, local_pairs):
            zero, one = (a, b) if logical_zero == "first" else (b, a)
            occ[one if bit else zero] = 1
        rows.append(index.get(tuple(occ), -1))
    rows = np.array(rows)
    if np.any(rows < 0):
        # cutoff below q photons: no dual-rail component exists
        return DualRailState(0.0, np.zeros((dim, dim), dtype=np.complex128), degenerate=True)
    block = cs.rho.matrix[np.ix_(rows, rows)]
    prob = float(np.trace(block).real)
    if prob <= 0.0:
        return DualRailState(0.0, np.zeros((dim, dim), dtype=np.complex128), degenerate=True)
    return DualRailState(prob, block / prob)


_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

# single-qubit products: (a, b) -> (phase, letter) with a @ b = phase * letter
_PRODUCT = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _m = _PAULI[_a] @ _PAULI[_b]
    for _c in "IXYZ":
        _ph = np.trace(_PAULI[_c].conj().T @ _m) / 2
        if abs(abs(_ph) - 1) < 1e-12:
            _PRODUCT[(_a, _b)] = (complex(np.round(_ph)), _c)
            break


@dataclass(frozen=True)
class PauliString:
    letters: str
    sign: int = 1

    def __post_init__(self):
        if any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + self.letters

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        text = text.strip()
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        return cls(text, sign)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if len(self.letters) != len(other.letters):
            raise ValueError("Pauli strings differ in length")
        phase = complex(self.sign * other.sign)
        out = []
        for a, b in zip(self.letters, other.letters):
            ph, c = _PRODUCT[(a, b)]
            phase *= ph
            out.append(c)
        if abs(phase.imag) > 1e-12:
            raise ValueError("product is not Hermitian (commuting strings only)")
        return PauliString("".join(out), int(round(phase.real)))

    def matrix(self) -> np.ndarray:
        return self.sign * functools.reduce(np.kron, (_PAULI[c] for c in self.letters))


def stabilizer_group(generators: Sequence[PauliString]) -> list[PauliString]:
    """All nontrivial elements of the group generated by commuting ``generators``."""
    elements = []
    for mask in itertools.product((0, 1), repeat=len(generators)):
        chosen = [g for g, bit in zip(generators, mask) if bit]
        if not chosen:
            continue
        elements.append(functools.reduce(lambda x, y: x * y, chosen))
    return [e for e in elements if set(e.letters) != {"I"}]


GHZ3_GENERATORS = (PauliString("XXX"), PauliString("ZZI"), PauliString("IZZ"))


def ghz3_stabilizers() -> list[PauliString]:
    return stabilizer_group(GHZ3_GENERATORS)


def stabilizer_expectation(rho_q, s: PauliString) -> float:
    rho_q = as_matrix(rho_q, square=True)
    if rho_q.shape[0] != 1 << len(s.letters):
        raise ValueError(f"Pauli string {s} does not match a {rho_q.shape[0]}-dim state")
    return float(np.trace(rho_q @ s.matrix()).real)


def stabilizer_error(rho_q, s: PauliString) -> float:
    return 0.5 * (1.0 - stabilizer_expectation(rho_q, s))


def ghz_vector(q: int = 3) -> np.ndarray:
    v = np.zeros(1 << q, dtype=np.complex128)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return v


def purity(rho_q) -> float:
    rho_q = as_matrix(rho_q, square=True)
    return float(np.vdot(rho_q, rho_q).real)


def ghz_fidelity(rho_q) -> float:
    rho_q = as_matrix(rho_q, square=True)
    g = ghz_vector(int(round(math.log2(rho_q.shape[0]))))
    return float(np.vdot(g, rho_q @ g).real)


def alpha_of(rho_q, purity_threshold: float = 0.999) -> float:
    """Angle of the dominant component sin(a)|0..0> + cos(a)|1..1>."""
    rho_q = as_matrix(rho_q, square=True)
    p = purity(rho_q)
    if p < purity_threshold:
        warnings.warn(f"state is mixed (purity {p:.6f}); alpha describes its dominant component", MixedStateWarning)
    w, v = np.linalg.eigh((rho_q + rho_q.conj().T) / 2)
    top = v[:, -1]
    return float(math.atan2(abs(top[0]), abs(top[-1])))


def fidelity_from_alpha(alpha: float) -> float:
    return 0.5 + 0.5 * math.sin(2 * alpha)


@dataclass(frozen=True)
class FitResult:
    coefficient: float
    exponent: float
    residual: float


def power_law_fit(points) -> FitResult:
    """Least squares of log(y) = log(c) + k log(x); residual is the RMS log error."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    return FitResult(coefficient=float(math.exp(intercept)), exponent=float(slope), residual=float(np.sqrt(np.mean(resid**2))))
