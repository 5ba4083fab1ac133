"""Exact multiphoton simulation in the occupation-number basis.

Lossy evolution follows the input-loss / unitary / output-loss factorization
of a separable loss model:

1. each input photon survives with probability ``in_amps[j]**2``, giving a
   classical mixture of product Fock states;
2. each surviving branch is evolved through the ideal unitary;
3. every output mode is amplitude damped with ``out_amps[i]**2``;
4. measured modes are projected onto the herald pattern.

Branches that differ in which photons were lost are orthogonal in the lost
photons' environment and are therefore added incoherently.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .loss_model import LossyTransform, dilate
from .numerics import as_matrix, permanent

FockState = tuple  # tuple[int, ...] of per-mode occupations

MAX_CONDITIONAL_PHOTONS = 8
MAX_ORACLE_MODES = 30
MAX_ORACLE_PHOTONS = 6


def fock_state(occupations: Iterable[int]) -> FockState:
    s = tuple(int(n) for n in occupations)
    if any(n < 0 for n in s):
        raise ValueError(f"occupations must be non-negative, got {s}")
    return s


def format_state(s: Sequence[int]) -> str:
    return "|".join(str(int(n)) for n in s)


def _compositions(n: int, m: int):
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


class FockBasis:
    """All occupation patterns of ``n`` photons in ``m`` modes, ascending lexicographic order."""

    def __init__(self, m: int, n: int):
        if m < 1 or n < 0:
            raise ValueError(f"invalid basis m={m}, n={n}")
        self.m = m
        self.n = n
        self.size = math.comb(n + m - 1, n)
        self.states = np.array(list(_compositions(n, m)), dtype=np.int64).reshape(self.size, m)
        self._index = None

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"FockBasis(m={self.m}, n={self.n})"

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {tuple(s): k for k, s in enumerate(self.states.tolist())}
        return self._index

    def rank(self, s: Sequence[int]) -> int:
        """Position of ``s`` in the basis, computed combinatorially."""
        s = fock_state(s)
        if len(s) != self.m or sum(s) != self.n:
            raise ValueError(f"{s} is not in {self!r}")
        r = 0
        remaining = self.n
        for k in range(self.m - 1):
            free = self.m - k - 1  # modes after position k
            for v in range(s[k]):
                # patterns with value v here and the rest distributed over `free` modes
                r += math.comb(remaining - v + free - 1, free - 1)
            remaining -= s[k]
        return r

    def unrank(self, r: int) -> FockState:
        if not 0 <= r < self.size:
            raise IndexError(r)
        out = []
        remaining = self.n
        for k in range(self.m - 1):
            free = self.m - k - 1
            v = 0
            while True:
                block = math.comb(remaining - v + free - 1, free - 1)
                if r < block:
                    break
                r -= block
                v += 1
            out.append(v)
            remaining -= v
        out.append(remaining)
        return tuple(out)


@functools.lru_cache(maxsize=256)
def fock_basis(m: int, n: int) -> FockBasis:
    return FockBasis(m, n)


class FockSpace:
    """Direct sum of FockBasis(m, k) for k = 0..cutoff, in increasing k."""

    def __init__(self, m: int, cutoff: int):
        self.m = m
        self.cutoff = cutoff
        self.bases = [fock_basis(m, k) for k in range(cutoff + 1)]
        self.offsets = np.cumsum([0] + [b.size for b in self.bases])
        self.size = int(self.offsets[-1])
        self.states = np.concatenate([b.states for b in self.bases], axis=0)
        self._index = None

    def __len__(self) -> int:
        return self.size

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {tuple(s): k for k, s in enumerate(self.states.tolist())}
        return self._index

    def labels(self) -> list[str]:
        return [format_state(s) for s in self.states.tolist()]

    @property
    def photon_numbers(self) -> np.ndarray:
        return self.states.sum(axis=1)


@functools.lru_cache(maxsize=256)
def fock_space(m: int, cutoff: int) -> FockSpace:
    return FockSpace(m, cutoff)


@dataclass(frozen=True)
class FockVector:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.shape != (self.basis.size,):
            raise ValueError(f"amplitude vector has shape {a.shape}, basis has {self.basis.size} states")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite amplitudes")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis_state(cls, s: Sequence[int]) -> "FockVector":
        s = fock_state(s)
        b = fock_basis(len(s), sum(s))
        a = np.zeros(b.size, dtype=np.complex128)
        a[b.index[s]] = 1.0
        return cls(b, a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, s: Sequence[int]) -> complex:
        return complex(self.amplitudes[self.basis.index[fock_state(s)]])


@dataclass
class DensityMatrix:
    """Density operator on ``space`` (all photon numbers up to a cutoff)."""

    space: FockSpace
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.shape != (self.space.size, self.space.size):
            raise ValueError("density matrix does not match its Fock space")

    @property
    def m(self) -> int:
        return self.space.m

    @property
    def cutoff(self) -> int:
        return self.space.cutoff

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def vacuum_probability(self) -> float:
        return float(self.matrix[0, 0].real)

    def element(self, row: Sequence[int], col: Sequence[int]) -> complex:
        idx = self.space.index
        return complex(self.matrix[idx[tuple(row)], idx[tuple(col)]])

    def validate(self, tol: float = 1e-10) -> None:
        rho = self.matrix
        if np.abs(rho - rho.conj().T).max(initial=0.0) > tol:
            raise ValueError("density matrix is not Hermitian")
        tr = self.trace()
        if tr < -tol or tr > 1 + tol:
            raise ValueError(f"trace {tr} outside [0, 1]")
        if rho.size and np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -1e-9:
            raise ValueError("density matrix has a negative eigenvalue")

    def csv_rows(self, tol: float = 0.0):
        """(row_state, col_state, re, im) for every entry with |value| > tol."""
        labels = self.space.labels()
        rows, cols = np.nonzero(np.abs(self.matrix) > tol)
        for r, c in zip(rows.tolist(), cols.tolist()):
            v = self.matrix[r, c]
            yield labels[r], labels[c], float(v.real), float(v.imag)


@dataclass(frozen=True)
class HeraldSpec:
    """Photon-number-resolving detection: ``pattern[k]`` photons in ``measured_modes[k]`` (0-based)."""

    measured_modes: tuple
    pattern: tuple

    def __post_init__(self):
        modes = tuple(int(i) for i in self.measured_modes)
        pattern = tuple(int(p) for p in self.pattern)
        if len(modes) != len(pattern):
            raise ValueError("measured_modes and pattern differ in length")
        if len(set(modes)) != len(modes):
            raise ValueError("measured modes must be distinct")
        if any(i < 0 for i in modes) or any(p < 0 for p in pattern):
            raise ValueError("negative mode index or photon count")
        object.__setattr__(self, "measured_modes", modes)
        object.__setattr__(self, "pattern", pattern)

    @property
    def photons(self) -> int:
        return sum(self.pattern)

    def check_modes(self, m: int) -> None:
        if any(i >= m for i in self.measured_modes):
            raise ValueError(f"herald mode out of range for m={m}: {self.measured_modes}")

    def kept_modes(self, m: int) -> tuple:
        measured = set(self.measured_modes)
        return tuple(i for i in range(m) if i not in measured)


@dataclass
class ConditionalState:
    """Heralded state on the unmeasured modes and the herald probability."""

    p_s: float
    rho: DensityMatrix
    kept_modes: tuple
    degenerate: bool = False
    info: dict = field(default_factory=dict)


def _expand(s: Sequence[int]) -> list[int]:
    return [j for j, k in enumerate(s) for _ in range(k)]


def transition_amplitude(u, input: Sequence[int], output: Sequence[int]) -> complex:
    """<output| U_Fock |input> = perm(U[output|input]) / sqrt(prod output! prod input!)."""
    u = as_matrix(u, square=True)
    input, output = fock_state(input), fock_state(output)
    m = u.shape[0]
    if len(input) != m or len(output) != m:
        raise ValueError("Fock states must have one entry per mode")
    if sum(input) != sum(output):
        raise ValueError(f"photon number mismatch: {sum(input)} in, {sum(output)} out")
    sub = u[np.ix_(_expand(output), _expand(input))]
    norm = math.prod(math.factorial(k) for k in output) * math.prod(math.factorial(k) for k in input)
    return permanent(sub) / math.sqrt(norm)


def fock_layer_unitary(u, n: int) -> np.ndarray:
    """Matrix of transition amplitudes on the n-photon layer (permanent route)."""
    u = as_matrix(u, square=True)
    b = fock_basis(u.shape[0], n)
    states = [tuple(s) for s in b.states.tolist()]
    out = np.empty((b.size, b.size), dtype=np.complex128)
    for c, s_in in enumerate(states):
        for r, s_out in enumerate(states):
            out[r, c] = transition_amplitude(u, s_in, s_out)
    return out


@functools.lru_cache(maxsize=256)
def _raise_maps(m: int, k: int):
    """For a_i^dagger: basis(m, k) -> basis(m, k+1), target indices and sqrt(n_i + 1)."""
    src = fock_basis(m, k)
    dst = fock_basis(m, k + 1)
    idx = dst.index
    targets = np.empty((m, src.size), dtype=np.int64)
    factors = np.empty((m, src.size))
    for r, s in enumerate(src.states.tolist()):
        for i in range(m):
            s[i] += 1
            targets[i, r] = idx[tuple(s)]
            factors[i, r] = math.sqrt(s[i])
            s[i] -= 1
    targets.setflags(write=False)
    factors.setflags(write=False)
    return targets, factors


def _create(vec: np.ndarray, m: int, k: int, column: np.ndarray) -> np.ndarray:
    """Apply sum_i column[i] a_i^dagger to a k-photon amplitude vector."""
    targets, factors = _raise_maps(m, k)
    out = np.zeros(math.comb(k + m, k + 1), dtype=np.complex128)
    for i in range(m):
        if column[i] != 0:
            out[targets[i]] += column[i] * factors[i] * vec
    return out


def evolve_product_state(u, s: Sequence[int]) -> FockVector:
    """U acting on a single Fock state, via creation-operator expansion."""
    u = np.asarray(u, dtype=np.complex128)
    m = u.shape[0]
    vec = np.ones(1, dtype=np.complex128)
    k = 0
    for j in _expand(s):
        vec = _create(vec, m, k, u[:, j])
        k += 1
    norm = math.sqrt(math.prod(math.factorial(n) for n in s))
    return FockVector(fock_basis(m, k), vec / norm)


def evolve_pure(u, psi: FockVector) -> FockVector:
    """Apply the Fock-layer representation of U to ``psi``."""
    u = as_matrix(u, square=True)
    if u.shape[0] != psi.basis.m:
        raise ValueError(f"U acts on {u.shape[0]} modes, state has {psi.basis.m}")
    out = np.zeros(psi.basis.size, dtype=np.complex128)
    for r in np.flatnonzero(psi.amplitudes):
        s = psi.basis.states[r]
        out += psi.amplitudes[r] * evolve_product_state(u, s).amplitudes
    return FockVector(psi.basis, out)


def input_loss_mixture(input: Sequence[int], in_amps) -> list[tuple[float, FockState]]:
    """Classical mixture left by per-mode amplitude damping of a product Fock state.

    Photon survival probability in mode j is ``in_amps[j] ** 2``; zero-weight
    branches are dropped.
    """
    s = fock_state(input)
    in_amps = np.asarray(in_amps, dtype=float)
    if len(in_amps) != len(s):
        raise ValueError("in_amps length differs from mode count")
    per_mode = []
    for n, g in zip(s, in_amps):
        t = float(g) ** 2
        options = []
        for k in range(n + 1):
            p = math.comb(n, k) * t**k * (1 - t) ** (n - k)
            if p > 0:
                options.append((p, k))
        per_mode.append(options)
    out = []
    for combo in itertools.product(*per_mode):
        p = math.prod(c[0] for c in combo)
        if p > 0:
            out.append((p, tuple(c[1] for c in combo)))
    return out


def _kraus_coefficients(occ: np.ndarray, lost: np.ndarray, t: np.ndarray) -> np.ndarray:
    """prod_i sqrt(C(n_i, l_i) t_i^(n_i - l_i) (1 - t_i)^l_i), rows of occ/lost are states."""
    occ = np.atleast_2d(occ)
    lost = np.atleast_2d(lost)
    comb = np.vectorize(math.comb, otypes=[float])(occ, lost)
    with np.errstate(invalid="ignore"):
        # 0**0 = 1 is the convention needed here (no photons, no factor)
        surv = np.where(occ - lost == 0, 1.0, t ** (occ - lost))
        loss = np.where(lost == 0, 1.0, (1.0 - t) ** lost)
    return np.sqrt(np.prod(comb * surv * loss, axis=1))


def apply_output_loss_kraus(psi: FockVector, lost: Sequence[int], out_amps) -> FockVector:
    """Kraus operator E_l of per-mode output loss applied to ``psi`` (unnormalized result)."""
    lost = np.asarray(fock_state(lost), dtype=np.int64)
    m = psi.basis.m
    if lost.shape != (m,):
        raise ValueError("loss vector length differs from mode count")
    t = np.asarray(out_amps, dtype=float) ** 2
    target = fock_basis(m, psi.basis.n - int(lost.sum())) if lost.sum() <= psi.basis.n else None
    if target is None:
        return FockVector(fock_basis(m, 0), np.zeros(1, dtype=np.complex128))
    states = psi.basis.states
    ok = np.all(states >= lost, axis=1)
    out = np.zeros(target.size, dtype=np.complex128)
    if ok.any():
        coef = _kraus_coefficients(states[ok], np.broadcast_to(lost, states[ok].shape), t)
        idx = target.index
        rows = [idx[tuple(s)] for s in (states[ok] - lost).tolist()]
        out[rows] = coef * psi.amplitudes[ok]
    return FockVector(target, out)


def loss_vectors(m: int, max_total: int):
    """All per-mode loss vectors with total at most ``max_total``."""
    for total in range(max_total + 1):
        yield from _compositions(total, m) if m else iter([()])


def _damp_modes(rho: np.ndarray, space: FockSpace, t: np.ndarray) -> np.ndarray:
    """Per-mode amplitude damping on a density matrix over ``space``.

    Equivalent to sum_l E_l rho E_l^dagger over all loss vectors l; applied one
    mode at a time.
    """
    states = space.states
    idx = space.index
    for i in range(space.m):
        if t[i] >= 1.0:
            continue
        out = np.zeros_like(rho)
        n_i = states[:, i]
        for l in range(1, int(n_i.max(initial=0)) + 1):
            src = np.flatnonzero(n_i >= l)
            dst_states = states[src].copy()
            dst_states[:, i] -= l
            dst = np.array([idx[tuple(s)] for s in dst_states.tolist()], dtype=np.int64)
            n = n_i[src]
            coef = np.sqrt(np.vectorize(math.comb, otypes=[float])(n, l) * t[i] ** (n - l) * (1 - t[i]) ** l)
            block = coef[:, None] * rho[np.ix_(src, src)] * coef[None, :]
            out[np.ix_(dst, dst)] += block
        # l = 0 term: diagonal Kraus sqrt(t)^n
        keep = np.sqrt(t[i]) ** n_i
        out += keep[:, None] * rho * keep[None, :]
        rho = out
    return rho


def _empty_state(kept: tuple, cutoff: int, p_s: float = 0.0, **info) -> ConditionalState:
    m = max(len(kept), 1)
    space = fock_space(m, max(cutoff, 0))
    rho = np.zeros((space.size, space.size), dtype=np.complex128)
    rho[0, 0] = 1.0
    return ConditionalState(p_s=p_s, rho=DensityMatrix(space, rho), kept_modes=kept, degenerate=True, info=info)


def _finish(rho: np.ndarray, space: FockSpace, kept: tuple, **info) -> ConditionalState:
    p_s = float(np.trace(rho).real)
    if p_s <= 0.0:
        return _empty_state(kept, space.cutoff, 0.0, **info)
    rho = rho / p_s
    rho = (rho + rho.conj().T) / 2
    return ConditionalState(p_s=p_s, rho=DensityMatrix(space, rho), kept_modes=kept, info=info)


def conditional_state(transform: LossyTransform, input: Sequence[int], herald: HeraldSpec) -> ConditionalState:
    """Exact heralded state on the unmeasured modes for a product Fock input."""
    return _conditional(transform, input, herald.measured_modes, [herald.pattern])


def conditional_state_any(
    transform: LossyTransform, input: Sequence[int], herald: HeraldSpec | Sequence[HeraldSpec]
) -> ConditionalState:
    """Heralded state when any of several detection patterns counts as success.

    Distinct patterns are distinct classical outcomes, so their branches add
    incoherently. All patterns must share the same measured modes.
    """
    heralds = [herald] if isinstance(herald, HeraldSpec) else list(herald)
    if not heralds:
        raise ValueError("no herald patterns given")
    modes = heralds[0].measured_modes
    if any(h.measured_modes != modes for h in heralds):
        raise ValueError("all herald patterns must use the same measured modes")
    return _conditional(transform, input, modes, [h.pattern for h in heralds])


def herald_patterns_with_total(measured_modes: Sequence[int], photons: int) -> list[HeraldSpec]:
    """Every detection pattern placing ``photons`` photons on ``measured_modes``."""
    modes = tuple(measured_modes)
    if not modes:
        return [HeraldSpec((), ())] if photons == 0 else []
    return [HeraldSpec(modes, p) for p in _compositions(photons, len(modes))]


def _conditional(transform: LossyTransform, input: Sequence[int], measured_modes, patterns) -> ConditionalState:
    s = fock_state(input)
    m = transform.m
    if len(s) != m:
        raise ValueError("input state length differs from mode count")
    n = sum(s)
    if n > MAX_CONDITIONAL_PHOTONS:
        raise ValueError(f"at most {MAX_CONDITIONAL_PHOTONS} input photons supported, got {n}")
    heralds = [HeraldSpec(measured_modes, p) for p in patterns]
    for h in heralds:
        h.check_modes(m)
    loss = transform.loss
    if not loss.is_separable:
        raise ValueError("conditional_state needs a separable loss model")
    kept = heralds[0].kept_modes(m)
    heralds = [h for h in heralds if h.photons <= n]
    if not heralds:
        return _empty_state(kept, 0, reason="herald needs more photons than the input provides")
    cutoff = n - min(h.photons for h in heralds)
    space = fock_space(max(len(kept), 1), cutoff)
    meas = np.array(measured_modes, dtype=np.int64)
    kept_arr = np.array(kept, dtype=np.int64)
    pattern_arrays = [np.array(h.pattern, dtype=np.int64) for h in heralds]
    min_herald = min(h.photons for h in heralds)
    t_out = np.asarray(loss.out_amps, dtype=float) ** 2
    u = transform.u

    columns = []
    for prob, survivors in input_loss_mixture(s, loss.in_amps):
        if sum(survivors) < min_herald:
            continue
        psi = evolve_product_state(u, survivors)
        states = psi.basis.states
        nz = np.abs(psi.amplitudes) > 0
        if len(kept):
            kept_states = states[:, kept_arr]
        else:
            kept_states = np.zeros((len(states), 1), dtype=np.int64)
        for pattern in pattern_arrays:
            occ = states[:, meas]
            ok = nz & np.all(occ >= pattern, axis=1)
            if not ok.any():
                continue
            occ = occ[ok]
            amps = psi.amplitudes[ok] * math.sqrt(prob)
            amps = amps * _kraus_coefficients(occ, occ - pattern, t_out[meas])
            rows = np.array([space.index[tuple(x)] for x in kept_states[ok].tolist()], dtype=np.int64)
            # each pre-loss measured occupation is a distinct loss record
            groups, inverse = np.unique(occ, axis=0, return_inverse=True)
            inverse = np.asarray(inverse).reshape(-1)
            for g in range(len(groups)):
                sel = inverse == g
                v = np.zeros(space.size, dtype=np.complex128)
                v[rows[sel]] = amps[sel]
                columns.append(v)
    if not columns:
        return _empty_state(kept, cutoff, reason="herald pattern has zero probability")
    vs = np.array(columns).T
    rho = vs @ vs.conj().T
    if len(kept):
        rho = _damp_modes(rho, space, t_out[kept_arr])
    return _finish(rho, space, kept)


def oracle_conditional_state_dilated(
    transform: LossyTransform, input: Sequence[int], herald: HeraldSpec
) -> ConditionalState:
    """Reference path: one pure evolution through the 3m-mode dilation, herald
    projection on nominal modes, then trace over all virtual modes.

    Amplitudes come from permanents, independent of the creation-operator
    expansion used by :func:`conditional_state`.
    """
    s = fock_state(input)
    m = transform.m
    n = sum(s)
    if 3 * m > MAX_ORACLE_MODES or n > MAX_ORACLE_PHOTONS:
        raise ValueError(f"oracle limited to {MAX_ORACLE_MODES} dilated modes and {MAX_ORACLE_PHOTONS} photons")
    herald.check_modes(m)
    kept = herald.kept_modes(m)
    if herald.photons > n:
        return _empty_state(kept, 0)
    cutoff = n - herald.photons
    space = fock_space(max(len(kept), 1), cutoff)
    big = dilate(transform)
    full_in = s + (0,) * (2 * m)
    free_modes = list(kept) + list(range(m, 3 * m))
    rest = n - herald.photons

    amps: dict[tuple, dict[int, complex]] = {}
    for occ in _compositions(rest, len(free_modes)):
        out = [0] * (3 * m)
        for mode, c in zip(herald.measured_modes, herald.pattern):
            out[mode] = c
        for mode, c in zip(free_modes, occ):
            out[mode] = c
        a = transition_amplitude(big, full_in, out)
        if a == 0:
            continue
        nominal = tuple(occ[: len(kept)]) if kept else (0,)
        virtual = tuple(occ[len(kept):])
        amps.setdefault(virtual, {})[space.index[nominal]] = a
    rho = np.zeros((space.size, space.size), dtype=np.complex128)
    for entries in amps.values():
        v = np.zeros(space.size, dtype=np.complex128)
        for r, a in entries.items():
            v[r] = a
        rho += np.outer(v, v.conj())
    return _finish(rho, space, kept)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduce ``rho`` to the modes in ``keep`` (indices into rho's modes, in the given order)."""
    keep = [int(k) for k in keep]
    if not keep:
        raise ValueError("keep set must be non-empty")
    if len(set(keep)) != len(keep) or any(not 0 <= k < rho.m for k in keep):
        raise ValueError(f"invalid keep set {keep} for {rho.m} modes")
    drop = [i for i in range(rho.m) if i not in keep]
    space = fock_space(len(keep), rho.cutoff)
    states = rho.space.states
    out = np.zeros((space.size, space.size), dtype=np.complex128)
    kept_idx = np.array([space.index[tuple(s)] for s in states[:, keep].tolist()], dtype=np.int64)
    if drop:
        _, groups = np.unique(states[:, drop], axis=0, return_inverse=True)
        groups = np.asarray(groups).reshape(-1)
    else:
        groups = np.zeros(len(states), dtype=np.int64)
    for g in np.unique(groups):
        sel = np.flatnonzero(groups == g)
        k = kept_idx[sel]
        out[np.ix_(k, k)] += rho.matrix[np.ix_(sel, sel)]
    return DensityMatrix(space, out)
