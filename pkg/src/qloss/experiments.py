"""Drivers for the four studies: preimage and postselected fidelity sweeps over
Haar-random meshes, Fourier photon distillation, and heralded GHZ-3 generation."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from . import __version__
from .fock import (
    HeraldSpec,
    conditional_state_any,
    evolve_product_state,
)
from .loss_model import DesignKind, compose_lossy, eta_from_db, gamma_for
from .metrics import (
    FitResult,
    QubitLayout,
    alpha_of,
    conditional_transmittance,
    dual_rail_postselect,
    ghz3_stabilizers,
    ghz_fidelity,
    mode_occupation,
    postselected_fidelity,
    power_law_fit,
    preimage_fidelities,
    purity,
    qubit_transmittances,
    stabilizer_error,
)
from .numerics import RNG_ALGORITHM, fourier_unitary, haar_unitary

log = logging.getLogger(__name__)

MAX_DISTILLATION_N = 5

# ---------------------------------------------------------------------------
# photon distillation: closed forms


def p0_lossless(n: int) -> float:
    """Lossless success probability of N-photon Fourier distillation."""
    if n < 2:
        raise ValueError("N must be >= 2")
    return math.fsum((-1) ** j * (j + 1) * math.prod(1 - i / n for i in range(1, j + 1)) for j in range(n))


def lambda_rect_closed(n: int, eta: float) -> float:
    return float(eta) ** n


def lambda_tri_closed(n: int, eta: float) -> float:
    """N(1 - eta) eta^N / (2 eta - eta^2 - eta^N); equals 1 at eta = 1 and 0 at eta = 0."""
    eta = float(eta)
    if eta >= 1.0:
        return 1.0
    if eta <= 0.0:
        return 0.0
    return n * (1 - eta) * eta**n / (2 * eta - eta**2 - eta**n)


def ps_rect_closed(n: int, eta: float) -> float:
    return p0_lossless(n) * float(eta) ** (n * (n - 1))


@dataclass(frozen=True)
class DistillationSpec:
    """N photons, one per input, into an N-mode Fourier interferometer.

    ``output_mode`` (0-based) defaults to the first mode for the rectangular
    design and the last (least lossy) mode for the triangular one.
    """

    n: int
    design: DesignKind
    eta: float
    output_mode: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "design", DesignKind.parse(self.design))
        if self.output_mode is None:
            default = 0 if self.design is DesignKind.RECTANGULAR else self.n - 1
            object.__setattr__(self, "output_mode", default)
        if not 0 <= self.output_mode < self.n:
            raise ValueError("output_mode out of range")

    @property
    def measured_modes(self) -> tuple:
        return tuple(i for i in range(self.n) if i != self.output_mode)


def distillation_heralds(n: int, output_mode: int, tol: float = 1e-12) -> list[HeraldSpec]:
    """Detection patterns of N-1 photons that signal success.

    A pattern qualifies when, in the lossless interferometer, it occurs
    together with exactly one photon in ``output_mode``. The set is read off
    the exact lossless output distribution; for the Fourier matrix it is the
    set of patterns allowed by the zero-transmission law.
    """
    psi = evolve_product_state(fourier_unitary(n), (1,) * n)
    probs = np.abs(psi.amplitudes) ** 2
    measured = [i for i in range(n) if i != output_mode]
    pats = []
    for s, p in zip(psi.basis.states.tolist(), probs):
        if s[output_mode] == 1 and p > tol:
            pats.append(tuple(s[i] for i in measured))
    return [HeraldSpec(tuple(measured), p) for p in sorted(pats)]


@dataclass(frozen=True)
class DistillationResult:
    p_s: float
    lam: float
    n_heralds: int


def distill_simulate(spec: DistillationSpec) -> DistillationResult:
    if spec.n > MAX_DISTILLATION_N:
        raise ValueError(f"distillation simulation limited to N <= {MAX_DISTILLATION_N}")
    u = fourier_unitary(spec.n)
    transform = compose_lossy(u, gamma_for(spec.design, spec.n, spec.eta))
    heralds = distillation_heralds(spec.n, spec.output_mode)
    cs = conditional_state_any(transform, (1,) * spec.n, heralds)
    lam = conditional_transmittance(cs) if not cs.degenerate else float("nan")
    return DistillationResult(p_s=cs.p_s, lam=lam, n_heralds=len(heralds))


# ---------------------------------------------------------------------------
# Haar sweeps


@dataclass
class ExperimentSweep:
    """Tabular result of a seeded sweep. Sample k always uses seed + k."""

    kind: str
    m: int
    designs: list
    grid_name: str
    grid: list
    samples: int
    seed: int
    records: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "tool": "qloss",
            "version": __version__,
            "kind": self.kind,
            "m": self.m,
            "designs": [DesignKind.parse(d).value for d in self.designs],
            self.grid_name: list(self.grid),
            "samples": self.samples,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
        }


def _haar_samples(m: int, samples: int, seed: int) -> list[np.ndarray]:
    return [haar_unitary(m, seed + k) for k in range(samples)]


def preimage_sweep(m: int, designs, eta_grid, samples: int, seed: int) -> ExperimentSweep:
    """Per design and eta: sample means of the mode-averaged, worst-mode and
    best-mode preimage fidelity. ``extra['per_sample']`` keeps the raw
    (samples x m) arrays keyed by (design, eta)."""
    if m < 2:
        raise ValueError("m must be >= 2")
    designs = [DesignKind.parse(d) for d in designs]
    us = np.array(_haar_samples(m, samples, seed))
    sweep = ExperimentSweep("preimage", m, designs, "etas", [float(e) for e in eta_grid], samples, seed)
    per_sample = {}
    for design in designs:
        for eta in sweep.grid:
            gamma = gamma_for(design, m, eta).gamma
            f = np.abs(np.sum(np.conj(us) * (gamma[None] * us), axis=2)) ** 2  # (samples, m)
            per_sample[(design.value, eta)] = f
            sweep.records.append(
                {
                    "design": design.value,
                    "eta": eta,
                    "avg_fidelity": float(np.mean(f.mean(axis=1))),
                    "min_mode_fidelity": float(np.mean(f.min(axis=1))),
                    "max_mode_fidelity": float(np.mean(f.max(axis=1))),
                    "samples": samples,
                }
            )
    sweep.extra["per_sample"] = per_sample
    return sweep


def postselected_sweep(m: int, designs, l_grid_db, samples: int, seed: int) -> ExperimentSweep:
    """Mean postselected (trace) fidelity per design and loss in dB."""
    if m < 2:
        raise ValueError("m must be >= 2")
    designs = [DesignKind.parse(d) for d in designs]
    us = _haar_samples(m, samples, seed)
    sweep = ExperimentSweep("postselected", m, designs, "loss_db", [float(x) for x in l_grid_db], samples, seed)
    per_sample = {}
    for design in designs:
        for l_db in sweep.grid:
            gamma = gamma_for(design, m, eta_from_db(l_db)).gamma
            f = np.array([postselected_fidelity(u, gamma * u) for u in us])
            per_sample[(design.value, l_db)] = f
            sweep.records.append(
                {"design": design.value, "loss_db": l_db, "mean_fidelity": float(f.mean()), "samples": samples}
            )
    sweep.extra["per_sample"] = per_sample
    return sweep


# ---------------------------------------------------------------------------
# GHZ-3

# Ten output modes x six photon-carrying inputs, as printed (4 decimals).
U_SUB_PRINTED = np.array(
    [
        [0, 0, 0.3536, -0.3536, -0.3536, 0.3536],
        [0, 0, 0.3536, 0.3536, 0.3536, 0.3536],
        [0.4082, 0.4082, 0.2887, 0.2887, -0.2887, -0.2887],
        [0.4082, -0.4082, 0.2887, -0.2887, 0.2887, -0.2887],
        [-0.8165, 0, 0.2887, 0, 0, -0.2887],
        [0, 0, 0.5000, 0, 0, -0.5000],
        [0, 0, 0.5000, 0, 0, 0.5000],
        [0, 0.8165, 0, -0.2887, 0.2887, 0],
        [0, 0, 0, -0.5000, 0.5000, 0],
        [0, 0, 0, 0.5000, 0.5000, 0],
    ]
)

# magnitudes the printed decimals round from
_EXACT_MAGNITUDES = np.array([1 / math.sqrt(8), 1 / math.sqrt(6), 1 / math.sqrt(12), math.sqrt(2 / 3), 0.5])

U_SUB_ORTHONORMALITY_TOL = 1e-3


def u_sub_exact(printed: np.ndarray = U_SUB_PRINTED) -> np.ndarray:
    """Replace each printed entry by the closed-form value it rounds from."""
    out = np.array(printed, dtype=float)
    for idx, x in np.ndenumerate(printed):
        if x == 0:
            continue
        k = int(np.argmin(np.abs(_EXACT_MAGNITUDES - abs(x))))
        if abs(_EXACT_MAGNITUDES[k] - abs(x)) > 5e-5:
            raise ValueError(f"entry {x} at {idx} does not match a known closed form")
        out[idx] = math.copysign(_EXACT_MAGNITUDES[k], x)
    return out


def polar_orthonormalize(a: np.ndarray) -> np.ndarray:
    """Closest matrix with orthonormal columns (polar factor)."""
    u, _, vh = np.linalg.svd(np.asarray(a), full_matrices=False)
    return u @ vh


def orthonormality_error(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.abs(a.conj().T @ a - np.eye(a.shape[1])).max())


def embed_columns(columns: np.ndarray, ports: Sequence[int], m: int) -> np.ndarray:
    """m x m matrix with ``columns`` at input ``ports``; the remaining inputs
    get an orthonormal complement (they carry vacuum and never matter)."""
    columns = np.asarray(columns, dtype=np.complex128)
    if len(set(ports)) != len(ports) or columns.shape != (m, len(ports)):
        raise ValueError("ports must be distinct and match the column count")
    full = np.zeros((m, m), dtype=np.complex128)
    full[:, list(ports)] = columns
    rest = [p for p in range(m) if p not in ports]
    if rest:
        comp = scipy.linalg.null_space(polar_orthonormalize(columns).conj().T)
        full[:, rest] = comp[:, : len(rest)]
    return full


@dataclass(frozen=True)
class GhzSpec:
    """Heralded dual-rail GHZ-3 circuit on ten modes. All indices are 0-based.

    Default wiring: photons enter ports 5..10 in column order, detectors on
    outputs 1..4 must read (1, 0, 1, 1), qubits live on output pairs
    (5,6), (7,8), (9,10). With ``dark_spectator=False`` output 2 is not
    measured and stays in the heralded state as a spectator.

    ``u_sub_variant``: "exact" uses the closed forms behind the 4-decimal
    table, "printed" the table itself, "polar" its nearest isometry.
    """

    eta: float = 1.0
    design: DesignKind = DesignKind.TRIANGULAR
    input_ports: tuple = (4, 5, 6, 7, 8, 9)
    herald_modes: tuple = (0, 2, 3)
    herald_pattern: tuple = (1, 1, 1)
    spectator_mode: int = 1
    dark_spectator: bool = True
    pairs: tuple = ((4, 5), (6, 7), (8, 9))
    logical_zero: str = "second"
    u_sub_variant: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "design", DesignKind.parse(self.design))
        if len(self.input_ports) != 6:
            raise ValueError("six input ports are required")
        if self.u_sub_variant not in ("printed", "polar", "exact"):
            raise ValueError("u_sub_variant must be 'printed', 'polar' or 'exact'")

    @property
    def m(self) -> int:
        return 10

    def u_sub(self) -> np.ndarray:
        raw = U_SUB_PRINTED
        if self.u_sub_variant == "exact":
            return u_sub_exact(raw)
        if self.u_sub_variant == "polar" or orthonormality_error(raw) > U_SUB_ORTHONORMALITY_TOL:
            return polar_orthonormalize(raw)
        return raw

    def herald(self) -> HeraldSpec:
        if self.dark_spectator:
            pairs = sorted(zip(self.herald_modes + (self.spectator_mode,), self.herald_pattern + (0,)))
            return HeraldSpec(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        return HeraldSpec(self.herald_modes, self.herald_pattern)

    def layout(self) -> QubitLayout:
        spectators = () if self.dark_spectator else (self.spectator_mode,)
        return QubitLayout(self.pairs, spectators)

    def input_state(self) -> tuple:
        s = [0] * self.m
        for p in self.input_ports:
            s[p] = 1
        return tuple(s)


@dataclass
class GhzReport:
    design: str
    eta: float
    input_ports: list
    p_s: float
    p_s_undarked: float
    spectator_occupation: float
    qubit_lambdas: list
    dualrail_prob: float
    purity: float
    fidelity: float
    alpha: float
    stabilizer_errors: dict
    degenerate: bool = False
    u_sub_variant: str = "exact"

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def to_dict(self) -> dict:
        return asdict(self)


def ghz_transform(spec: GhzSpec):
    u = embed_columns(spec.u_sub(), spec.input_ports, spec.m)
    tol = 1e-10 if spec.u_sub_variant != "printed" else U_SUB_ORTHONORMALITY_TOL
    return compose_lossy(u, gamma_for(spec.design, spec.m, spec.eta), tol=tol)


def ghz_pipeline(spec: GhzSpec) -> GhzReport:
    transform = ghz_transform(spec)
    state = spec.input_state()
    layout = spec.layout()
    nan = float("nan")

    # undarked run: output 2 kept, tells how often it catches a photon
    loose = conditional_state_any(transform, state, HeraldSpec(spec.herald_modes, spec.herald_pattern))
    spectator = mode_occupation(loose, spec.spectator_mode) if not loose.degenerate else nan
    cs = conditional_state_any(transform, state, spec.herald()) if spec.dark_spectator else loose

    stabilizers = ghz3_stabilizers()
    if cs.degenerate:
        log.warning("GHZ herald has zero probability at eta=%s (%s)", spec.eta, spec.design.value)
        return GhzReport(
            spec.design.value, spec.eta, list(spec.input_ports), 0.0, loose.p_s, spectator,
            [nan] * 3, 0.0, nan, nan, nan, {str(s): nan for s in stabilizers}, True, spec.u_sub_variant,
        )
    lambdas = qubit_transmittances(cs, layout)
    dr = dual_rail_postselect(cs, layout, logical_zero=spec.logical_zero)
    if dr.degenerate:
        pur = fid = alpha = nan
        errors = {str(s): nan for s in stabilizers}
    else:
        pur = purity(dr.rho)
        fid = ghz_fidelity(dr.rho)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            alpha = alpha_of(dr.rho)
        errors = {str(s): stabilizer_error(dr.rho, s) for s in stabilizers}
    return GhzReport(
        design=spec.design.value,
        eta=spec.eta,
        input_ports=list(spec.input_ports),
        p_s=cs.p_s,
        p_s_undarked=loose.p_s,
        spectator_occupation=spectator,
        qubit_lambdas=lambdas,
        dualrail_prob=dr.probability,
        purity=pur,
        fidelity=fid,
        alpha=alpha,
        stabilizer_errors=errors,
        degenerate=dr.degenerate,
        u_sub_variant=spec.u_sub_variant,
    )


def _default_objective(report: GhzReport) -> tuple:
    # lowest infidelity first, then the weakest qubit's transmittance
    return (round(report.infidelity, 12), -min(report.qubit_lambdas))


def ghz_assignment_search(
    spec: GhzSpec,
    candidates: Iterable[Sequence[int]] | None = None,
    objective: Callable[[GhzReport], tuple] = _default_objective,
) -> list[tuple[tuple, GhzReport]]:
    """Evaluate candidate input-port assignments, best first.

    Default candidates are all orderings of the six columns over the
    currently assigned ports.
    """
    if candidates is None:
        candidates = itertools.permutations(spec.input_ports)
    scored = []
    for ports in candidates:
        report = ghz_pipeline(replace(spec, input_ports=tuple(ports)))
        if report.degenerate:
            continue
        scored.append((tuple(ports), report))
    scored.sort(key=lambda pr: objective(pr[1]))
    return scored


def ghz_infidelity_sweep(l_grid_db: Sequence[float], spec: GhzSpec | None = None):
    """Triangular GHZ infidelity versus unit-cell loss, with a power-law fit.

    Returns (FitResult, reports). Degenerate points are dropped with a warning.
    """
    grid = [float(x) for x in l_grid_db]
    if len(grid) < 5 or any(x <= 0 for x in grid):
        raise ValueError("need at least 5 positive loss values")
    spec = spec or GhzSpec()
    reports = []
    points = []
    for l_db in grid:
        r = ghz_pipeline(replace(spec, eta=eta_from_db(l_db), design=DesignKind.TRIANGULAR))
        reports.append(r)
        if r.degenerate or not r.infidelity > 0:
            warnings.warn(f"dropping degenerate GHZ point at l={l_db} dB")
            continue
        points.append((l_db, r.infidelity))
    return power_law_fit(points), reports
