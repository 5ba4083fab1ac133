"""Design-dependent loss matrices and lossy transfer matrices.

Each unit cell passes a photon with probability ``eta``. After all uniform
loss elements are commuted as far as they go, a design is summarised by an
amplitude matrix ``gamma`` so that the lossy transfer matrix is
``T = gamma * U`` (entrywise). Both supported designs give a rank-one
``gamma = outer(out_amps, in_amps)``, i.e. loss that sits entirely on the
input and output ports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_TOL, as_matrix, is_subunitary, is_unitary

SEPARABILITY_TOL = 1e-12


class DesignKind(str, enum.Enum):
    RECTANGULAR = "rect"
    TRIANGULAR = "tri"

    @classmethod
    def parse(cls, value: "str | DesignKind") -> "DesignKind":
        if isinstance(value, DesignKind):
            return value
        aliases = {
            "rect": cls.RECTANGULAR,
            "rectangular": cls.RECTANGULAR,
            "clements": cls.RECTANGULAR,
            "tri": cls.TRIANGULAR,
            "triangular": cls.TRIANGULAR,
            "reck": cls.TRIANGULAR,
        }
        try:
            return aliases[value.lower()]
        except KeyError:
            raise ValueError(f"unknown design {value!r}") from None


@dataclass(frozen=True)
class LossModel:
    """Amplitude-transmittance matrix of a design, plus its port factors.

    ``in_amps``/``out_amps`` are ``None`` for a user-supplied gamma that has
    no rank-one factorization; such a model can be composed but not dilated.
    """

    m: int
    eta: float
    design: DesignKind | None
    gamma: np.ndarray
    in_amps: np.ndarray | None
    out_amps: np.ndarray | None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.shape != (self.m, self.m):
            raise ValueError(f"gamma must be {self.m}x{self.m}, got {g.shape}")
        if np.any(g < 0) or np.any(g > 1):
            raise ValueError("gamma entries must lie in [0, 1]")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        for name in ("in_amps", "out_amps"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def is_separable(self) -> bool:
        if self.in_amps is None or self.out_amps is None:
            return False
        err = np.abs(np.outer(self.out_amps, self.in_amps) - self.gamma)
        return bool(err.max(initial=0.0) <= SEPARABILITY_TOL)

    @classmethod
    def custom(cls, gamma) -> "LossModel":
        g = np.asarray(gamma, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("gamma must be square")
        return cls(m=g.shape[0], eta=float("nan"), design=None, gamma=g, in_amps=None, out_amps=None)

    @classmethod
    def separable(cls, out_amps, in_amps) -> "LossModel":
        out_amps = np.asarray(out_amps, dtype=float)
        in_amps = np.asarray(in_amps, dtype=float)
        return cls(
            m=len(out_amps),
            eta=float("nan"),
            design=None,
            gamma=np.outer(out_amps, in_amps),
            in_amps=in_amps,
            out_amps=out_amps,
        )


@dataclass(frozen=True)
class LossyTransform:
    t: np.ndarray
    u: np.ndarray
    loss: LossModel

    @property
    def m(self) -> int:
        return self.t.shape[0]


def eta_from_db(loss_db: float) -> float:
    """Transmission efficiency for a loss given in dB."""
    if loss_db < 0:
        raise ValueError(f"loss must be non-negative, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return eta


def gamma_rectangular(m: int, eta: float) -> LossModel:
    """Every input/output path crosses m loss elements: gamma_ij = eta^(m/2)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    eta = _check_eta(eta)
    amp = np.full(m, eta ** (m / 4.0))
    gamma = np.full((m, m), eta ** (m / 2.0))
    return LossModel(m=m, eta=eta, design=DesignKind.RECTANGULAR, gamma=gamma, in_amps=amp, out_amps=amp.copy())


def triangular_port_amps(m: int, eta: float) -> np.ndarray:
    """Per-port amplitude factor of the triangular mesh (1-based port p):
    eta^(1/4) * eta^((m - max(p, 2)) / 2). Ports 1 and 2 coincide."""
    ports = np.maximum(np.arange(1, m + 1), 2)
    return eta**0.25 * eta ** ((m - ports) / 2.0)


def gamma_triangular(m: int, eta: float) -> LossModel:
    """gamma_ij = eta^((1 + 2m - i - j)/2) for i, j >= 2; port 1 copies port 2."""
    if m < 2:
        raise ValueError("triangular design needs m >= 2")
    eta = _check_eta(eta)
    amp = triangular_port_amps(m, eta)
    return LossModel(
        m=m, eta=eta, design=DesignKind.TRIANGULAR, gamma=np.outer(amp, amp), in_amps=amp, out_amps=amp.copy()
    )


def gamma_for(design: "str | DesignKind", m: int, eta: float) -> LossModel:
    design = DesignKind.parse(design)
    if design is DesignKind.RECTANGULAR:
        return gamma_rectangular(m, eta)
    return gamma_triangular(m, eta)


def compose_lossy(u, loss: LossModel, tol: float = DEFAULT_TOL) -> LossyTransform:
    """T = gamma (entrywise) U."""
    u = as_matrix(u, square=True)
    if u.shape[0] != loss.m:
        raise ValueError(f"dimension mismatch: U is {u.shape[0]}x{u.shape[0]}, loss model has m={loss.m}")
    if not is_unitary(u, tol):
        raise ValueError("U is not unitary")
    t = loss.gamma * u
    if not is_subunitary(t, tol):
        raise ValueError("gamma * U is not sub-unitary; gamma is not a physical loss pattern for this U")
    return LossyTransform(t=t, u=u, loss=loss)


def _beamsplitter_layer(m: int, amps: np.ndarray, virtual_offset: int) -> np.ndarray:
    """3m-mode unitary coupling nominal mode j to mode virtual_offset + j with
    transmission amplitude amps[j]."""
    b = np.eye(3 * m, dtype=np.complex128)
    for j, g in enumerate(amps):
        r = math.sqrt(max(0.0, 1.0 - g * g))
        v = virtual_offset + j
        b[j, j] = g
        b[v, j] = r
        b[j, v] = -r
        b[v, v] = g
    return b


def dilate(transform: LossyTransform) -> np.ndarray:
    """3m x 3m unitary whose leading m x m block is ``transform.t``.

    Mode order is [nominal | input-virtual | output-virtual].
    """
    loss = transform.loss
    if not loss.is_separable:
        raise ValueError(
            "dilate needs a separable loss model (gamma = outer(out_amps, in_amps)); "
            "general non-separable purification is not implemented"
        )
    m = transform.m
    b_in = _beamsplitter_layer(m, loss.in_amps, m)
    b_out = _beamsplitter_layer(m, loss.out_amps, 2 * m)
    core = np.eye(3 * m, dtype=np.complex128)
    core[:m, :m] = transform.u
    return b_out @ core @ b_in
