"""Multimode coherent pulses, single-photon qudits and their measurement."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError
from .linalg import RngLike, make_rng

NORM_TOL = 1e-10
ORTHO_TOL = 1e-8


class Polarization(str, enum.Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True)
class ModeLabel:
    """A (core, polarization) pair; cores are numbered from 1."""

    core: int
    polarization: Polarization

    @property
    def index(self) -> int:
        return 2 * (self.core - 1) + (0 if self.polarization is Polarization.H else 1)

    @classmethod
    def from_index(cls, index: int) -> "ModeLabel":
        if index < 0:
            raise DimensionError(f"mode index must be >= 0, got {index}")
        pol = Polarization.H if index % 2 == 0 else Polarization.V
        return cls(index // 2 + 1, pol)

    def __str__(self) -> str:
        return f"{self.core}{self.polarization.value}"


def mode_labels(n_cores: int) -> list[ModeLabel]:
    return [ModeLabel.from_index(k) for k in range(2 * n_cores)]


def _vector(values, name: str) -> np.ndarray:
    v = np.array(values, dtype=complex).reshape(-1)
    if v.size == 0:
        raise DimensionError(f"{name} must not be empty")
    if not np.all(np.isfinite(v)):
        raise ContractError(f"{name} has non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class CoherentVector:
    """Complex amplitudes of a multimode coherent state, one per mode."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _vector(self.amplitudes, "amplitudes"))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def mean_photon_number(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def labels(self) -> list[ModeLabel]:
        if self.dim % 2:
            raise DimensionError("mode labels need an even number of amplitudes")
        return mode_labels(self.dim // 2)

    def __len__(self) -> int:
        return self.dim


@dataclass(frozen=True, eq=False)
class QuditState:
    """Normalized single-photon wavefunction over ``d`` modes."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _vector(self.coeffs, "coeffs")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ContractError(f"qudit state not normalized (|c|^2 = {norm!r})")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def normalized(cls, values) -> "QuditState":
        v = np.asarray(values, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ContractError("cannot normalize a zero vector")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def overlap(self, other: "QuditState") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.coeffs, other.coeffs))

    def __len__(self) -> int:
        return self.dim


class IntensityRole(str, enum.Enum):
    SIGNAL = "signal"
    DECOY = "decoy"
    VACUUM = "vacuum"


@dataclass(frozen=True)
class PulseIntensity:
    mu: float
    role: IntensityRole

    def __post_init__(self):
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ContractError(f"mean photon number must be finite and >= 0, got {self.mu}")
        object.__setattr__(self, "role", IntensityRole(self.role))


def attenuate(v: CoherentVector, target_mu: float) -> CoherentVector:
    """Scale ``v`` uniformly so that its mean photon number is ``target_mu``."""
    if target_mu < 0:
        raise ContractError("target_mu must be >= 0")
    current = v.mean_photon_number
    if target_mu == 0:
        return CoherentVector(np.zeros(v.dim, dtype=complex))
    if current == 0:
        raise ContractError("cannot attenuate the vacuum to a nonzero intensity")
    return CoherentVector(v.amplitudes * math.sqrt(target_mu / current))


def sample_photon_number(mu: float, rng: RngLike = None) -> int:
    """Photon number of a coherent pulse with mean ``mu`` (Poisson)."""
    if mu < 0:
        raise ContractError("mu must be >= 0")
    if mu == 0:
        return 0
    return int(make_rng(rng).poisson(mu))


def to_qudit(v: CoherentVector) -> QuditState:
    """Single-photon wavefunction carried by a multimode coherent pulse."""
    if v.mean_photon_number == 0:
        raise ContractError("the vacuum has no single-photon component")
    return QuditState.normalized(v.amplitudes)


BasisLike = Union[np.ndarray, Sequence[QuditState]]


def basis_matrix(basis: BasisLike) -> np.ndarray:
    """Stack a basis as rows of a matrix and check orthonormality."""
    if isinstance(basis, np.ndarray):
        rows = np.asarray(basis, dtype=complex)
    else:
        rows = np.array([b.coeffs if isinstance(b, QuditState) else b for b in basis], dtype=complex)
    if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
        raise DimensionError(f"basis must hold d vectors of length d, got shape {rows.shape}")
    gram = rows.conj() @ rows.T
    if np.max(np.abs(gram - np.eye(rows.shape[0]))) > ORTHO_TOL:
        raise ContractError("measurement basis is not orthonormal")
    return rows


def born_probabilities(q: QuditState, basis: BasisLike) -> np.ndarray:
    rows = basis_matrix(basis)
    if rows.shape[1] != q.dim:
        raise DimensionError(f"basis dim {rows.shape[1]} != state dim {q.dim}")
    p = np.abs(rows.conj() @ q.coeffs) ** 2
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"Born probabilities sum to {total!r}")
    return p / total


def measure_in_basis(q: QuditState, basis: BasisLike, rng: RngLike = None) -> int:
    """Projective measurement; returns the index of the basis vector observed."""
    p = born_probabilities(q, basis)
    return int(make_rng(rng).choice(p.size, p=p))
