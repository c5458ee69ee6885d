"""Four-wave-mixing phase-conjugate mirror.

The mirror is described by the Bogoliubov pair ``s = sec(kl)``,
``t = tan(kl)``: a coherent amplitude ``a`` leaves as ``s a`` in the
transmitted arm and ``-i t conj(a)`` in the reflected arm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TypeVar

import numpy as np

from .channel import hwp_matrix
from .errors import DimensionError, ParameterError
from .states import CoherentVector, QuditState


@dataclass(frozen=True)
class OpcParams:
    """Coupling-length product ``kappa_l`` of the nonlinear medium (radians)."""

    kappa_l: float = 0.6

    def __post_init__(self):
        if not math.isfinite(self.kappa_l) or abs(self.kappa_l) >= math.pi / 2:
            raise ParameterError(f"kappa_l must lie in (-pi/2, pi/2), got {self.kappa_l}")

    @property
    def s(self) -> float:
        return 1.0 / math.cos(self.kappa_l)

    @property
    def t(self) -> float:
        return math.tan(self.kappa_l)


def _params(p) -> OpcParams:
    return p if isinstance(p, OpcParams) else OpcParams(float(p))


def opc_reflect_coherent(alpha: complex, p: OpcParams) -> complex:
    """Reflected-arm amplitude ``-i t conj(alpha)``."""
    p = _params(p)
    return -1j * p.t * complex(alpha).conjugate()


def opc_transmit_coherent(alpha: complex, p: OpcParams) -> complex:
    """Transmitted-arm amplitude ``s alpha``."""
    p = _params(p)
    return p.s * complex(alpha)


def opc_reflect_amplitudes(a: np.ndarray, p: OpcParams) -> np.ndarray:
    """Array form of :func:`opc_reflect_coherent` (any shape)."""
    p = _params(p)
    return -1j * p.t * np.conj(np.asarray(a, dtype=complex))


def opc_reflect_multimode(alphas: CoherentVector, p: OpcParams) -> CoherentVector:
    return CoherentVector(opc_reflect_amplitudes(alphas.amplitudes, p))


def opc_transmit_multimode(alphas: CoherentVector, p: OpcParams) -> CoherentVector:
    return CoherentVector(_params(p).s * alphas.amplitudes)


def opc_reflect_qudit(c: QuditState, p: OpcParams) -> tuple[float, QuditState]:
    """Single-photon input: returns (transmitted branch weight, reflected qudit).

    The reflected branch carries ``i t c_j`` with no conjugation, as obtained
    from the single-photon form of the mirror; it is renormalized here.
    """
    p = _params(p)
    s, t = p.s, p.t
    if t == 0:
        raise ParameterError("kappa_l = 0 gives no reflected branch")
    reflected = QuditState.normalized(1j * t * c.coeffs)
    return s * s / (s * s + t * t), reflected


V = TypeVar("V", CoherentVector, QuditState)


def apply_local_hwp(vec: V, n_cores: int) -> V:
    """Pi phase between H and V of every core (the wave plate in the mirror)."""
    d = hwp_matrix(n_cores)
    values = vec.amplitudes if isinstance(vec, CoherentVector) else vec.coeffs
    if values.size != d.shape[0]:
        raise DimensionError(f"vector of dim {values.size} vs {d.shape[0]} modes")
    out = np.diag(d) * values
    return type(vec)(out)
