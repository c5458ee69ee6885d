"""Perturbed bidirectional link: segment matrices, reflection rule and round trip.

Convention: matrices act on column vectors of amplitudes from the left and a
sequence ``S_1 ... S_q`` is multiplied in that written order.  Modes are
ordered ``1H, 1V, 2H, 2V, ...``.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DimensionError
from .linalg import (
    VERIFICATION_TOL,
    RngLike,
    haar_unitary,
    is_symmetric,
    is_unitary,
    make_rng,
    mat_exp,
    random_hermitian,
    random_symmetric_coupling,
)
from .states import CoherentVector, ModeLabel, Polarization, mode_labels

__all__ = [
    "ModeLabel",
    "Polarization",
    "mode_labels",
    "SegmentKind",
    "ChannelSegment",
    "PerturbationSequence",
    "ModalDelays",
    "hwp_matrix",
    "hwp_signs",
    "reflect",
    "forward_matrix",
    "backward_matrix",
    "round_trip_matrix",
    "scalar_round_trip",
    "propagate",
    "random_segment",
    "random_sequence",
    "drift_sequence",
    "polarization_preserving_mask",
]


class SegmentKind(str, enum.Enum):
    SYMMETRIC = "symmetric"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class ChannelSegment:
    """One perturbation of the link.

    ``forward`` is the Bob-to-Alice transfer matrix.  For symmetric segments
    the real coupling matrix it was generated from may be kept in
    ``generator`` so the segment can drift; ``z_length`` is metadata only.
    """

    forward: np.ndarray
    kind: SegmentKind = SegmentKind.GENERAL
    z_length: float = 1.0
    generator: np.ndarray | None = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.forward, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"segment matrix must be square, got {m.shape}")
        kind = SegmentKind(self.kind)
        if self.check:
            if not is_unitary(m, VERIFICATION_TOL):
                raise ContractError("segment matrix is not unitary")
            if kind is SegmentKind.SYMMETRIC and not is_symmetric(m, VERIFICATION_TOL):
                raise ContractError("segment marked symmetric but S != S^T")
        m.setflags(write=False)
        object.__setattr__(self, "forward", m)
        object.__setattr__(self, "kind", kind)

    @property
    def dim(self) -> int:
        return self.forward.shape[0]


@dataclass(frozen=True, eq=False)
class ModalDelays:
    """Per-mode delays of the fiber delayers, tracked as plain numbers.

    Bob's first delayer adds ``tau``; his second removes it on the way back.
    Only the bookkeeping is modelled, there is no pulse shape.
    """

    tau: np.ndarray

    def __post_init__(self):
        t = np.array(self.tau, dtype=float).reshape(-1)
        t.setflags(write=False)
        object.__setattr__(self, "tau", t)

    @classmethod
    def staggered(cls, dim: int, step: float = 1.0) -> "ModalDelays":
        return cls(step * np.arange(dim))

    def delay(self, clock: np.ndarray) -> np.ndarray:
        return np.asarray(clock, dtype=float) + self.tau

    def undelay(self, clock: np.ndarray) -> np.ndarray:
        return np.asarray(clock, dtype=float) - self.tau

    def window_mask(self) -> np.ndarray:
        """``mask[k, j]``: light launched in mode ``j`` and received in mode ``k``
        lands in the detection window after the second delayer."""
        return (self.tau[None, :] - self.tau[:, None]) == 0.0


@dataclass(frozen=True, eq=False)
class PerturbationSequence:
    segments: tuple[ChannelSegment, ...]
    n_cores: int
    delays: ModalDelays | None = None

    def __post_init__(self):
        if self.n_cores < 1:
            raise DimensionError("n_cores must be >= 1")
        segs = tuple(self.segments)
        dim = 2 * self.n_cores
        for k, s in enumerate(segs):
            if s.dim != dim:
                raise DimensionError(f"segment {k} has dim {s.dim}, expected {dim}")
        if self.delays is not None and self.delays.tau.size != dim:
            raise DimensionError("delay vector length must equal 2*n_cores")
        object.__setattr__(self, "segments", segs)

    @property
    def dim(self) -> int:
        return 2 * self.n_cores

    def __len__(self) -> int:
        return len(self.segments)


def hwp_matrix(n_cores: int) -> np.ndarray:
    """``I_N (x) sigma_z``: +1 on H slots, -1 on V slots."""
    if n_cores < 1:
        raise DimensionError("n_cores must be >= 1")
    return np.kron(np.eye(n_cores), np.diag([1.0, -1.0])).astype(complex)


@functools.lru_cache(maxsize=64)
def hwp_signs(n_cores: int) -> np.ndarray:
    """Diagonal of :func:`hwp_matrix` as a read-only real array."""
    sign = np.tile([1.0, -1.0], n_cores)
    sign.setflags(write=False)
    return sign


def _matrix_of(seg) -> np.ndarray:
    return seg.forward if isinstance(seg, ChannelSegment) else np.asarray(seg, dtype=complex)


def reflect(seg) -> np.ndarray:
    """Backward-path matrix of a segment, ``D S^T D``.

    Accepts a :class:`ChannelSegment` or a bare even-dimensional matrix.
    """
    s = _matrix_of(seg)
    if s.shape[0] % 2:
        raise DimensionError("reflection needs an even number of modes")
    sign = hwp_signs(s.shape[0] // 2)
    return sign[:, None] * s.T * sign[None, :]


def forward_matrix(seq: PerturbationSequence) -> np.ndarray:
    m = np.eye(seq.dim, dtype=complex)
    for s in seq.segments:
        m = m @ s.forward
    return m


def backward_matrix(seq: PerturbationSequence) -> np.ndarray:
    """``R_q ... R_1``, the Alice-to-Bob transfer matrix."""
    m = np.eye(seq.dim, dtype=complex)
    for s in seq.segments:
        m = reflect(s) @ m
    return m


def round_trip_matrix(seq: PerturbationSequence) -> np.ndarray:
    """``R_q ... R_1 D S_1* ... S_q*``; equals ``D`` for any unitary segments."""
    d = hwp_matrix(seq.n_cores)
    return backward_matrix(seq) @ d @ forward_matrix(seq).conj()


def scalar_round_trip(seq: PerturbationSequence) -> np.ndarray:
    """``M^T M*`` for the polarization-maintaining case (no wave plate)."""
    m = forward_matrix(seq)
    return m.T @ m.conj()


def propagate(amplitudes: CoherentVector, m) -> CoherentVector:
    mat = np.asarray(m, dtype=complex)
    if mat.ndim != 2 or mat.shape[1] != amplitudes.dim:
        raise DimensionError(f"matrix shape {mat.shape} does not act on dim {amplitudes.dim}")
    return CoherentVector(mat @ amplitudes.amplitudes)


def polarization_preserving_mask(n_cores: int) -> np.ndarray:
    """Boolean mask allowing couplings only between equal polarizations."""
    pol = np.tile([0, 1], n_cores)
    return pol[:, None] == pol[None, :]


def random_segment(
    n_cores: int,
    kind: SegmentKind | str = SegmentKind.SYMMETRIC,
    rng: RngLike = None,
    kappa_scale: float = 1.0,
    z_length: float = 1.0,
    polarization_preserving: bool = False,
) -> ChannelSegment:
    kind = SegmentKind(kind)
    dim = 2 * n_cores
    if kind is SegmentKind.SYMMETRIC:
        mask = polarization_preserving_mask(n_cores) if polarization_preserving else None
        c = random_symmetric_coupling(dim, kappa_scale, rng, mask=mask)
        # exp of a real symmetric matrix is symmetric unitary by construction
        return ChannelSegment(mat_exp(c, z_length, "eigh"), kind, z_length, generator=c, check=False)
    if polarization_preserving:
        raise ContractError("polarization_preserving applies to symmetric segments only")
    return ChannelSegment(haar_unitary(dim, rng), kind, z_length, check=False)


def random_sequence(
    n_cores: int,
    q: int,
    kind: SegmentKind | str = SegmentKind.SYMMETRIC,
    rng: RngLike = None,
    kappa_scale: float = 1.0,
    z_length: float = 1.0,
    polarization_preserving: bool = False,
    delays: ModalDelays | None = None,
) -> PerturbationSequence:
    """Draw ``q`` independent random segments on ``2 * n_cores`` modes."""
    if q < 0:
        raise ContractError("q must be >= 0")
    gen = make_rng(rng)
    segs = tuple(
        random_segment(n_cores, kind, gen, kappa_scale, z_length, polarization_preserving)
        for _ in range(q)
    )
    return PerturbationSequence(segs, n_cores, delays)


def drift_sequence(seq: PerturbationSequence, step: float, rng: RngLike = None) -> PerturbationSequence:
    """Nudge every segment by a small random increment.

    Symmetric segments keep their class: their coupling matrix gets a random
    symmetric increment and is re-exponentiated.  General segments are
    multiplied by ``exp(i step H)`` with a random traceless Hermitian ``H``.
    """
    if step < 0:
        raise ContractError("drift step must be >= 0")
    if step == 0:
        return seq
    gen = make_rng(rng)
    out = []
    for s in seq.segments:
        if s.kind is SegmentKind.SYMMETRIC and s.generator is not None:
            dc = random_symmetric_coupling(s.dim, step, gen)
            mask = s.generator != 0
            c = s.generator + np.where(mask | np.eye(s.dim, dtype=bool), dc, 0.0)
            out.append(replace(s, forward=mat_exp(c, s.z_length), generator=c))
        else:
            kick = mat_exp(random_hermitian(s.dim, step, gen), 1.0)
            out.append(replace(s, forward=s.forward @ kick, kind=SegmentKind.GENERAL, generator=None))
    return PerturbationSequence(tuple(out), seq.n_cores, seq.delays)
