"""Simulation of autocompensating high-dimensional QKD through a phase-conjugate mirror."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelSegment,
    PerturbationSequence,
    SegmentKind,
    hwp_matrix,
    propagate,
    random_sequence,
    reflect,
    round_trip_matrix,
)
from .linalg import factor_su2n, haar_unitary, mat_exp, su2_embed, Su2Params  # noqa: E402
from .opc import OpcParams  # noqa: E402
from .protocol import SessionConfig, SessionStats, build_mub_pair, run_session  # noqa: E402
from .states import CoherentVector, QuditState  # noqa: E402

__all__ = [
    "ChannelSegment",
    "CoherentVector",
    "OpcParams",
    "PerturbationSequence",
    "QuditState",
    "SegmentKind",
    "SessionConfig",
    "SessionStats",
    "Su2Params",
    "build_mub_pair",
    "factor_su2n",
    "haar_unitary",
    "hwp_matrix",
    "mat_exp",
    "propagate",
    "random_sequence",
    "reflect",
    "round_trip_matrix",
    "run_session",
    "su2_embed",
]
