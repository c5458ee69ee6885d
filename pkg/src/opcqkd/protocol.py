"""High-dimensional BB84 over the phase-conjugated round-trip link.

One round, in Bob's mode frame (``d = 2N`` modes):

1. Bob's coupler tree turns a single-mode pulse into ``d`` equal-power modes.
2. The first delayer puts mode ``j`` in time bin ``j``; bin ``j`` travels the
   forward channel as the column ``M[:, j] v0_j``.
3. The conjugating mirror and its wave plate map every bin to
   ``-i t D conj(.)``; Alice's phase shifter then gives bin ``j`` the phase
   ``theta_j`` and her attenuator sets the pulse intensity.
4. Each bin travels back through ``R_q ... R_1``.  The second delayer only
   aligns light that re-enters the mode it left from, so Bob's detection
   window holds the diagonal of the returned bin matrix.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import (
    ModalDelays,
    PerturbationSequence,
    SegmentKind,
    backward_matrix,
    drift_sequence,
    forward_matrix,
    hwp_signs,
    random_sequence,
)
from .errors import ConfigError, ContractError
from .linalg import RngLike, make_rng
from .opc import OpcParams, opc_reflect_amplitudes
from .states import (
    CoherentVector,
    IntensityRole,
    PulseIntensity,
    QuditState,
    attenuate,
    measure_in_basis,
    sample_photon_number,
    to_qudit,
)

MUB_TOL = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class MubSet:
    """Two mutually unbiased bases; ``bases[b][k]`` is state ``k`` of basis ``b``."""

    dim: int
    bases: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        eye = np.eye(self.dim)
        for b in self.bases:
            if b.shape != (self.dim, self.dim) or np.max(np.abs(b.conj() @ b.T - eye)) > MUB_TOL:
                raise ContractError("MUB basis is not orthonormal")
        if np.max(np.abs(self.cross_overlaps() - 1.0 / self.dim)) > MUB_TOL:
            raise ContractError("bases are not mutually unbiased")

    def state(self, basis_id: int, symbol: int) -> QuditState:
        return QuditState(self.bases[basis_id][symbol])

    def basis(self, basis_id: int) -> list[QuditState]:
        return [QuditState(row) for row in self.bases[basis_id]]

    def cross_overlaps(self) -> np.ndarray:
        """``|<u|v>|^2`` for every ``u`` in basis 0 and ``v`` in basis 1."""
        return np.abs(self.bases[0].conj() @ self.bases[1].T) ** 2


def build_mub_pair(d: int) -> MubSet:
    """Fourier basis plus its chirped copy.

    Basis 0 has entries ``w^{jk}/sqrt(d)`` with ``w = e^{2 pi i/d}``.  Basis 1
    multiplies component ``j`` by ``e^{i pi j^2/d}``; that chirp has a flat
    discrete Fourier spectrum, which makes every cross overlap ``1/d``.  All
    states have equal amplitudes, so each is reachable with phases alone.
    """
    if d < 2 or not _is_power_of_two(d):
        raise ContractError(f"MUB dimension must be a power of two >= 2, got {d}")
    j = np.arange(d)
    fourier = np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)
    chirp = np.exp(1j * np.pi * j**2 / d)
    b0 = fourier
    b1 = fourier * chirp[None, :]
    b0.setflags(write=False)
    b1.setflags(write=False)
    return MubSet(d, (b0, b1))


def csg_tree(beta: complex, depth: int) -> CoherentVector:
    """Binary tree of 50:50 couplers ``X(pi/4)`` fed with vacuum on idle ports.

    Each stage splits an amplitude ``x`` into ``(x/sqrt2, i x/sqrt2)``; the
    children of output ``k`` are outputs ``2k`` and ``2k + 1``.
    """
    if depth < 1:
        raise ContractError("coupler tree depth must be >= 1")
    v = np.array([complex(beta)])
    r = 1.0 / math.sqrt(2.0)
    for _ in range(depth):
        nxt = np.empty(2 * v.size, dtype=complex)
        nxt[0::2] = r * v
        nxt[1::2] = 1j * r * v
        v = nxt
    return CoherentVector(v)


def equalize_phases(v: CoherentVector) -> tuple[CoherentVector, np.ndarray]:
    """Phases ``theta_j`` making every component real positive, and the result."""
    a = v.amplitudes
    if np.any(a == 0):
        raise ContractError("cannot equalize the phase of a zero component")
    theta = -np.angle(a)
    return CoherentVector(np.abs(a).astype(complex)), theta


@dataclass(frozen=True)
class EncodingChoice:
    basis_id: int
    symbol: int
    theta: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.basis_id not in (0, 1):
            raise ContractError(f"basis_id must be 0 or 1, got {self.basis_id}")
        if self.symbol < 0:
            raise ContractError("symbol must be >= 0")


def return_template(v0: CoherentVector, opc: OpcParams, n_cores: int) -> np.ndarray:
    """Amplitudes Bob receives when Alice applies no phases: ``-i t D conj(v0)``."""
    return -1j * opc.t * (hwp_signs(n_cores) * np.conj(v0.amplitudes))


def encode(choice: EncodingChoice, mubs: MubSet, template) -> np.ndarray:
    """Phase-shifter setting that turns ``template`` into the chosen MUB state.

    The result is defined up to a global phase; phases are wrapped to
    ``(-pi, pi]``.
    """
    if choice.symbol >= mubs.dim:
        raise ContractError(f"symbol {choice.symbol} out of range for d = {mubs.dim}")
    t = np.asarray(template, dtype=complex)
    if t.size != mubs.dim:
        raise ContractError(f"template has {t.size} modes, MUBs have {mubs.dim}")
    mag = np.abs(t)
    if mag.min() == 0 or mag.max() - mag.min() > 1e-9 * mag.max():
        raise ContractError("template amplitudes are not equal; target unreachable by phases")
    target = mubs.bases[choice.basis_id][choice.symbol]
    return np.angle(target * np.conj(t))


def generated_state(theta, n_cores: int) -> QuditState:
    """``(-i/sqrt(2N)) (e^{i theta_1H}, -e^{i theta_1V}, ...)``, the state Bob
    receives for equal-amplitude phase-only encoding."""
    phases = np.exp(1j * np.asarray(theta, dtype=float))
    return QuditState(-1j * hwp_signs(n_cores) * phases / math.sqrt(2 * n_cores))


def eve_intercept_resend(state: QuditState, mubs: MubSet, rng: RngLike = None) -> QuditState:
    """Measure in a uniformly chosen basis and resend the observed basis state."""
    gen = make_rng(rng)
    b = int(gen.integers(2))
    k = measure_in_basis(state, mubs.bases[b], gen)
    return mubs.state(b, k)


class Eve(str, enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"


class Mirror(str, enum.Enum):
    OPC = "opc"
    PLAIN = "plain"


DEFAULT_INTENSITIES = (
    PulseIntensity(0.5, IntensityRole.SIGNAL),
    PulseIntensity(0.1, IntensityRole.DECOY),
    PulseIntensity(0.0, IntensityRole.VACUUM),
)


@dataclass(frozen=True)
class SessionConfig:
    n_cores: int = 2
    q_perturbations: int = 5
    kappa_scale: float = 1.0
    opc: OpcParams = field(default_factory=OpcParams)
    intensities: tuple[PulseIntensity, ...] = DEFAULT_INTENSITIES
    n_rounds: int = 10_000
    eve: Eve = Eve.NONE
    seed: int | None = None
    segment_kind: SegmentKind = SegmentKind.SYMMETRIC
    mirror: Mirror = Mirror.OPC
    drift_step: float = 0.0
    beta: complex = 1.0
    z_length: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eve", Eve(self.eve))
        object.__setattr__(self, "mirror", Mirror(self.mirror))
        object.__setattr__(self, "segment_kind", SegmentKind(self.segment_kind))
        object.__setattr__(self, "intensities", tuple(self.intensities))
        if self.n_cores < 1:
            raise ConfigError("n_cores must be >= 1")
        if not _is_power_of_two(2 * self.n_cores):
            raise ConfigError(f"2*n_cores must be a power of two, got {2 * self.n_cores}")
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        if self.q_perturbations < 0:
            raise ConfigError("q_perturbations must be >= 0")
        if not self.kappa_scale > 0:
            raise ConfigError("kappa_scale must be positive")
        if not self.intensities:
            raise ConfigError("at least one pulse intensity is required")
        if self.opc.t == 0:
            raise ConfigError("kappa_l must be nonzero: the mirror reflects nothing at zero gain")
        if self.drift_step < 0:
            raise ConfigError("drift_step must be >= 0")
        if self.beta == 0:
            raise ConfigError("beta must be nonzero")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def dim(self) -> int:
        return 2 * self.n_cores


@dataclass
class SessionStats:
    sent: int = 0
    detected: int = 0
    sifted: int = 0
    errors: int = 0
    multi_photon: int = 0
    sifted_per_basis: list[int] = field(default_factory=lambda: [0, 0])
    errors_per_basis: list[int] = field(default_factory=lambda: [0, 0])
    sent_per_role: dict[str, int] = field(default_factory=dict)
    detected_per_role: dict[str, int] = field(default_factory=dict)
    window_loss: float = 0.0
    seed: int | None = None

    @property
    def qber(self) -> float | None:
        return self.errors / self.sifted if self.sifted else None

    @property
    def qber_per_basis(self) -> list[float | None]:
        return [e / s if s else None for e, s in zip(self.errors_per_basis, self.sifted_per_basis)]

    @property
    def gains(self) -> dict[str, float]:
        return {r: self.detected_per_role.get(r, 0) / n for r, n in self.sent_per_role.items() if n}

    def gain(self, role: IntensityRole | str) -> float | None:
        """Click fraction for one intensity role; None if that role was never sent."""
        return self.gains.get(IntensityRole(role).value)

    @property
    def sifted_fraction(self) -> float:
        return self.sifted / self.sent if self.sent else 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(
            qber=self.qber,
            qber_per_basis=self.qber_per_basis,
            gains=self.gains,
            sifted_fraction=self.sifted_fraction,
        )
        return out


@dataclass(frozen=True, eq=False)
class RoundTrace:
    """What happened to one pulse before Bob's detector."""

    choice: EncodingChoice
    intensity: PulseIntensity
    emitted: CoherentVector
    theta: np.ndarray
    received: np.ndarray
    leaked_mu: float

    @property
    def received_mu(self) -> float:
        return float(np.sum(np.abs(self.received) ** 2))


def transmit(
    seq: PerturbationSequence,
    emitted: CoherentVector,
    theta,
    mu: float,
    opc: OpcParams,
    mirror: Mirror = Mirror.OPC,
) -> tuple[np.ndarray, float]:
    """Send Bob's pulse to Alice and back; returns (window amplitudes, leaked mean photons)."""
    d = seq.dim
    delays = seq.delays or ModalDelays.staggered(d)
    bins = forward_matrix(seq) * emitted.amplitudes[None, :]
    if mirror is Mirror.OPC:
        bins = opc_reflect_amplitudes(bins, opc)
    else:
        bins = -1j * opc.t * bins
    bins = hwp_signs(seq.n_cores)[:, None] * bins
    bins = bins * np.exp(1j * np.asarray(theta, dtype=float))[None, :]
    bins = attenuate(CoherentVector(bins.ravel()), mu).amplitudes.reshape(d, d)
    back = backward_matrix(seq) @ bins
    window = delays.window_mask()
    received = np.where(window, back, 0.0).sum(axis=1)
    leaked = float(np.sum(np.abs(back[~window]) ** 2))
    return received, leaked


def _streams(seed: int, round_index: int) -> tuple[np.random.Generator, ...]:
    # independent channel / Alice / Bob / Eve streams per round
    return tuple(
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(round_index, k)))
        for k in range(4)
    )


def draw_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def run_rounds(cfg: SessionConfig, seed: int):
    """Yield ``(trace, channel_sequence, (bob_rng, eve_rng), mubs)`` for every round of a session."""
    mubs = build_mub_pair(cfg.dim)
    depth = int(round(math.log2(cfg.dim)))
    emitted = csg_tree(cfg.beta, depth)
    template = return_template(emitted, cfg.opc, cfg.n_cores)
    delays = ModalDelays.staggered(cfg.dim)
    seq = None
    for r in range(cfg.n_rounds):
        g_chan, g_alice, g_bob, g_eve = _streams(seed, r)
        if seq is None or cfg.drift_step == 0:
            seq = random_sequence(
                cfg.n_cores,
                cfg.q_perturbations,
                cfg.segment_kind,
                g_chan,
                cfg.kappa_scale,
                cfg.z_length,
                delays=delays,
            )
        else:
            seq = drift_sequence(seq, cfg.drift_step, g_chan)
        basis_id = int(g_alice.integers(2))
        symbol = int(g_alice.integers(cfg.dim))
        intensity = cfg.intensities[int(g_alice.integers(len(cfg.intensities)))]
        theta = encode(EncodingChoice(basis_id, symbol), mubs, template)
        choice = EncodingChoice(basis_id, symbol, tuple(float(x) for x in theta))
        received, leaked = transmit(seq, emitted, theta, intensity.mu, cfg.opc, cfg.mirror)
        trace = RoundTrace(choice, intensity, emitted, theta, received, leaked)
        yield trace, seq, (g_bob, g_eve), mubs


def run_session(cfg: SessionConfig) -> SessionStats:
    """Simulate ``cfg.n_rounds`` rounds and tally sifting and error statistics."""
    seed = cfg.seed if cfg.seed is not None else draw_seed()
    stats = SessionStats(seed=seed)
    for it in cfg.intensities:
        stats.sent_per_role.setdefault(it.role.value, 0)
        stats.detected_per_role.setdefault(it.role.value, 0)
    loss_sum, loss_n = 0.0, 0
    for trace, _, (g_bob, g_eve), mubs in run_rounds(cfg, seed):
        role = trace.intensity.role.value
        stats.sent += 1
        stats.sent_per_role[role] += 1
        mu_in = trace.received_mu
        if trace.intensity.mu > 0:
            loss_sum += trace.leaked_mu / (trace.leaked_mu + mu_in)
            loss_n += 1
        bob_basis = int(g_bob.integers(2))
        n = sample_photon_number(mu_in, g_bob)
        if n == 0:
            continue
        stats.detected += 1
        stats.detected_per_role[role] += 1
        if n > 1:
            stats.multi_photon += 1
        qudit = to_qudit(CoherentVector(trace.received))
        if cfg.eve is Eve.INTERCEPT_RESEND:
            qudit = eve_intercept_resend(qudit, mubs, g_eve)
        outcome = measure_in_basis(qudit, mubs.bases[bob_basis], g_bob)
        if bob_basis != trace.choice.basis_id:
            continue
        stats.sifted += 1
        stats.sifted_per_basis[bob_basis] += 1
        if outcome != trace.choice.symbol:
            stats.errors += 1
            stats.errors_per_basis[bob_basis] += 1
    stats.window_loss = loss_sum / loss_n if loss_n else 0.0
    return stats
