"""Dense complex linear algebra for modal channel matrices.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` acting on
column vectors of mode amplitudes from the left.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError

CONSTRUCTION_TOL = 1e-12
VERIFICATION_TOL = 1e-10

RngLike = Union[int, np.integer, np.random.Generator, np.random.SeedSequence, None]


def make_rng(rng: RngLike) -> np.random.Generator:
    """Return a Generator for ``rng`` (seed, SeedSequence or an existing Generator)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _as_square(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionError(f"{name} must have dim >= 1")
    return m


def max_abs(a) -> float:
    """Max-norm (largest absolute entry) of an array; 0.0 for empty input."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a, tol: float = 0.0) -> bool:
    m = _as_square(a)
    scale = max(1.0, max_abs(m))
    return max_abs(m - m.conj().T) <= tol * scale


def is_unitary(u, tol: float = VERIFICATION_TOL) -> bool:
    """True iff ``max|U^H U - I| <= tol``."""
    m = _as_square(u)
    return max_abs(m.conj().T @ m - np.eye(m.shape[0])) <= tol


def is_symmetric(u, tol: float = VERIFICATION_TOL) -> bool:
    """True iff ``max|U - U^T| <= tol`` (plain transpose, no conjugation)."""
    m = _as_square(u)
    return max_abs(m - m.T) <= tol


def _expm_series(x: np.ndarray) -> np.ndarray:
    # scaling and squaring around a truncated Taylor series
    n = x.shape[0]
    norm1 = float(np.max(np.sum(np.abs(x), axis=0)))
    squarings = max(0, int(math.ceil(math.log2(norm1 / 0.5)))) if norm1 > 0.5 else 0
    y = x / (2.0**squarings)
    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 40):
        term = term @ y / k
        result = result + term
        if max_abs(term) <= 1e-18 * max_abs(result):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def mat_exp(a, scale: float = 1.0, method: str = "auto") -> np.ndarray:
    """Compute ``exp(i * scale * A)``.

    Hermitian input (in particular a real symmetric coupling matrix) goes
    through an eigendecomposition, which keeps the result unitary to
    roundoff; anything else uses scaling and squaring of a Taylor series.
    ``method`` may force ``"eigh"`` or ``"series"``.
    """
    if method not in ("auto", "eigh", "series"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(a, np.ndarray) and a.dtype == np.float64 and a.ndim == 2 and a.shape[0] == a.shape[1]:
        m = a
    else:
        m = _as_square(a, "A")
    if method == "auto":
        method = "eigh" if is_hermitian(m, 1e-14) else "series"
    if method == "series":
        return _expm_series(1j * scale * np.asarray(m, dtype=complex))
    if not np.iscomplexobj(m) or not m.imag.any():
        w, v = np.linalg.eigh(m.real)
    else:
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.exp(1j * scale * w)) @ v.conj().T


@functools.lru_cache(maxsize=64)
def _upper_indices(dim: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(dim, 1)


def random_symmetric_coupling(
    dim: int,
    kappa_scale: float,
    rng: RngLike = None,
    beta_scale: float | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Random real symmetric coupling matrix.

    Off-diagonal couplings are Uniform(-kappa_scale, kappa_scale), diagonal
    propagation constants Uniform(-beta_scale, beta_scale) with
    ``beta_scale`` defaulting to ``kappa_scale``.  A boolean ``mask`` zeroes
    forbidden couplings (it must itself be symmetric).
    """
    if dim < 1:
        raise DimensionError("dim must be >= 1")
    if kappa_scale <= 0:
        raise ValueError("kappa_scale must be positive")
    if beta_scale is None:
        beta_scale = kappa_scale
    gen = make_rng(rng)
    iu = _upper_indices(dim)
    c = np.zeros((dim, dim))
    c[iu] = gen.uniform(-kappa_scale, kappa_scale, size=iu[0].size)
    c += c.T
    if beta_scale > 0:
        c[np.diag_indices(dim)] = gen.uniform(-beta_scale, beta_scale, size=dim)
    if mask is not None:
        c = np.where(mask, c, 0.0)
    return c


def random_hermitian(dim: int, scale: float, rng: RngLike = None) -> np.ndarray:
    """Random traceless Hermitian matrix with entries of order ``scale``."""
    gen = make_rng(rng)
    g = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    h = 0.5 * scale * (g + g.conj().T)
    h -= np.trace(h) / dim * np.eye(dim)
    return h


def haar_unitary(dim: int, rng: RngLike = None) -> np.ndarray:
    """Haar-random special unitary matrix (QR of a Ginibre matrix)."""
    if dim < 1:
        raise DimensionError("dim must be >= 1")
    if dim == 1:
        return np.ones((1, 1), dtype=complex)
    gen = make_rng(rng)
    z = (gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    det = np.linalg.det(q)
    return q * (det ** (-1.0 / dim))


@dataclass(frozen=True)
class Su2Params:
    """A two-mode block ``Z(alpha) Z(delta) X(theta) Z(-delta)`` on modes (i, j).

    ``Z(x) = diag(1, e^{ix})`` and ``X(theta)`` has ``cos`` on the diagonal
    and ``i sin`` off it.  Mode ``i`` is the first row/column of the block.
    """

    theta: float
    delta: float
    alpha: float
    subspace: tuple[int, int]

    def __post_init__(self):
        i, j = self.subspace
        if i == j:
            raise ContractError(f"subspace indices must differ, got {self.subspace}")
        if i < 0 or j < 0:
            raise ContractError(f"negative mode index in {self.subspace}")

    def block(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        e_a = complex(math.cos(self.alpha), math.sin(self.alpha))
        e_d = complex(math.cos(self.delta), math.sin(self.delta))
        return np.array(
            [[c, 1j * s / e_d], [e_a * 1j * s * e_d, e_a * c]],
            dtype=complex,
        )


def z_phase(x: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * x)])


def x_coupler(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def su2_embed(p: Su2Params, dim: int) -> np.ndarray:
    """Identity of size ``dim`` with ``p``'s 2x2 block placed on its subspace."""
    i, j = p.subspace
    if i >= dim or j >= dim:
        raise DimensionError(f"subspace {p.subspace} out of range for dim {dim}")
    u = np.eye(dim, dtype=complex)
    b = p.block()
    u[i, i], u[i, j] = b[0, 0], b[0, 1]
    u[j, i], u[j, j] = b[1, 0], b[1, 1]
    return u


def su2_product(factors: Iterable[Su2Params], dim: int) -> np.ndarray:
    """Ordered product ``F_1 @ F_2 @ ...`` of embedded blocks."""
    u = np.eye(dim, dtype=complex)
    for p in factors:
        u = u @ su2_embed(p, dim)
    return u


def _wrap(x: float) -> float:
    return math.remainder(x, 2.0 * math.pi)


def factor_su2n(u, tol: float = VERIFICATION_TOL) -> list[Su2Params]:
    """Factor a unitary into two-mode blocks whose ordered product is ``u``.

    Column-by-column Givens elimination: for column ``c`` the entries of rows
    ``c+1..d-1`` are nulled in lexicographic order with blocks on ``(c, r)``.
    The leftover diagonal phases are folded into the ``alpha`` retarder of the
    last block touching each mode where possible, otherwise emitted as
    ``theta = 0`` retarder blocks.
    """
    m = _as_square(u, "U")
    if not is_unitary(m, tol):
        raise ContractError("factor_su2n needs a unitary input")
    d = m.shape[0]
    w = m.copy()
    factors: list[Su2Params] = []
    for c in range(d - 1):
        for r in range(c + 1, d):
            a, b = w[c, c], w[r, c]
            if abs(b) <= CONSTRUCTION_TOL * 1e-3:
                continue
            theta = math.atan2(abs(b), abs(a))
            if abs(a) == 0.0:
                delta = _wrap(np.angle(b) - math.pi / 2)
            else:
                delta = _wrap(np.angle(b) - np.angle(a) - math.pi / 2)
            p = Su2Params(theta, delta, 0.0, (c, r))
            g = p.block().conj().T
            rows = w[[c, r], :]
            w[[c, r], :] = g @ rows
            w[r, c] = 0.0
            factors.append(p)
    phases = np.angle(np.diag(w))
    if d == 1:
        return factors
    for mode in range(d):
        phi = float(phases[mode])
        if abs(phi) <= 1e-15:
            continue
        last = None
        for k in range(len(factors) - 1, -1, -1):
            if mode in factors[k].subspace:
                last = k
                break
        if last is not None and factors[last].subspace[1] == mode:
            f = factors[last]
            factors[last] = Su2Params(f.theta, _wrap(f.delta - phi), _wrap(f.alpha + phi), f.subspace)
        else:
            factors.append(Su2Params(0.0, 0.0, phi, ((mode + 1) % d, mode)))
    return factors


def reconstruction_error(u, factors: Sequence[Su2Params]) -> float:
    m = _as_square(u)
    return max_abs(su2_product(factors, m.shape[0]) - m)
