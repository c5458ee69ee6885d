import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opcqkd.channel import SegmentKind, backward_matrix, forward_matrix, hwp_matrix, random_sequence, round_trip_matrix
from opcqkd.errors import ParameterError
from opcqkd.opc import (
    OpcParams,
    apply_local_hwp,
    opc_reflect_coherent,
    opc_reflect_multimode,
    opc_reflect_qudit,
    opc_transmit_coherent,
)
from opcqkd.states import CoherentVector, QuditState

QUARTER = OpcParams(math.pi / 4)


@pytest.mark.parametrize("kl", np.linspace(-1.5, 1.5, 61))
def test_bogoliubov_normalization(kl):
    p = OpcParams(float(kl))
    assert abs(p.s**2 - p.t**2 - 1.0) <= 1e-12


@pytest.mark.parametrize("kl", [math.pi / 2, -math.pi / 2, 2.0, float("nan")])
def test_invalid_kappa_l(kl):
    with pytest.raises(ParameterError):
        OpcParams(kl)


class TestCoherent:
    def test_zero(self):
        assert opc_reflect_coherent(0, OpcParams(0.6)) == 0

    def test_unit_reflectivity(self):
        a = 0.3 - 1.2j
        assert opc_reflect_coherent(a, QUARTER) == pytest.approx(-1j * a.conjugate(), abs=1e-15)

    def test_imaginary_input(self):
        assert opc_reflect_coherent(1j, QUARTER) == pytest.approx(-1.0, abs=1e-15)

    def test_transmitted_arm(self):
        p = OpcParams(0.6)
        assert opc_transmit_coherent(2 - 1j, p) == pytest.approx(p.s * (2 - 1j))

    def test_double_reflection_is_identity(self):
        # -i conj(-i conj(a)) = -i (i a) = a: the conjugation turns the second -i into +i
        a = 0.7 + 0.2j
        twice = opc_reflect_coherent(opc_reflect_coherent(a, QUARTER), QUARTER)
        assert twice == pytest.approx(a, abs=1e-15)


class TestMultimode:
    def test_zero_vector(self):
        out = opc_reflect_multimode(CoherentVector(np.zeros(4)), OpcParams(0.6))
        assert np.array_equal(out.amplitudes, np.zeros(4))

    def test_pair(self):
        a, b = 1 + 2j, -0.5j
        out = opc_reflect_multimode(CoherentVector([a, b]), QUARTER)
        assert np.allclose(out.amplitudes, [-1j * np.conj(a), -1j * np.conj(b)], atol=1e-15)

    @given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=8),
           st.floats(-1.5, 1.5))
    def test_matches_scalar_loop(self, values, kl):
        p = OpcParams(kl)
        out = opc_reflect_multimode(CoherentVector(values), p).amplitudes
        loop = [opc_reflect_coherent(v, p) for v in values]
        assert np.allclose(out, loop, rtol=0, atol=1e-12)

    def test_commutes_with_permutation(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=6) + 1j * rng.normal(size=6)
        perm = rng.permutation(6)
        p = OpcParams(0.4)
        lhs = opc_reflect_multimode(CoherentVector(v[perm]), p).amplitudes
        rhs = opc_reflect_multimode(CoherentVector(v), p).amplitudes[perm]
        assert np.array_equal(lhs, rhs)


class TestQudit:
    def test_basis_vector(self):
        w, out = opc_reflect_qudit(QuditState([1, 0, 0]), OpcParams(0.6))
        assert np.allclose(out.coeffs, [1j, 0, 0])
        p = OpcParams(0.6)
        assert w == pytest.approx(p.s**2 / (p.s**2 + p.t**2))

    def test_uniform(self):
        c = QuditState(np.ones(4) / 2)
        _, out = opc_reflect_qudit(c, OpcParams(0.3))
        assert np.allclose(np.abs(out.coeffs), 0.5)

    def test_superposition_not_conjugated(self):
        c = QuditState(np.array([1, 1j]) / math.sqrt(2))
        _, out = opc_reflect_qudit(c, OpcParams(0.6))
        assert np.allclose(out.coeffs, 1j * np.array([1, 1j]) / math.sqrt(2))

    def test_zero_gain_has_no_reflection(self):
        with pytest.raises(ParameterError):
            opc_reflect_qudit(QuditState([1, 0]), OpcParams(0.0))


class TestLocalHwp:
    def test_flip(self):
        out = apply_local_hwp(CoherentVector([1 + 1j, 2.0]), 1)
        assert np.array_equal(out.amplitudes, [1 + 1j, -2.0])

    def test_h_only_unchanged(self):
        v = CoherentVector([1.0, 0.0, 3j, 0.0])
        assert np.array_equal(apply_local_hwp(v, 2).amplitudes, v.amplitudes)

    def test_twice_is_identity(self):
        q = QuditState(np.array([1, 1j, -1, 2]) / math.sqrt(7))
        again = apply_local_hwp(apply_local_hwp(q, 2), 2)
        assert isinstance(again, QuditState)
        assert np.array_equal(again.coeffs, q.coeffs)


@pytest.mark.parametrize("kind", list(SegmentKind))
def test_pipeline_matches_round_trip_matrix(kind):
    """Forward channel, mirror, wave plate and return reproduce -i t D conj(alpha)."""
    n = 3
    seq = random_sequence(n, 4, kind, 21)
    p = OpcParams(0.6)
    rng = np.random.default_rng(5)
    alpha = CoherentVector(rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n))
    at_alice = CoherentVector(forward_matrix(seq) @ alpha.amplitudes)
    reflected = apply_local_hwp(opc_reflect_multimode(at_alice, p), n)
    back = backward_matrix(seq) @ reflected.amplitudes
    via_matrix = -1j * p.t * (round_trip_matrix(seq) @ np.conj(alpha.amplitudes))
    assert np.max(np.abs(back - via_matrix)) <= 1e-9
    assert np.max(np.abs(back - (-1j * p.t * hwp_matrix(n) @ np.conj(alpha.amplitudes)))) <= 1e-9
