"""Tests for direction vectors, steering manifolds and beam patterns."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmcap.errors import InvalidArgumentError
from swarmcap.geometry import (
    ArrayGeometry,
    Direction,
    array_factor,
    beam_pattern,
    beam_pattern_closed_form,
    direction_vector,
    direction_vectors,
    steering_matrix,
    steering_ula,
    steering_upa,
    steering_vector,
)
from swarmcap.orthogonal import AngularSector, upa_orthogonal_set

angles = st.floats(-math.pi / 2, math.pi / 2, allow_nan=False)
sizes = st.integers(1, 9)


class TestArrayGeometry:
    def test_kinds(self):
        assert ArrayGeometry.ula(16).kind == "ULA"
        assert ArrayGeometry.upa(8, 8).kind == "UPA"
        assert ArrayGeometry.upa(8, 8).size == 64

    @pytest.mark.parametrize("m_y,m_z", [(0, 1), (4, 0), (-2, 3)])
    def test_rejects_nonpositive(self, m_y, m_z):
        with pytest.raises(InvalidArgumentError):
            ArrayGeometry(m_y, m_z)

    def test_direction_range_checked(self):
        with pytest.raises(InvalidArgumentError):
            Direction(0.0, 2.0)


class TestDirectionVector:
    def test_boresight(self):
        np.testing.assert_allclose(direction_vector(Direction(0, 0)), [1, 0, 0])

    @pytest.mark.parametrize("phi", [-1.0, 0.0, 0.7])
    def test_zenith(self, phi):
        np.testing.assert_allclose(direction_vector(Direction(math.pi / 2, phi)), [0, 0, 1], atol=1e-15)

    def test_azimuth_sixty(self):
        v = direction_vector(Direction(0, math.pi / 3))
        np.testing.assert_allclose(v, [0.5, 0.8660254037844386, 0], atol=1e-12)

    @given(angles, angles)
    def test_unit_norm_and_vectorised(self, t, p):
        v = direction_vector(Direction(t, p))
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        np.testing.assert_allclose(direction_vectors([t], [p])[0], v)


class TestSteering:
    def test_broadside_ula(self):
        np.testing.assert_array_equal(steering_ula(4, Direction(0, 0)), np.ones(4))

    def test_endfire_alternates(self):
        np.testing.assert_allclose(steering_ula(2, Direction(0, math.pi / 2)), [1, -1], atol=1e-15)

    def test_ula_orthogonal_spacing(self):
        a0 = steering_ula(16, Direction(0, 0))
        a1 = steering_ula(16, Direction(0, math.asin(2 / 16)))
        assert abs(np.vdot(a0, a1)) < 1e-12

    def test_ula_zero_elements(self):
        with pytest.raises(InvalidArgumentError):
            steering_ula(0, Direction(0, 0))

    def test_upa_small_cases(self):
        g = ArrayGeometry.upa(2, 2)
        np.testing.assert_array_equal(steering_upa(g, Direction(0, 0)), np.ones(4))
        np.testing.assert_allclose(steering_upa(g, Direction(math.pi / 2, 0)), [1, 1, -1, -1], atol=1e-15)

    def test_upa_orthogonal_pair_same_ring(self):
        g = ArrayGeometry.upa(8, 8)
        oset = upa_orthogonal_set(g, AngularSector.from_degrees(60, 60))
        ring = [d for d, l in zip(oset.directions, oset.ring_index) if l == 1]
        assert len(ring) >= 2
        assert abs(np.vdot(steering_vector(g, ring[0]), steering_vector(g, ring[1]))) < 1e-9

    def test_upa_wrong_type(self):
        with pytest.raises(InvalidArgumentError):
            steering_upa(8, Direction(0, 0))

    @given(angles, angles, sizes, sizes)
    def test_unit_modulus_first_entry_one(self, t, p, my, mz):
        a = steering_vector(ArrayGeometry(my, mz), Direction(t, p))
        assert a[0] == 1
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)

    @given(angles, st.integers(1, 16))
    def test_upa_single_row_matches_ula(self, p, m):
        d = Direction(0.0, p)
        np.testing.assert_allclose(steering_upa(ArrayGeometry(m, 1), d), steering_ula(m, d), atol=1e-12)

    def test_kronecker_order(self):
        g = ArrayGeometry.upa(3, 2)
        d = Direction(0.3, -0.5)
        a = steering_upa(g, d)
        az = np.exp(1j * np.pi * np.arange(2) * math.sin(d.theta))
        ay = np.exp(1j * np.pi * np.arange(3) * math.cos(d.theta) * math.sin(d.phi))
        np.testing.assert_allclose(a, [az[i] * ay[j] for i in range(2) for j in range(3)])

    def test_matrix_matches_columns(self, rng):
        g = ArrayGeometry.upa(4, 3)
        th = rng.uniform(-1.5, 1.5, 5)
        ph = rng.uniform(-1.5, 1.5, 5)
        A = steering_matrix(g, th, ph)
        for k in range(5):
            np.testing.assert_allclose(A[:, k], steering_vector(g, Direction(th[k], ph[k])))

    def test_ula_matrix_ignores_elevation(self):
        g = ArrayGeometry.ula(6)
        np.testing.assert_allclose(steering_matrix(g, [0.4], [0.2]), steering_matrix(g, [0.0], [0.2]))


class TestBeamPattern:
    def test_coherent(self):
        g = ArrayGeometry.upa(4, 5)
        d = Direction(0.2, 0.4)
        assert beam_pattern(g, d, d) == pytest.approx(20)

    def test_ula_null(self):
        g = ArrayGeometry.ula(16)
        assert beam_pattern(g, Direction(0, 0), Direction(0, math.asin(2 / 16))) < 1e-12

    def test_three_element_value(self):
        g = ArrayGeometry.ula(3)
        d2 = Direction(0, math.asin(1 / 3))
        assert beam_pattern(g, Direction(0, 0), d2) == pytest.approx(2.0, abs=1e-12)
        assert beam_pattern_closed_form(g, Direction(0, 0), d2) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("delta", [0.0, 2.0, -2.0, 4.0, 1e-10, 2 + 1e-10])
    def test_array_factor_singular_points(self, delta):
        explicit = abs(np.sum(np.exp(1j * np.pi * np.arange(7) * delta)))
        assert array_factor(7, delta) == pytest.approx(explicit, abs=1e-9)

    @settings(max_examples=200)
    @given(angles, angles, angles, angles, sizes, sizes)
    def test_properties(self, t1, p1, t2, p2, my, mz):
        g = ArrayGeometry(my, mz)
        d1, d2 = Direction(t1, p1), Direction(t2, p2)
        b = beam_pattern(g, d1, d2)
        assert b == pytest.approx(beam_pattern(g, d2, d1), abs=1e-9)
        assert -1e-12 <= b <= g.size + 1e-9
        assert beam_pattern_closed_form(g, d1, d2) == pytest.approx(b, abs=1e-9)
