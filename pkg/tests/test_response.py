import math

import numpy as np
import pytest

from src.materials.magnet import MagParams, magnet_response
from src.materials.response import ResponseField, synthetic_response, tabulated_response, verify_symmetry
from src.utils.errors import ParameterError


def test_wrong_symmetry_declaration_is_rejected():
    with pytest.raises(ParameterError, match="violates"):
        synthetic_response("lopsided", lambda q, theta: (1.0 + 0.3 * np.cos(theta)) * np.exp(-q), symmetry_order=4)


def test_false_inversion_claim_is_rejected():
    with pytest.raises(ParameterError):
        synthetic_response("lopsided", lambda q, theta: (1.0 + 0.3 * np.cos(theta)) * np.exp(-q), inversion_symmetric=True)


def test_declared_symmetry_passes(fourfold_response):
    assert verify_symmetry(fourfold_response) < 1e-12


def test_harmonic_support_of_declared_responses(fourfold_response, polar_response, isotropic_response):
    assert fourfold_response.harmonic_support(9).tolist() == [-8, -4, 0, 4, 8]
    assert polar_response.harmonic_support(2).tolist() == [-2, -1, 0, 1, 2]
    assert isotropic_response.harmonic_support(6).tolist() == [0]


def test_neel_factor_widens_support():
    antiferro = magnet_response(MagParams(), temperature=50.0)
    alter = magnet_response(MagParams(d2_over_d0=0.5), temperature=50.0)
    assert antiferro.harmonic_support(8).tolist() == [-2, 0, 2]
    assert alter.harmonic_support(8).tolist() == [-8, -6, -4, -2, 0, 2, 4, 6, 8]


def test_table_matches_pointwise_evaluation(polar_response):
    q = np.array([0.1, 1.0, 3.0])
    theta = np.linspace(0.0, 2.0 * math.pi, 7, endpoint=False)
    table = polar_response.table(q, theta, 2.0)
    assert table.shape == (3, 7)
    assert table[1, 2] == pytest.approx(2.0 * (1.0 + 0.3 * math.cos(theta[2])) * math.exp(-1.0))


def test_si_restoration():
    field = ResponseField(
        name="scaled",
        evaluator=lambda q, theta, omega: omega * np.exp(-q) * np.ones_like(theta),
        isotropic=True,
        inversion_symmetric=True,
        length_scale=2e-6,
        frequency_scale=1e3,
        scale=5.0,
    )
    value = field.evaluate_si(1e6, 0.3, 4e3)
    assert value == pytest.approx(5.0 * 4.0 * math.exp(-2.0))


def test_reference_time_requires_a_hook(isotropic_response):
    with pytest.raises(ParameterError):
        isotropic_response.reference_time(1e-8)


def test_invalid_scales_are_rejected():
    with pytest.raises(ParameterError):
        synthetic_response("bad", lambda q, theta: q * 0.0 + theta * 0.0, length_scale=0.0)


class TestTabulated:
    def grid(self):
        q = np.linspace(0.0, 2.0, 5)
        theta = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
        values = np.exp(-q)[:, None] * (1.0 + 0.25 * np.cos(2.0 * theta))[None, :]
        return q, theta, values

    def test_exact_at_nodes_and_scaled_by_omega(self):
        q, theta, values = self.grid()
        field = tabulated_response(q, theta, values, symmetry_order=2)
        assert field(q[2], theta[3], 3.0) == pytest.approx(3.0 * values[2, 3])

    def test_theta_wraps_periodically(self):
        q, theta, values = self.grid()
        field = tabulated_response(q, theta, values, symmetry_order=2)
        assert field(q[1], theta[1] + 2.0 * math.pi, 1.0) == pytest.approx(values[1, 1])
        # Between the last node and 2 pi the interpolant closes onto the first column
        midpoint = 0.5 * (theta[-1] + 2.0 * math.pi)
        assert field(q[1], midpoint, 1.0) == pytest.approx(0.5 * (values[1, -1] + values[1, 0]))

    def test_zero_outside_tabulated_momenta(self):
        q, theta, values = self.grid()
        field = tabulated_response(q, theta, values, symmetry_order=2)
        assert field(5.0, 0.0, 1.0) == 0.0

    def test_shape_and_ordering_checks(self):
        q, theta, values = self.grid()
        with pytest.raises(ParameterError):
            tabulated_response(q, theta, values[:, :-1])
        with pytest.raises(ParameterError):
            tabulated_response(q[::-1], theta, values)
