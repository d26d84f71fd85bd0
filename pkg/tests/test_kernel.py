import math
import warnings

import numpy as np
import pytest

from src.dephasing.kernel import (
    PairGeometry,
    QubitOrientation,
    angular_harmonics,
    antisymmetric_spectrum,
    channel_integrals,
    correlated_spectrum,
    correlated_spectrum_direct,
    harmonic_sum,
    orientation_constants,
    radial_moments,
    swapped,
    weight_even,
    weight_odd,
)
from src.materials.response import synthetic_response
from src.utils.config import NumericsConfig
from src.utils.errors import AliasingWarning, ConsistencyWarning, ParameterError, TruncationWarning
from src.utils.specfun import CONSTANTS, bessel_j

OMEGA = 2.0
PERP = QubitOrientation.perpendicular()


def random_orientation(rng):
    return QubitOrientation(rng.uniform(0.0, math.pi), rng.uniform(0.0, 2.0 * math.pi))


class TestOrientationConstants:
    def test_perpendicular_pair(self):
        c = orientation_constants(PERP, PERP)
        assert c.as_tuple() == (1.0, 0j, 0j, 0j, 0j)

    def test_in_plane_pair(self):
        c = orientation_constants(QubitOrientation.in_plane(0.0), QubitOrientation.in_plane(0.0))
        assert c.k0 == pytest.approx(0.5)
        assert c.k1 == pytest.approx(0.25)
        assert abs(c.k3) == pytest.approx(0.0, abs=1e-16)

    def test_mixed_pair(self):
        c = orientation_constants(QubitOrientation.in_plane(0.0), PERP)
        assert c.k3 == pytest.approx(0.5)
        assert c.k4 == pytest.approx(0.5)
        assert c.k0 == pytest.approx(0.0, abs=1e-16)

    def test_conjugate_pairs(self):
        rng = np.random.default_rng(3)
        c = orientation_constants(random_orientation(rng), random_orientation(rng))
        assert c.k2 == c.k1.conjugate()
        assert c.k4 == c.k3.conjugate()


def test_perpendicular_weights_are_bessel_functions():
    c = orientation_constants(PERP, PERP)
    x = np.linspace(0.0, 30.0, 61)
    for n in (-3, 0, 2, 5):
        assert np.array_equal(weight_even(c, n, x).real, bessel_j(2 * n, x))
        assert np.array_equal(weight_odd(c, n, x).real, bessel_j(2 * n + 1, x))


def test_mixed_odd_weight_at_origin():
    # At x = 0 only the J_0 term survives, so L_-1(0) = K4
    c = orientation_constants(QubitOrientation.in_plane(0.0), PERP)
    assert weight_odd(c, -1, 0.0) == pytest.approx(0.5)
    assert weight_even(c, 0, 0.0) == pytest.approx(0.0, abs=1e-16)


def test_weight_order_limit():
    c = orientation_constants(PERP, PERP)
    with pytest.raises(ParameterError):
        weight_even(c, 32, 1.0)


def test_angular_harmonics_of_known_profile(fourfold_response):
    q = np.array([0.5, 1.0, 2.0])
    spectrum = angular_harmonics(fourfold_response, q, OMEGA, 6, 64)
    assert np.allclose(spectrum.harmonic(0), 2.0 * math.pi * OMEGA * np.exp(-q), rtol=1e-13)
    assert np.allclose(spectrum.harmonic(4), math.pi * 0.5 * OMEGA * np.exp(-q), rtol=1e-13)
    assert np.allclose(spectrum.harmonic(-4), spectrum.harmonic(4), rtol=1e-13)
    # Outside the declared support the harmonic is an exact zero
    assert np.all(spectrum.harmonic(2) == 0.0)
    assert np.all(spectrum.harmonic(5) == 0.0)


def test_angular_harmonics_needs_enough_nodes(fourfold_response):
    with pytest.raises(ParameterError):
        angular_harmonics(fourfold_response, [1.0], OMEGA, 10, 40)


def test_support_edge_warning_only_when_orders_are_cut():
    twofold = synthetic_response(
        "twofold", lambda q, theta: (1.0 + 0.5 * np.cos(2.0 * theta)) * np.exp(-q), symmetry_order=2, inversion_symmetric=True
    )
    with pytest.warns(AliasingWarning):
        angular_harmonics(twofold, [1.0], OMEGA, 2, 32)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        orders, moments = radial_moments(twofold, 1.0, OMEGA, 2, NumericsConfig())
    assert moments[orders.tolist().index(2)] != 0


@pytest.mark.parametrize("fixture_name", ["fourfold_response", "polar_response"])
def test_harmonic_route_matches_direct_quadrature(request, fixture_name):
    response = request.getfixturevalue(fixture_name)
    rng = np.random.default_rng(11)
    reference = abs(correlated_spectrum(response, PairGeometry(1.0, 0.0), PERP, PERP, OMEGA, truncation=12))
    for _ in range(10):
        geom = PairGeometry(1.0, rng.uniform(0.0, 12.0), rng.uniform(0.0, 2.0 * math.pi))
        oi, oj = random_orientation(rng), random_orientation(rng)
        harmonic = correlated_spectrum(response, geom, oi, oj, OMEGA, truncation=12)
        direct = correlated_spectrum_direct(response, geom, oi, oj, OMEGA)
        assert abs(harmonic - direct) <= 1e-6 * max(abs(direct), reference)


def test_antisymmetric_route_matches_direct_quadrature(dipole_response):
    rng = np.random.default_rng(5)
    for _ in range(6):
        geom = PairGeometry(1.0, rng.uniform(0.5, 8.0), rng.uniform(0.0, 2.0 * math.pi))
        oi, oj = random_orientation(rng), random_orientation(rng)
        harmonic = antisymmetric_spectrum(dipole_response, geom, oi, oj, OMEGA, truncation=12)
        direct = correlated_spectrum_direct(dipole_response, geom, oi, oj, OMEGA, odd=True)
        scale = max(abs(direct), abs(correlated_spectrum_direct(dipole_response, geom, PERP, PERP, OMEGA, odd=True)))
        assert abs(harmonic - direct) <= 1e-6 * scale


def test_qubit_exchange_flips_antisymmetric_spectrum(dipole_response):
    geom = PairGeometry(1.0, 3.0, 0.4)
    oi, oj = QubitOrientation(0.7, 0.2), QubitOrientation(1.9, -1.1)
    forward = antisymmetric_spectrum(dipole_response, geom, oi, oj, OMEGA)
    backward = antisymmetric_spectrum(dipole_response, *swapped(geom, oi, oj), OMEGA)
    assert forward != 0.0
    assert backward == pytest.approx(-forward, rel=1e-10)


def test_qubit_exchange_keeps_symmetric_spectrum(polar_response):
    geom = PairGeometry(1.0, 3.0, 0.4)
    oi, oj = QubitOrientation(0.7, 0.2), QubitOrientation(1.9, -1.1)
    forward = correlated_spectrum(polar_response, geom, oi, oj, OMEGA)
    backward = correlated_spectrum(polar_response, *swapped(geom, oi, oj), OMEGA)
    assert backward == pytest.approx(forward, rel=1e-10)


def test_inversion_symmetric_response_has_no_antisymmetric_part(fourfold_response):
    geom = PairGeometry(1.0, 4.0, 0.9)
    oi, oj = QubitOrientation(0.4, 0.1), QubitOrientation(1.2, 2.0)
    assert antisymmetric_spectrum(fourfold_response, geom, oi, oj, OMEGA) == 0.0


def test_identical_coincident_qubits_have_no_antisymmetric_part(polar_response):
    orientation = QubitOrientation(0.8, 0.3)
    assert antisymmetric_spectrum(polar_response, PairGeometry(1.0, 0.0), orientation, orientation, OMEGA) == 0.0


def test_isotropic_spectrum_ignores_pair_angle(isotropic_response):
    values = [correlated_spectrum(isotropic_response, PairGeometry(1.0, 5.0, b), PERP, PERP, OMEGA) for b in (0.0, 0.7, 2.1)]
    assert values[0] == values[1] == values[2]


def test_coincident_perpendicular_pair_equals_single_qubit_spectrum(fourfold_response):
    pair = correlated_spectrum(fourfold_response, PairGeometry(1.0, 0.0, 0.3), PERP, PERP, OMEGA)
    orders, moments = radial_moments(fourfold_response, 1.0, OMEGA, 2, NumericsConfig())
    single = CONSTANTS.mu0 * CONSTANTS.m0**2 / (16.0 * math.pi**2) * moments[orders.tolist().index(0)].real
    assert pair == pytest.approx(single, rel=1e-12)


def test_channel_integrals_layout(polar_response):
    integrals = channel_integrals(polar_response, PairGeometry(1.0, 2.0), PERP, PERP, OMEGA, truncation=3)
    assert integrals.even_orders.tolist() == [-3, -2, -1, 0, 1, 2, 3]
    assert integrals.odd_orders.tolist() == [-4, -3, -2, -1, 0, 1, 2, 3]
    # Only m = 0, +-1 harmonics exist; for perpendicular qubits the even sum is the n = 0 term
    assert abs(integrals.even_value(1)) < 1e-12 * abs(integrals.even_value(0))
    assert integrals.odd_value(0) != 0


def test_slow_decay_raises_truncation_warning():
    orders = np.arange(-2, 3)
    with pytest.warns(TruncationWarning):
        harmonic_sum(orders, np.ones(5, dtype=complex), 0.0, odd=False, label="test")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        harmonic_sum(orders, np.array([0, 0, 1, 0, 0], dtype=complex), 0.0, odd=False, label="test")


def test_geometry_validation():
    with pytest.raises(ParameterError):
        PairGeometry(0.0, 1.0)
    with pytest.raises(ParameterError):
        PairGeometry(1.0, -1.0)


def test_response_length_unit_scales_the_spectrum():
    # Same physics described with the length unit z: J_c depends on z only through z/l
    profile = lambda q, theta: np.exp(-q) * np.ones_like(theta)
    unit = synthetic_response("unit", profile, isotropic=True, inversion_symmetric=True, length_scale=1.0)
    scaled = synthetic_response("scaled", profile, isotropic=True, inversion_symmetric=True, length_scale=2.0)
    a = correlated_spectrum(unit, PairGeometry(1.0, 3.0), PERP, PERP, OMEGA)
    b = correlated_spectrum(scaled, PairGeometry(2.0, 6.0), PERP, PERP, OMEGA)
    assert b == pytest.approx(a / 4.0, rel=1e-12)


def test_closed_sum_skips_the_truncation_check():
    orders = np.arange(-1, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        values = np.array([0.5, 1.0, 0.5], dtype=complex)
        total = harmonic_sum(orders, values, 0.0, odd=False, label="test", alternating=False, check_truncation=False)
    assert total == pytest.approx(2.0)


def test_small_imaginary_residual_is_flagged():
    orders = np.arange(-1, 2)
    values = np.array([0.0, 1.0 + 1e-9j, 0.0])
    with pytest.warns(ConsistencyWarning):
        total = harmonic_sum(orders, values, 0.0, odd=False, label="test")
    assert total == 1.0
