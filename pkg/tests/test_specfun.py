import math

import numpy as np
import pytest
from scipy import special
from scipy.integrate import trapezoid

from src.utils.errors import ParameterError
from src.utils.specfun import (
    CONSTANTS,
    MAX_BESSEL_ORDER,
    bessel_j,
    bessel_table,
    fermi_derivative,
    fermi_occupation,
    fermi_occupation_derivative,
    thermal_coth,
)


@pytest.mark.parametrize("order", [1, 2, 5, 16, 33])
def test_negative_orders_follow_reflection(order):
    x = np.linspace(0.0, 40.0, 81)
    assert np.array_equal(bessel_j(-order, x), (-1) ** order * bessel_j(order, x))


def test_bessel_matches_scipy_and_origin():
    x = np.array([0.0, 0.3, 2.0, 17.5])
    assert np.allclose(bessel_j(3, x), special.jv(3, x), rtol=1e-14, atol=0)
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(7, 0.0) == 0.0


def test_bessel_table_rows_are_orders():
    x = np.linspace(0.0, 12.0, 25)
    table = bessel_table(6, x)
    assert table.shape == (13, 25)
    for m in range(-6, 7):
        assert np.allclose(table[m + 6], bessel_j(m, x), rtol=1e-14, atol=1e-300)


def test_bessel_rejects_large_order_and_bad_arguments():
    with pytest.raises(ParameterError):
        bessel_j(MAX_BESSEL_ORDER + 1, 1.0)
    with pytest.raises(ParameterError):
        bessel_table(MAX_BESSEL_ORDER + 1, 1.0)
    with pytest.raises(ParameterError):
        bessel_j(2, np.array([1.0, np.inf]))


def test_thermal_coth_branches():
    temperature = 4.0
    kt_over_hbar = CONSTANTS.kB * temperature / CONSTANTS.hbar
    tiny = 1e-9 * kt_over_hbar
    assert thermal_coth(tiny, temperature) == pytest.approx(2.0 * kt_over_hbar / tiny, rel=1e-12)

    moderate = 2.0 * kt_over_hbar
    assert thermal_coth(moderate, temperature) == pytest.approx(1.0 / math.tanh(1.0), rel=1e-12)
    # hbar omega >> kB T: zero-point limit
    assert thermal_coth(200.0 * kt_over_hbar, temperature) == pytest.approx(1.0, abs=1e-12)


def test_thermal_coth_rejects_non_positive_input():
    with pytest.raises(ParameterError):
        thermal_coth(0.0, 1.0)
    with pytest.raises(ParameterError):
        thermal_coth(1.0, 0.0)


def test_fermi_functions():
    x = np.linspace(-30.0, 30.0, 121)
    occupation = fermi_occupation(x)
    assert np.allclose(occupation + fermi_occupation(-x), 1.0)
    assert fermi_occupation_derivative(0.0) == pytest.approx(0.25)
    assert np.allclose(fermi_occupation_derivative(x), fermi_occupation_derivative(-x))
    # Normalized: int -dn_F/dx dx = 1
    assert trapezoid(fermi_occupation_derivative(x), x) == pytest.approx(1.0, rel=1e-6)


def test_fermi_derivative_is_in_inverse_joules():
    temperature = 10.0
    kt = CONSTANTS.kB * temperature
    assert fermi_derivative(0.0, temperature) == pytest.approx(0.25 / kt)
