import pytest

from cellray.optics import Media, Medium, Wavelength

# Blue-light cortical operating point used across the suite.
CELL = Medium(n=1.36, mu_a=0.9, mu_s_prime=3.43)
TISSUE = Medium(n=1.35, mu_a=1.34, mu_s_prime=3.43)


@pytest.fixture
def media() -> Media:
    return Media(cell=CELL, tissue=TISSUE)


@pytest.fixture
def lam() -> Wavelength:
    return Wavelength(456.0)
