import pytest

from ncdiff.models import build_glpq, build_quantum_torus


@pytest.fixture(scope="session")
def torus():
    return build_quantum_torus()


@pytest.fixture(scope="session")
def glpq():
    return build_glpq()


@pytest.fixture(scope="session")
def glpq_localized():
    return build_glpq(adjoin_det_inverse=True)
