import pytest
from hypothesis import HealthCheck, settings

from hlab.finitemodels import make_cyclic_group, make_prime_field, primes_in

settings.register_profile(
    "lab",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def gf7():
    return make_prime_field(7)


@pytest.fixture(scope="session")
def gf11():
    return make_prime_field(11)


@pytest.fixture(scope="session")
def z13():
    return make_cyclic_group(13)


@pytest.fixture(scope="session")
def small_prime_family():
    """GF(p) for odd primes up to 47; shared by profiling tests."""
    return [make_prime_field(p) for p in primes_in(3, 47)]
