import random

import pytest

from anoncrowd.group import production_group, tiny_group


@pytest.fixture(scope="session")
def prod():
    """Production curve backend, shared per session (table reuse)."""
    return production_group()


@pytest.fixture(scope="session")
def tiny():
    """Brute-forceable oracle backend."""
    return tiny_group()


@pytest.fixture()
def rng():
    return random.Random(0xC0FFEE)
