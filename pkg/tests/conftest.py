import numpy as np
import pytest

from inflacast import fixtures


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Seeded small-scale fixtures shared by slower integration tests."""
    out = tmp_path_factory.mktemp("fixtures")
    fixtures.generate(out, seed=1, scale="small")
    return out
