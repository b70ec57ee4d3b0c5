import pytest

from labcube.context import build_context


@pytest.fixture
def ctx():
    """Fresh default context: shipped catalog, simulated engines."""
    return build_context()
