import pytest

from softpu import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile the jitted kernels once so timed tests measure the algorithms,
    not the JIT."""
    kernels.warmup()
