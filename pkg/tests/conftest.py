import functools

import pytest

from czweights.construct import BuildParams, build


@functools.lru_cache(maxsize=None)
def built(N: int, **kw):
    return build(BuildParams(N, **kw))


@pytest.fixture(scope="session")
def construction():
    """Cached builds keyed by N with default parameters."""
    return built
