from __future__ import annotations

import pytest

from avguard.pipeline.corpus import corpus_package


@pytest.fixture(scope="session")
def corpus():
    """Parsed corpus packages keyed by name, loaded once."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = corpus_package(name)
        return cache[name]

    return get
