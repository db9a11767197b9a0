from __future__ import annotations

import pytest

from uets import kernels


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    mod = kernels.BACKENDS[request.param]
    monkeypatch.setattr(kernels, "_module", lambda _backend, _largest: mod)
    return request.param
