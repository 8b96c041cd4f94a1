import functools

import pytest

from subheat.geometry import ModelSpec, build_model, cc_distance_matrix
from subheat.operators import assemble_operator, spectral_decompose


@functools.lru_cache(maxsize=None)
def model(text: str):
    geom = build_model(ModelSpec.parse(text))
    return geom, cc_distance_matrix(geom)


@functools.lru_cache(maxsize=None)
def spectral(text: str, kind: str = "sublaplacian"):
    geom, _ = model(text)
    return spectral_decompose(assemble_operator(geom, kind))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBHEAT_CACHE_DIR", str(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance as acc

    if acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for i in sorted(acc.RESULTS):
            terminalreporter.write_line(acc.line(i))
