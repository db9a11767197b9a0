from __future__ import annotations

import importlib.util
from pathlib import Path

import pytest

from uets import kernels

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_kernels.py"


@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernels not built")
def test_benchmark_runs_and_backends_agree(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    assert bench.main(["--n", "6", "--points", "6", "--repeat", "1"]) == 0
    assert "closure_table" in capsys.readouterr().out
