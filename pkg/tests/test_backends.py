"""Compiled extension vs pure NumPy backend equivalence."""

import numpy as np
import pytest

from gossipmap import _backend, _purepy

try:
    from gossipmap import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(_core is None,
                                    reason="compiled extension not built")


def test_backend_selected():
    import os
    assert _backend.BACKEND in ("compiled", "python")
    forced = os.environ.get("GOSSIPMAP_BACKEND", "")
    if forced:
        assert _backend.BACKEND == forced
    elif _core is not None:
        assert _backend.BACKEND == "compiled"


@needs_compiled
def test_rbf_gram_agrees():
    rng = np.random.RandomState(0)
    for _ in range(20):
        a = rng.uniform(-5, 5, (rng.randint(1, 40), 2))
        b = rng.uniform(-5, 5, (rng.randint(1, 40), 2))
        c = float(rng.uniform(0.5, 2.0))
        l = float(rng.uniform(0.05, 1.0))
        ga = _core.rbf_gram(a, b, c, l)
        gb = _purepy.rbf_gram(a, b, c, l)
        assert np.allclose(ga, gb, rtol=1e-13, atol=1e-15)


@needs_compiled
def test_frame_samples_identical():
    rng = np.random.RandomState(1)
    for _ in range(30):
        nb = rng.randint(2, 50)
        pts = rng.uniform(-4, 4, (nb, 2))
        valid = (rng.rand(nb) > 0.2).astype(np.uint8)
        args = (pts, valid, float(rng.uniform(-2, 2)),
                float(rng.uniform(-2, 2)), 0.5, 0.1,
                int(rng.randint(1, 3)), float(rng.uniform(0.3, 6.0)))
        ca = _core.frame_samples(*args)
        pa = _purepy.frame_samples(*args)
        for x, y in zip(ca, pa):
            assert x.dtype == y.dtype
            assert np.array_equal(x, y)   # bitwise, geometry only


@needs_compiled
def test_frame_samples_empty_inputs():
    empty = np.empty((0, 2))
    no_valid = np.empty(0, dtype=np.uint8)
    for mod in (_core, _purepy):
        ix, iy, val = mod.frame_samples(empty, no_valid, 0.0, 0.0,
                                        0.5, 0.1, 1, 0.5)
        assert len(ix) == len(iy) == len(val) == 0


def test_python_backend_forced():
    # the env override is honored on a fresh import
    import subprocess
    import sys
    code = ("import os; os.environ['GOSSIPMAP_BACKEND']='python'; "
            "import gossipmap; print(gossipmap.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code],
                         capture_output=True, text=True)
    assert out.stdout.strip() == "python"
