import os
import subprocess
import sys

import numpy as np
import pytest

from danse import kernels
from danse.model import AbsorberSpec, absorber_profile

py = kernels.get_backend("python")
try:
    cc = kernels.get_backend("compiled")
except ImportError:
    cc = None
needs_compiled = pytest.mark.skipif(cc is None, reason="compiled kernels not built")


def inputs(L, W=4.0, seed=3):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=L) + 1j * rng.normal(size=L)
    c /= np.linalg.norm(c)
    v = rng.uniform(-W / 2, W / 2, L)
    a = absorber_profile(AbsorberSpec(), L) if L > 21 else np.zeros(L)
    return c, v, a


def advance(mod, integ, c, v, a, g, dt, n):
    cr, ci = c.real.copy(), c.imag.copy()
    code = getattr(mod, f"{integ}_advance")(cr, ci, v, a, g, dt, n)
    return code, cr + 1j * ci


@needs_compiled
@pytest.mark.parametrize("L", [1, 2, 3, 4, 101])
@pytest.mark.parametrize("g", [0.0, 10.0])
@pytest.mark.parametrize("integ", ["split6", "split4", "rk4"])
def test_backends_agree(integ, g, L):
    c, v, a = inputs(L)
    c1, out_py = advance(py, integ, c, v, a, g, 0.01, 200)
    c2, out_cc = advance(cc, integ, c, v, a, g, 0.01, 200)
    assert c1 == c2 == 0
    assert np.max(np.abs(out_py - out_cc)) < 1e-12


@needs_compiled
def test_rhs_agrees():
    c, v, a = inputs(101)
    for g in (0.0, 7.5):
        r1 = py.rhs(c.real.copy(), c.imag.copy(), v, a, g)
        r2 = cc.rhs(c.real.copy(), c.imag.copy(), v, a, g)
        assert np.allclose(r1[0], r2[0], rtol=0, atol=1e-15)
        assert np.allclose(r1[1], r2[1], rtol=0, atol=1e-15)


@needs_compiled
def test_compiled_sincos():
    rng = np.random.default_rng(0)
    xs = np.r_[0.0, -0.0, np.pi / 4, np.pi, 1e-300, rng.uniform(-1e3, 1e3, 20_000)]
    err = max(max(abs(s - np.sin(x)), abs(c - np.cos(x))) for x in xs for s, c in [cc.sincos(x)])
    assert err < 5e-16


@pytest.mark.parametrize("mod", [py] + ([cc] if cc else []), ids=lambda m: m.__name__)
def test_divergence_reported(mod):
    c, v, a = inputs(11)
    c[3] = np.inf
    for integ in ("rk4", "split6"):
        code, _ = advance(mod, integ, c, v, a, 1.0, 0.01, 5)
        assert code >= 1


@pytest.mark.parametrize("mod", [py] + ([cc] if cc else []), ids=lambda m: m.__name__)
def test_length_mismatch(mod):
    c, v, a = inputs(11)
    with pytest.raises(ValueError):
        mod.split6_advance(c.real.copy(), c.imag.copy(), v[:5], a, 0.0, 0.01, 1)


def test_zero_steps_noop():
    c, v, a = inputs(11)
    for integ in ("rk4", "split4", "split6"):
        code, out = advance(py, integ, c, v, a, 1.0, 0.01, 0)
        assert code == 0 and np.array_equal(out, c)


def test_composition_weights():
    for w in (py.SPLIT4_WEIGHTS, py.SPLIT6_WEIGHTS):
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.array_equal(w, w[::-1])
    # third-power condition of the 4th-order triple jump
    assert np.sum(py.SPLIT4_WEIGHTS ** 3) == pytest.approx(0.0, abs=1e-14)


def backend_in_subprocess(value):
    env = dict(os.environ, DANSE_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from danse import kernels; print(kernels.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_backend_env():
    r = backend_in_subprocess("python")
    assert r.returncode == 0 and r.stdout.strip() == "python"
    r = backend_in_subprocess("fortran")
    assert r.returncode != 0 and "DANSE_BACKEND" in r.stderr
    if cc is not None:
        assert backend_in_subprocess("compiled").stdout.strip() == "compiled"
        assert kernels.BACKEND == "compiled"
