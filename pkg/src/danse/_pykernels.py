"""Pure numpy implementations of the propagation kernels.

Same algorithms and call signatures as the compiled ``_kernels`` module; used
when the extension is unavailable or ``DANSE_BACKEND=python`` is set.
"""

import numpy as np

_CBRT2 = 2.0 ** (1.0 / 3.0)
SPLIT4_WEIGHTS = np.array([1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2)])
_Y = (0.784513610477560, 0.235573213359357, -1.17767998417887)
SPLIT6_WEIGHTS = np.array(_Y + (1.0 - 2.0 * sum(_Y),) + _Y[::-1])


def _check(cr, ci, v, a):
    L = cr.shape[0]
    if ci.shape[0] != L or v.shape[0] != L or a.shape[0] != L:
        raise ValueError("array length mismatch")


def _slope(c, v, a, g):
    h = (v - 1j * a + g * (c.real**2 + c.imag**2)) * c
    h[1:] -= c[:-1]
    h[:-1] -= c[1:]
    return -1j * h


def rhs(cr, ci, v, a, g):
    _check(cr, ci, v, a)
    k = _slope(np.asarray(cr) + 1j * np.asarray(ci), np.asarray(v), np.asarray(a), g)
    return k.real.copy(), k.imag.copy()


def _finish(cr, ci, c, bad):
    cr[:] = c.real
    ci[:] = c.imag
    return bad


@np.errstate(invalid="ignore", over="ignore")
def rk4_advance(cr, ci, v, a, g, dt, nsteps):
    _check(cr, ci, v, a)
    if nsteps <= 0:
        return 0
    v = np.asarray(v)
    a = np.asarray(a)
    c = cr + 1j * ci
    h2 = 0.5 * dt
    for s in range(nsteps):
        k1 = _slope(c, v, a, g)
        k2 = _slope(c + h2 * k1, v, a, g)
        k3 = _slope(c + h2 * k2, v, a, g)
        k4 = _slope(c + dt * k3, v, a, g)
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(c).all():
            return _finish(cr, ci, c, s + 1)
    return _finish(cr, ci, c, 0)


def _bonds(c, first, cs, sn):
    stop = c.shape[0] - (c.shape[0] - first) % 2
    left = c[first:stop:2].copy()
    right = c[first + 1:stop:2]
    c[first:stop:2] = cs * left + 1j * sn * right
    c[first + 1:stop:2] = 1j * sn * left + cs * right


@np.errstate(invalid="ignore", over="ignore")
def compose_advance(cr, ci, v, a, g, dt, nsteps, weights):
    _check(cr, ci, v, a)
    if nsteps <= 0:
        return 0
    v = np.asarray(v)
    a = np.asarray(a)
    tau = np.asarray(weights, dtype=float) * dt
    half = np.concatenate(([0.0], 0.5 * tau, [0.0]))
    even_t = half[:-1] + half[1:]
    even = [(np.cos(x), np.sin(x)) for x in even_t]
    odd = [(np.cos(0.5 * x), np.sin(0.5 * x)) for x in tau]
    decay = np.exp(-0.5 * dt * a)
    use_abs = bool(np.any(a != 0.0))
    linear = g == 0.0
    rot = [np.exp(-1j * v * x) for x in tau]
    c = cr + 1j * ci
    for s in range(nsteps):
        if use_abs:
            c *= decay
        _bonds(c, 0, *even[0])
        for k in range(tau.size):
            _bonds(c, 1, *odd[k])
            if linear:
                c *= rot[k]
            else:
                c *= np.exp(-1j * (v + g * (c.real**2 + c.imag**2)) * tau[k])
            _bonds(c, 1, *odd[k])
            _bonds(c, 0, *even[k + 1])
        if use_abs:
            c *= decay
        if not np.isfinite(c).all():
            return _finish(cr, ci, c, s + 1)
    return _finish(cr, ci, c, 0)


def split4_advance(cr, ci, v, a, g, dt, nsteps):
    return compose_advance(cr, ci, v, a, g, dt, nsteps, SPLIT4_WEIGHTS)


def split6_advance(cr, ci, v, a, g, dt, nsteps):
    return compose_advance(cr, ci, v, a, g, dt, nsteps, SPLIT6_WEIGHTS)


def sincos(x):
    return float(np.sin(x)), float(np.cos(x))
