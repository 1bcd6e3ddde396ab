# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels (RK4 and exact-flow splitting compositions)
for the disordered nonlinear lattice.

Amplitudes are carried as separate real and imaginary float64 arrays so the
site loop stays free of complex-number calls.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite, cos, sin, fabs

cnp.import_array()


cdef inline void _stage(const double* yr, const double* yi,
                        const double* v, const double* a, double g,
                        double* kr, double* ki, Py_ssize_t L) noexcept nogil:
    # yr, yi carry one zero ghost cell on each side (index -1 and L).
    # k = -i [ (v - i a) y - y_{n-1} - y_{n+1} + g |y|^2 y ]
    cdef Py_ssize_t n
    cdef double hr, hi, e, r, i
    for n in range(L):
        r = yr[n]
        i = yi[n]
        e = v[n] + g * (r * r + i * i)
        hr = e * r + a[n] * i - yr[n - 1] - yr[n + 1]
        hi = e * i - a[n] * r - yi[n - 1] - yi[n + 1]
        kr[n] = hi
        ki[n] = -hr


cdef int _advance(double* cr, double* ci, const double* v, const double* a,
                  double g, double dt, Py_ssize_t nsteps, Py_ssize_t L,
                  double* work) noexcept nogil:
    # work layout: padded state (2 x (L+2)), padded stage (2 x (L+2)),
    # slope (2 x L), accumulator (2 x L)
    cdef Py_ssize_t P = L + 2
    cdef double* pr = work + 1
    cdef double* pi = work + P + 1
    cdef double* yr = work + 2 * P + 1
    cdef double* yi = work + 3 * P + 1
    cdef double* kr = work + 4 * P
    cdef double* ki = kr + L
    cdef double* accr = ki + L
    cdef double* acci = accr + L
    cdef Py_ssize_t s, n
    cdef int bad = 0
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    for n in range(4 * P):
        work[n] = 0.0
    for n in range(L):
        pr[n] = cr[n]
        pi[n] = ci[n]
    for s in range(nsteps):
        _stage(pr, pi, v, a, g, kr, ki, L)
        for n in range(L):
            accr[n] = kr[n]
            acci[n] = ki[n]
            yr[n] = pr[n] + h2 * kr[n]
            yi[n] = pi[n] + h2 * ki[n]
        _stage(yr, yi, v, a, g, kr, ki, L)
        for n in range(L):
            accr[n] += 2.0 * kr[n]
            acci[n] += 2.0 * ki[n]
            yr[n] = pr[n] + h2 * kr[n]
            yi[n] = pi[n] + h2 * ki[n]
        _stage(yr, yi, v, a, g, kr, ki, L)
        for n in range(L):
            accr[n] += 2.0 * kr[n]
            acci[n] += 2.0 * ki[n]
            yr[n] = pr[n] + dt * kr[n]
            yi[n] = pi[n] + dt * ki[n]
        _stage(yr, yi, v, a, g, kr, ki, L)
        for n in range(L):
            pr[n] += h6 * (accr[n] + kr[n])
            pi[n] += h6 * (acci[n] + ki[n])
        if not (isfinite(pr[0]) and isfinite(pi[0]) and isfinite(pr[L // 2])):
            bad = <int>s + 1
            break
    for n in range(L):
        cr[n] = pr[n]
        ci[n] = pi[n]
    return bad


def rhs(double[::1] cr, double[::1] ci, const double[::1] v, const double[::1] a, double g):
    """Return the time derivative as (real, imag) arrays."""
    cdef Py_ssize_t L = cr.shape[0]
    if ci.shape[0] != L or v.shape[0] != L or a.shape[0] != L:
        raise ValueError("array length mismatch")
    pad = np.zeros((2, L + 2))
    pad[0, 1:-1] = cr
    pad[1, 1:-1] = ci
    kr = np.empty(L)
    ki = np.empty(L)
    cdef double[:, ::1] p_v = pad
    cdef double[::1] kr_v = kr
    cdef double[::1] ki_v = ki
    _stage(&p_v[0, 1], &p_v[1, 1], &v[0], &a[0], g, &kr_v[0], &ki_v[0], L)
    return kr, ki


def rk4_advance(double[::1] cr, double[::1] ci, const double[::1] v, const double[::1] a,
                double g, double dt, Py_ssize_t nsteps):
    """Advance (cr, ci) in place by ``nsteps`` RK4 steps of size ``dt``.

    Returns 0 on success, otherwise the 1-based index of the step after which
    a non-finite amplitude was first seen.
    """
    cdef Py_ssize_t L = cr.shape[0]
    if ci.shape[0] != L or v.shape[0] != L or a.shape[0] != L:
        raise ValueError("array length mismatch")
    if nsteps <= 0:
        return 0
    cdef double[::1] work = np.empty(4 * (L + 2) + 4 * L)
    cdef int bad
    with nogil:
        bad = _advance(&cr[0], &ci[0], &v[0], &a[0], g, dt, nsteps, L, &work[0])
    return bad


cdef inline void _bonds(double* cr, double* ci, Py_ssize_t first,
                        Py_ssize_t L, double cs, double sn) noexcept nogil:
    # exact hopping flow on disjoint bonds (j, j+1), j = first, first+2, ...
    cdef Py_ssize_t j
    cdef double ar, ai, br, bi
    j = first
    while j + 1 < L:
        ar = cr[j]
        ai = ci[j]
        br = cr[j + 1]
        bi = ci[j + 1]
        cr[j] = cs * ar - sn * bi
        ci[j] = cs * ai + sn * br
        cr[j + 1] = cs * br - sn * ai
        ci[j + 1] = cs * bi + sn * ar
        j += 2


cdef double _S1 = -1.66666666666666324348e-01
cdef double _S2 = 8.33333333332248946124e-03
cdef double _S3 = -1.98412698298579493134e-04
cdef double _S4 = 2.75573137070700676789e-06
cdef double _S5 = -2.50507602534068634195e-08
cdef double _S6 = 1.58969099521155010221e-10
cdef double _C1 = 4.16666666666666019037e-02
cdef double _C2 = -1.38888888888741095749e-03
cdef double _C3 = 2.48015872894767294178e-05
cdef double _C4 = -2.75573143513906633035e-07
cdef double _C5 = 2.08757232129817482790e-09
cdef double _C6 = -1.13596475577881948265e-11
cdef double _INV_PIO2 = 6.36619772367581382433e-01
cdef double _PIO2_HI = 1.57079632673412561417e+00
cdef double _PIO2_LO = 6.07710050650619224932e-11


cdef double _SHIFT = 6755399441055744.0  # 1.5 * 2^52


cdef inline void _sincos(double x, double* s, double* c) noexcept nogil:
    # Branch-free so the on-site loop vectorizes: x = r + k pi/2 with
    # |r| <= pi/4, minimax polynomials on r, then multiply by i^k written as
    # (-1)^h i^o with k = 2h + o. Rounding uses the 1.5 * 2^52 shift.
    # Accurate to ~1 ulp for |x| < 1e5.
    cdef double fn, r, z, ps, pc, hz, w, h, o, hh, sg, keep
    fn = (x * _INV_PIO2 + _SHIFT) - _SHIFT
    r = (x - fn * _PIO2_HI) - fn * _PIO2_LO
    z = r * r
    ps = r + z * r * (_S1 + z * (_S2 + z * (_S3 + z * (_S4 + z * (_S5 + z * _S6)))))
    hz = 0.5 * z
    w = 1.0 - hz
    pc = w + (((1.0 - w) - hz) + z * z * (_C1 + z * (_C2 + z * (_C3 + z * (_C4 + z * (_C5 + z * _C6))))))
    h = (0.5 * fn + _SHIFT) - _SHIFT
    o = fn - 2.0 * h
    hh = h - 2.0 * ((0.5 * h + _SHIFT) - _SHIFT)
    sg = 1.0 - 2.0 * hh * hh
    keep = 1.0 - o * o
    c[0] = sg * (pc * keep - ps * o)
    s[0] = sg * (ps * keep + pc * o)


def sincos(double x):
    """Expose the inline sine/cosine for accuracy tests."""
    cdef double s, c
    _sincos(x, &s, &c)
    return s, c


cdef inline void _onsite(double* cr, double* ci, const double* v, double g,
                         double tau, Py_ssize_t L) noexcept nogil:
    # exact on-site flow: |c_n| is conserved, phase advances by (v_n + g|c_n|^2) tau
    cdef Py_ssize_t n
    cdef double r, i, ph, cs, sn
    for n in range(L):
        r = cr[n]
        i = ci[n]
        ph = (v[n] + g * (r * r + i * i)) * tau
        _sincos(ph, &sn, &cs)
        cr[n] = cs * r + sn * i
        ci[n] = cs * i - sn * r


cdef inline void _rotate(double* cr, double* ci, const double* rc,
                         const double* rs, Py_ssize_t L) noexcept nogil:
    # linear on-site flow with precomputed cos/sin of v_n tau
    cdef Py_ssize_t n
    cdef double r, i
    for n in range(L):
        r = cr[n]
        i = ci[n]
        cr[n] = rc[n] * r + rs[n] * i
        ci[n] = rc[n] * i - rs[n] * r


cdef inline void _absorb(double* cr, double* ci, const double* decay,
                         Py_ssize_t L) noexcept nogil:
    cdef Py_ssize_t n
    for n in range(L):
        cr[n] *= decay[n]
        ci[n] *= decay[n]


def compose_advance(double[::1] cr, double[::1] ci, const double[::1] v, const double[::1] a,
                    double g, double dt, Py_ssize_t nsteps, const double[::1] weights):
    """Advance (cr, ci) in place by ``nsteps`` composition steps.

    One step chains symmetric even-bond / odd-bond / on-site splittings of
    lengths ``weights[k] * dt`` (merging adjacent even-bond halves), every
    sub-flow solved exactly, framed by two half-step exact absorber decays.
    The unitary part conserves the norm to round-off; the absorber can only
    remove it. Returns 0, or the 1-based step at which amplitudes went non-finite.
    """
    cdef Py_ssize_t L = cr.shape[0]
    if ci.shape[0] != L or v.shape[0] != L or a.shape[0] != L:
        raise ValueError("array length mismatch")
    cdef Py_ssize_t m = weights.shape[0]
    if m < 1:
        raise ValueError("need at least one composition weight")
    if nsteps <= 0:
        return 0
    tau_np = np.asarray(weights) * dt
    half = np.concatenate(([0.0], 0.5 * tau_np, [0.0]))
    even_t = half[:m + 1] + half[1:]
    cdef double[::1] tau = tau_np
    cdef double[::1] ecs = np.cos(even_t), esn = np.sin(even_t)
    cdef double[::1] ocs = np.cos(0.5 * tau_np), osn = np.sin(0.5 * tau_np)
    decay_arr = np.exp(-0.5 * dt * np.asarray(a))
    cdef double[::1] decay = decay_arr
    vt = np.asarray(v)[None, :] * tau_np[:, None]
    cdef double[:, ::1] rot_c = np.ascontiguousarray(np.cos(vt))
    cdef double[:, ::1] rot_s = np.ascontiguousarray(np.sin(vt))
    cdef int linear = g == 0.0
    cdef int use_abs = bool(np.any(np.asarray(a) != 0.0))
    cdef Py_ssize_t s, k
    cdef int bad = 0
    cdef double* pr = &cr[0]
    cdef double* pi = &ci[0]
    with nogil:
        for s in range(nsteps):
            if use_abs:
                _absorb(pr, pi, &decay[0], L)
            _bonds(pr, pi, 0, L, ecs[0], esn[0])
            for k in range(m):
                _bonds(pr, pi, 1, L, ocs[k], osn[k])
                if linear:
                    _rotate(pr, pi, &rot_c[k, 0], &rot_s[k, 0], L)
                else:
                    _onsite(pr, pi, &v[0], g, tau[k], L)
                _bonds(pr, pi, 1, L, ocs[k], osn[k])
                _bonds(pr, pi, 0, L, ecs[k + 1], esn[k + 1])
            if use_abs:
                _absorb(pr, pi, &decay[0], L)
            if not (isfinite(pr[0]) and isfinite(pi[0]) and isfinite(pr[L // 2])):
                bad = <int>s + 1
                break
    return bad


_CBRT2 = 2.0 ** (1.0 / 3.0)
# Yoshida triple jump (order 4)
SPLIT4_WEIGHTS = np.array([1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2)])
# Yoshida 7-stage solution A (order 6); the middle weight restores sum = 1
_Y = (0.784513610477560, 0.235573213359357, -1.17767998417887)
SPLIT6_WEIGHTS = np.array(_Y + (1.0 - 2.0 * sum(_Y),) + _Y[::-1])


def split4_advance(double[::1] cr, double[::1] ci, const double[::1] v, const double[::1] a,
                   double g, double dt, Py_ssize_t nsteps):
    """Fourth-order composition step (see compose_advance)."""
    return compose_advance(cr, ci, v, a, g, dt, nsteps, SPLIT4_WEIGHTS)


def split6_advance(double[::1] cr, double[::1] ci, const double[::1] v, const double[::1] a,
                   double g, double dt, Py_ssize_t nsteps):
    """Sixth-order composition step (see compose_advance)."""
    return compose_advance(cr, ci, v, a, g, dt, nsteps, SPLIT6_WEIGHTS)
