"""Dormand-Prince 5(4) stepping loop and the compiled mass-action right-hand side.

``advance`` is plain Python written in the numpy subset numba understands; it
runs compiled against :func:`mass_action_rhs` and interpreted against any
Python callable with the same ``(t, X, params)`` signature.
"""

import numpy as np
from numba import njit

RUNNING, REACHED, STEADY, POSITIVITY_FAILURE, STEP_FAILURE = -1, 0, 1, 2, 3

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus embedded fourth-order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


def advance(f, params, t, t_stop, X, k1, dt, rtol, atol, dt_min, dt_max, floor, steady_tol, max_steps):
    """Step from ``t`` towards ``t_stop``.

    ``k1`` must hold ``f(t, X)``.  Steps whose result has an entry at or
    below ``floor`` (or a non-finite entry) are retried at half the step.
    Stops early when ``max|f| <= steady_tol`` after an accepted step.

    Returns ``(t, X, k1, dt, status, accepted, rejected)``.
    """
    accepted = 0
    rejected = 0
    status = RUNNING
    while status == RUNNING:
        remaining = t_stop - t
        if remaining <= 0.0:
            status = REACHED
            break
        if accepted + rejected >= max_steps:
            status = STEP_FAILURE
            break
        h = dt
        last = False
        if h >= remaining * (1.0 - 1e-12):
            h = remaining
            last = True
        k2 = f(t + C2 * h, X + h * (A21 * k1), params)
        k3 = f(t + C3 * h, X + h * (A31 * k1 + A32 * k2), params)
        k4 = f(t + C4 * h, X + h * (A41 * k1 + A42 * k2 + A43 * k3), params)
        k5 = f(t + C5 * h, X + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), params)
        k6 = f(t + h, X + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), params)
        Y = X + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        ok = np.all(np.isfinite(Y)) and np.min(Y) > floor
        if ok:
            k7 = f(t + h, Y, params)
            ok = np.all(np.isfinite(k7))
        if not ok:
            rejected += 1
            dt = 0.5 * h
            if dt < dt_min:
                status = POSITIVITY_FAILURE
            continue
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(X), np.abs(Y))
        en = np.sqrt(np.mean((err / scale) ** 2))
        if not np.isfinite(en):
            rejected += 1
            dt = 0.5 * h
            if dt < dt_min:
                status = STEP_FAILURE
            continue
        if en > 1.0:
            rejected += 1
            dt = h * max(0.2, 0.9 * en ** -0.2)
            if dt < dt_min:
                status = STEP_FAILURE
            continue
        t = t_stop if last else t + h
        X = Y
        k1 = k7
        accepted += 1
        grow = 5.0 if en == 0.0 else min(5.0, 0.9 * en ** -0.2)
        dt_new = h * grow
        if last:
            dt_new = max(dt, dt_new)
        dt = min(dt_max, max(dt_min, dt_new))
        if np.max(np.abs(k1)) <= steady_tol:
            status = STEADY
    return t, X, k1, dt, status, accepted, rejected


advance_compiled = njit(cache=True)(advance)


@njit(cache=True)
def mass_action_rhs(t, X, params):
    """Closed/open compartmental field with constant diffusion.

    ``params = (indptr, indices, data, inject, Z, B, S, kappa, inv_xstar)``
    where the CSR triple is the linear diffusion operator acting on ``X`` and
    ``inject`` the constant boundary source term.  ``Z`` is integer, so the
    complex monomials are plain products.
    """
    indptr, indices, data, inject, Z, B, S, kappa, inv_xs = params
    n = X.size
    m = inv_xs.size
    c = Z.shape[1]
    r = B.shape[1]
    out = np.empty(n)
    for row in range(n):
        acc = inject[row]
        for p in range(indptr[row], indptr[row + 1]):
            acc += data[p] * X[indices[p]]
        out[row] = acc
    if r == 0:
        return out
    y = np.empty(m)
    mono = np.empty(c)
    flux = np.empty(r)
    for j in range(n // m):
        base = j * m
        for i in range(m):
            y[i] = X[base + i] * inv_xs[i]
        for q in range(c):
            g = 1.0
            for i in range(m):
                for _ in range(Z[i, q]):
                    g *= y[i]
            mono[q] = g
        for s in range(r):
            acc = 0.0
            for q in range(c):
                if B[q, s] != 0.0:
                    acc += B[q, s] * mono[q]
            flux[s] = -kappa[s] * acc
        for i in range(m):
            acc = 0.0
            for s in range(r):
                acc += S[i, s] * flux[s]
            out[base + i] += acc
    return out
