"""Compiled inner loops for the online learners and the SGD solver."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def perceptron_loop(F, y, order, max_epochs, predict_trigger, trace_cap):
    """Cyclic perceptron over features ``F``; the update is ``w += y_i F_i``.

    Mistake when ``y⟨w, f⟩ <= 0`` or, with ``predict_trigger``, when
    ``sgn(⟨w, f⟩) != y`` using ``sgn(0) = +1``.
    Returns ``(w, updates, epochs, converged, trace, n_trace)``.
    """
    n, d = F.shape
    w = np.zeros(d)
    trace = np.empty((trace_cap, 2), dtype=np.int64)
    n_trace = 0
    updates = 0
    epochs = 0
    converged = False
    for _ in range(max_epochs):
        epochs += 1
        mistakes = 0
        for k in range(n):
            i = order[k]
            m = 0.0
            for j in range(d):
                m += w[j] * F[i, j]
            if predict_trigger:
                pred = 1 if m >= 0.0 else -1
                wrong = pred != y[i]
            else:
                wrong = y[i] * m <= 0.0
            if wrong:
                for j in range(d):
                    w[j] += y[i] * F[i, j]
                if n_trace < trace_cap:
                    trace[n_trace, 0] = (epochs - 1) * n + k
                    trace[n_trace, 1] = i
                    n_trace += 1
                updates += 1
                mistakes += 1
        if mistakes == 0:
            converged = True
            break
    return w, updates, epochs, converged, trace, n_trace


@njit(cache=True, nogil=True)
def next_mistake(Z, y, order, start, u, comp, tol, predict_trigger):
    """First position ``k >= start`` in ``order`` where the second-order
    learner errs, or -1.

    The margin is ``⟨u, z⟩`` when ``z`` lies in the span of past mistakes and
    exactly 0 otherwise; ``comp`` holds an orthonormal basis of the
    complement of that span (zero columns once it is full rank).
    """
    n, d = Z.shape
    m_comp = comp.shape[1]
    for k in range(start, n):
        i = order[k]
        m = 0.0
        for j in range(d):
            m += u[j] * Z[i, j]
        if m_comp > 0:
            r2 = 0.0
            z2 = 0.0
            for c in range(m_comp):
                s = 0.0
                for j in range(d):
                    s += comp[j, c] * Z[i, j]
                r2 += s * s
            for j in range(d):
                z2 += Z[i, j] * Z[i, j]
            if r2 > tol * tol * z2:
                m = 0.0
        if predict_trigger:
            pred = 1 if m >= 0.0 else -1
            if pred != y[i]:
                return k
        elif y[i] * m <= 0.0:
            return k
    return -1


@njit(cache=True, nogil=True)
def sgd_steps(V, y, idx, w, t0, nc, lr_offset):
    """Run ``len(idx)`` single-sample hinge SGD steps in place on ``w``.

    Step ``t`` uses gradient ``w - nc·y·v`` when the hinge is active
    (``1 - y⟨v, w⟩ >= 0``) and ``w`` otherwise, with step size
    ``1/(t + lr_offset)``.
    """
    d = V.shape[1]
    for s in range(idx.shape[0]):
        i = idx[s]
        t = t0 + s
        m = 0.0
        for j in range(d):
            m += V[i, j] * w[j]
        lr = 1.0 / (t + lr_offset)
        if 1.0 - y[i] * m < 0.0:
            for j in range(d):
                w[j] -= lr * w[j]
        else:
            g = nc * y[i]
            for j in range(d):
                w[j] -= lr * (w[j] - g * V[i, j])
    return w
