"""Pure-numpy full-batch gradient descent, the fallback for ``_descent``."""

import numpy as np

from ..mlp import loss_and_grad_arrays

MAX_ITERS, GRAD_TOL, DIVERGED = 0, 1, 2


def descend_generic(V, U, X, Y, penalty, group_norms, n_groups, eta, max_iters,
                    grad_tol=0.0, checkpoint_every=0):
    """Run ``w <- w - eta * dE/dw`` with ``penalty(V) -> (value, dV)``.

    Returns ``(V, U, loss, grad_norm, norms, iterations_run, status, ckpt)``
    where the histories hold ``iterations_run + 1`` entries (the initial
    state included) and ``ckpt`` maps iteration -> (V, U) copies.
    """
    V = np.array(V, dtype=float)
    U = np.array(U, dtype=float)
    loss = np.empty(max_iters + 1)
    gnorm = np.empty(max_iters + 1)
    norms = np.empty((max_iters + 1, n_groups))
    ckpt = {}
    prev = None
    status, run = MAX_ITERS, max_iters
    # overflow is detected below as a non-finite loss
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(max_iters + 1):
            E0, dU, dV = loss_and_grad_arrays(V, U, X, Y)
            pval, pgrad = penalty(V)
            dV += pgrad
            E = E0 + pval
            gn = np.sqrt(np.sum(dU * dU) + np.sum(dV * dV))
            if not (np.isfinite(E) and np.isfinite(gn)):
                if prev is None:
                    raise FloatingPointError("non-finite loss at the initial weights")
                V, U = prev
                status, run = DIVERGED, m - 1
                break
            loss[m] = E
            gnorm[m] = gn
            norms[m] = group_norms(V)
            if checkpoint_every and m % checkpoint_every == 0:
                ckpt[m] = (V.copy(), U.copy())
            if gn <= grad_tol:
                status, run = GRAD_TOL, m
                break
            if m == max_iters:
                break
            prev = (V.copy(), U.copy())
            V -= eta * dV
            U -= eta * dU
    n = run + 1
    return V, U, loss[:n], gnorm[:n], norms[:n], run, status, ckpt


def descend(V, U, X, Y, membership, coef, eps, eta, max_iters, grad_tol=0.0,
            checkpoint_every=0):
    """Descent on ``E0 + sum_i coef[i] * sqrt(||g_i||^2 + eps^2)``."""
    membership = np.asarray(membership, dtype=np.intp)
    coef = np.asarray(coef, dtype=float)
    s = coef.size

    def sq(V):
        return np.bincount(membership, weights=np.einsum("kj,kj->j", V, V), minlength=s)

    def penalty(V):
        H = np.sqrt(sq(V) + eps * eps)
        scale = np.divide(coef, H, out=np.zeros_like(H), where=H > 0)
        return float(coef @ H), V * scale[membership]

    return descend_generic(V, U, X, Y, penalty, lambda V: np.sqrt(sq(V)), s, eta,
                           max_iters, grad_tol, checkpoint_every)
