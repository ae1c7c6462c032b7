"""Pure numpy versions of the hot numerical kernels.

Signatures mirror ``_ckernels.pyx`` exactly; :mod:`mfopt._backend` picks one
at import time.
"""

import numpy as np

SE = 0
MATERN52 = 1

_SQRT5 = np.sqrt(5.0)


def _split(X1, X2, lengthscales, n_fid):
    d = X1.shape[1]
    nb = d - n_fid
    diff = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    D = diff * diff  # (n1, n2, d)
    return D[:, :, :nb].sum(axis=2), D[:, :, nb:].sum(axis=2), D


def ard_gram(X1, X2, lengthscales, amplitude, family, n_fid):
    """Cross-covariance matrix of an ARD kernel between two point sets.

    For ``family == MATERN52`` the last ``n_fid`` coordinates use a squared
    exponential factor (product kernel); for SE the split is immaterial.
    """
    X1 = np.ascontiguousarray(X1, dtype=float)
    X2 = np.ascontiguousarray(X2, dtype=float)
    ls = np.asarray(lengthscales, dtype=float)
    if family == SE:
        r2b, r2f, _ = _split(X1, X2, ls, 0)
        return amplitude * np.exp(-0.5 * r2b)
    r2b, r2f, _ = _split(X1, X2, ls, n_fid)
    r = np.sqrt(r2b)
    return amplitude * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2b) * np.exp(-_SQRT5 * r - 0.5 * r2f)


def ard_gram_grad(X, lengthscales, amplitude, family, n_fid):
    """Gram matrix and its derivatives w.r.t. each log-lengthscale.

    Returns ``(K, dK)`` with ``dK[i] = dK/d log(lengthscale_i)``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    ls = np.asarray(lengthscales, dtype=float)
    d = X.shape[1]
    if family == SE:
        r2b, _, D = _split(X, X, ls, 0)
        K = amplitude * np.exp(-0.5 * r2b)
        dK = np.moveaxis(D, 2, 0) * K[None, :, :]
        return K, np.ascontiguousarray(dK)
    nb = d - n_fid
    r2b, r2f, D = _split(X, X, ls, n_fid)
    r = np.sqrt(r2b)
    e = np.exp(-_SQRT5 * r - 0.5 * r2f)
    K = amplitude * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2b) * e
    dK = np.empty((d,) + K.shape)
    base = amplitude * (5.0 / 3.0) * (1.0 + _SQRT5 * r) * e
    for i in range(d):
        if i < nb:
            dK[i] = base * D[:, :, i]
        else:
            dK[i] = K * D[:, :, i]
    return K, dK


def deflate(R, q):
    """Remove the component along unit vector ``q`` from every row of ``R``
    in place and return the updated row norms."""
    c = R @ q
    R -= np.outer(c, q)
    return np.sqrt(np.einsum("ij,ij->i", R, R))
