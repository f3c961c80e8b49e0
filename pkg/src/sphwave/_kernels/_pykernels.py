"""Pure numpy implementations of the hot loops."""

import numpy as np

# term order shared with the compiled kernels
TERMS = ("P", "VR", "VT", "E", "IR", "IT", "ph")


def vbap_locate(inverses, sources, tol):
    """First triangle whose barycentric coordinates are all >= -tol, per source.

    Returns (triangle index or -1, barycentric coordinates).
    """
    bary = np.einsum("tij,nj->nti", inverses, sources)
    inside = bary.min(axis=2) >= -tol
    found = inside.any(axis=1)
    idx = np.where(found, inside.argmax(axis=1), -1)
    coords = bary[np.arange(len(sources)), np.maximum(idx, 0)]
    coords[~found] = 0.0
    return idx, coords


def idhoa_cost_grad(S, U, dirs, w, alpha):
    """Weighted objective over directions and its gradient with respect to S.

    Parameters
    ----------
    S : (n_dirs, n_spk) speaker signals
    U : (n_spk, 3) speaker unit vectors
    dirs : (n_dirs, 3) target unit vectors
    w : (n_dirs,) mask weights
    alpha : (7,) weights in :data:`TERMS` order

    Returns
    -------
    cost : float
    terms : (7,) unweighted cost terms
    G : (n_dirs, n_spk) gradient
    """
    n = S.shape[0]
    cos = dirs @ U.T  # u_i . d_j
    S2 = S * S
    E = S2.sum(axis=1)
    P = S.sum(axis=1)
    v = S @ U
    vR = np.einsum("jk,jk->j", v, dirs)
    vT2 = np.maximum(np.einsum("jk,jk->j", v, v) - vR * vR, 0.0)
    neg = np.minimum(S, 0.0)
    Eph = (neg * neg).sum(axis=1)

    ok = E > 0
    Esafe = np.where(ok, E, 1.0)
    I = (S2 @ U) / Esafe[:, None]
    IR = np.einsum("jk,jk->j", I, dirs)
    IT2 = np.maximum(np.einsum("jk,jk->j", I, I) - IR * IR, 0.0)
    wi = np.where(ok, w, 0.0)

    terms = np.array([
        np.sum(w * (1 - P) ** 2),
        np.sum(w * (1 - vR) ** 2),
        np.sum(w * vT2),
        np.sum(w * (1 - E) ** 2),
        np.sum(wi * (1 - IR) ** 2),
        np.sum(wi * IT2),
        np.sum(w * Eph ** 2),
    ]) / n
    cost = float(alpha @ terms)

    G = np.zeros_like(S)
    G += (alpha[0] * -2 * (1 - P) * w)[:, None]
    G += (alpha[1] * -2 * (1 - vR) * w)[:, None] * cos
    G += alpha[2] * w[:, None] * (2 * (v @ U.T) - 2 * vR[:, None] * cos)
    G += (alpha[3] * -4 * (1 - E) * w)[:, None] * S
    G += (alpha[4] * -4 * (1 - IR) * wi / Esafe)[:, None] * S * (cos - IR[:, None])
    Iperp = I - IR[:, None] * dirs
    IU = (Iperp @ U.T) - np.einsum("jk,jk->j", Iperp, I)[:, None]
    G += (alpha[5] * 4 * wi / Esafe)[:, None] * S * IU
    G += (alpha[6] * 4 * Eph * w)[:, None] * neg
    return cost, terms, G / n
