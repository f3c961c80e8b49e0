"""Equality-constrained smooth minimisation with analytic gradients.

The solver is an augmented Lagrangian loop around scipy's L-BFGS-B. Costs and
constraints are callables returning values together with their derivatives:
``cost(x) -> (f, grad)`` and ``constraints(x) -> (c, jac)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

log = logging.getLogger(__name__)


@dataclass
class MinimizeOptions:
    max_iter: int = 50  # outer iterations
    max_inner: int = 2000
    tol_c: float = 1e-8
    tol_g: float = 1e-6
    penalty: float = 10.0
    penalty_growth: float = 10.0
    max_penalty: float = 1e12
    seed: int = 0


@dataclass
class MinimizeReport:
    converged: bool
    message: str
    fun: float
    constraint_violation: float
    stationarity: float
    outer_iterations: int
    inner_iterations: int
    history: list = field(default_factory=list)  # (outer, f, |c|_inf)


def _no_constraints(x):
    return np.zeros(0), np.zeros((0, x.size))


def stack_constraints(funcs):
    """Combine scalar constraints ``g(x) -> (value, grad)`` into one vector constraint."""
    funcs = list(funcs)

    def combined(x):
        if not funcs:
            return _no_constraints(x)
        vals, grads = zip(*(fn(x) for fn in funcs))
        return np.array(vals, dtype=float), np.vstack(grads)

    return combined


def minimize(cost, x0, constraints=None, options: MinimizeOptions | None = None):
    """Minimise ``cost`` subject to ``constraints(x) == 0``.

    Returns
    -------
    x : ndarray
        Best iterate (feasible-first, then lowest cost).
    report : MinimizeReport
    """
    opts = options or MinimizeOptions()
    if isinstance(constraints, (list, tuple)):
        constraints = stack_constraints(constraints)
    constraints = constraints or _no_constraints
    x = np.array(x0, dtype=float).ravel()
    f0, _ = cost(x)
    if not np.isfinite(f0):
        raise ValueError("cost is not finite at the starting point")

    c, J = constraints(x)
    lam = np.zeros(c.size)
    mu = opts.penalty
    history = []
    inner_total = 0
    best = None
    prev_viol = np.inf

    def augmented(z):
        f, g = cost(z)
        cz, Jz = constraints(z)
        if cz.size:
            f = f + lam @ cz + 0.5 * mu * (cz @ cz)
            g = g + Jz.T @ (lam + mu * cz)
        return f, g

    for outer in range(1, opts.max_iter + 1):
        res = _scipy_minimize(
            augmented, x, jac=True, method="L-BFGS-B",
            options={"maxiter": opts.max_inner, "gtol": opts.tol_g * 1e-2,
                     "ftol": 1e-15, "maxcor": 20},
        )
        x = res.x
        inner_total += int(res.nit)
        f, g = cost(x)
        c, J = constraints(x)
        viol = float(np.abs(c).max()) if c.size else 0.0
        if c.size:
            lam = lam + mu * c
            # least-squares multipliers give a stable stationarity measure
            lam_ls = np.linalg.lstsq(J.T, -g, rcond=None)[0]
            stat = float(np.abs(g + J.T @ lam_ls).max())
        else:
            stat = float(np.abs(g).max())
        history.append((outer, float(f), viol))
        log.debug("outer %d f=%.6g |c|=%.3g stat=%.3g mu=%.3g", outer, f, viol, stat, mu)

        key = (viol > opts.tol_c, f)
        if best is None or key < best[0]:
            best = (key, x.copy(), float(f), viol, stat)
        if viol < opts.tol_c and stat < opts.tol_g:
            return x, MinimizeReport(True, "converged", float(f), viol, stat, outer,
                                     inner_total, history)
        if c.size == 0:
            # unconstrained: L-BFGS-B stopped on its own criteria
            if res.success or outer >= 3:
                break
            continue
        if viol > max(0.25 * prev_viol, opts.tol_c) and mu < opts.max_penalty:
            mu *= opts.penalty_growth
        prev_viol = viol

    _, xb, fb, vb, sb = best
    ok = vb < opts.tol_c and sb < opts.tol_g
    msg = "converged" if ok else "iteration limit reached before tolerances were met"
    if not ok:
        log.warning("minimize: %s (|c|=%.3g, stationarity=%.3g)", msg, vb, sb)
    return xb, MinimizeReport(ok, msg, fb, vb, sb, len(history), inner_total, history)


def check_gradient(f, x, h: float = 1e-5) -> float:
    """Largest deviation between the analytic gradient and central differences.

    The error is relative to the larger of the two gradients' max-norms.
    """
    x = np.array(x, dtype=float)
    _, g = f(x)
    g = np.asarray(g, dtype=float).ravel()
    num = np.zeros_like(g)
    flat = x.ravel()
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        num[i] = (f(xp.reshape(x.shape))[0] - f(xm.reshape(x.shape))[0]) / (2 * h)
    scale = max(np.abs(num).max(), np.abs(g).max(), 1e-300)
    return float(np.abs(num - g).max() / scale)


# ---------------------------------------------------------------------------
# variable reduction

@dataclass
class LinearTemplate:
    """Linear map from free parameters to a matrix: ``vec(M) = T @ theta``.

    Entries whose row of T is empty are pinned to zero.
    """

    shape: tuple
    T: np.ndarray  # (prod(shape), n_params)

    @property
    def n_params(self) -> int:
        return self.T.shape[1]

    def upscale(self, theta) -> np.ndarray:
        return (self.T @ np.asarray(theta, dtype=float)).reshape(self.shape)

    def downscale(self, M) -> np.ndarray:
        """Least-squares parameters for M; exact when M lies in the template's range."""
        TtT = self.T.T @ self.T
        return np.linalg.solve(TtT, self.T.T @ np.asarray(M, dtype=float).ravel())

    def project(self, M) -> np.ndarray:
        return self.upscale(self.downscale(M))

    def pullback(self, grad_M) -> np.ndarray:
        """Gradient with respect to the parameters given the gradient with respect to M."""
        return self.T.T @ np.asarray(grad_M, dtype=float).ravel()

    @classmethod
    def full(cls, shape):
        return cls(tuple(shape), np.eye(int(np.prod(shape))))


def _template_from_labels(shape, labels, signs=None):
    """Template tying entries with equal non-negative labels; label -1 pins to zero."""
    labels = np.asarray(labels).ravel()
    uniq = np.unique(labels[labels >= 0])
    col = {int(u): i for i, u in enumerate(uniq)}
    T = np.zeros((labels.size, len(uniq)))
    signs = np.ones(labels.size) if signs is None else np.asarray(signs, dtype=float).ravel()
    for e, lab in enumerate(labels):
        if lab >= 0:
            T[e, col[int(lab)]] = signs[e]
    return LinearTemplate(tuple(shape), T)


def reduce_dofs(orbits, transpose: bool = False, pin_rest: bool = True,
                symmetric: bool = True) -> LinearTemplate:
    """Template for a coarse x fine filter (or its fine x coarse transpose).

    One parameter per (orbit representative, neighbour class). Entries in the
    ``rest`` class are pinned to zero when ``pin_rest`` is set.
    """
    nc, nf = orbits.perm.shape
    labels = np.full((nc, nf), -1, dtype=int)
    for k in range(nc):
        r = int(orbits.representative[k])
        code = orbits.column_classes[r]
        lab = r * 5 + code if symmetric else k * nf + orbits.perm[k]
        if pin_rest:
            lab = np.where(code == 4, -1, lab)
        labels[k, orbits.perm[k]] = lab
    if transpose:
        return _template_from_labels((nf, nc), labels.T)
    return _template_from_labels((nc, nf), labels)


def mirror_template(n_rows, n_cols, row_map, col_map, col_signs=None) -> LinearTemplate:
    """Template enforcing ``M[row_map[i], col_map[c]] = sign[c] * M[i, c]``.

    Both maps must be involutions; self-mirrored entries with sign -1 are pinned to zero.
    """
    row_map = np.asarray(row_map)
    col_map = np.asarray(col_map)
    sgn = np.ones(n_cols) if col_signs is None else np.asarray(col_signs, dtype=float)
    if not (np.array_equal(row_map[row_map], np.arange(n_rows))
            and np.array_equal(col_map[col_map], np.arange(n_cols))):
        raise ValueError("mirror maps must be involutions")
    labels = np.full((n_rows, n_cols), -1, dtype=int)
    signs = np.ones((n_rows, n_cols))
    nxt = 0
    for i in range(n_rows):
        for c in range(n_cols):
            if labels[i, c] >= 0 or signs[i, c] == 0:
                continue
            j, d = row_map[i], col_map[c]
            s = sgn[c]
            if (j, d) == (i, c):
                if s < 0:
                    signs[i, c] = 0.0  # antisymmetric fixed point
                    continue
                labels[i, c] = nxt
            else:
                labels[i, c] = nxt
                labels[j, d] = nxt
                signs[j, d] = s
            nxt += 1
    return _template_from_labels((n_rows, n_cols), labels, signs)


def independent_constraints(J, tol: float = 1e-10) -> np.ndarray:
    """Mask of a maximal linearly independent subset of the rows of ``J``.

    Row reduction of J^T with partial pivoting; pivot columns of J^T mark the
    independent rows. Rows are scaled to unit max-norm first.
    """
    J = np.array(J, dtype=float)
    m = J.shape[0]
    mask = np.zeros(m, dtype=bool)
    if m == 0:
        return mask
    scale = np.abs(J).max(axis=1)
    live = scale > tol
    R = np.zeros_like(J)
    R[live] = J[live] / scale[live, None]
    R = R.T.copy()  # columns are constraints
    rows, cols = R.shape
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        others = np.arange(rows) != r
        R[others] -= np.outer(R[others, c], R[r])
        mask[c] = True
        r += 1
    return mask


def project_to_constraints(constraints, x0, tol: float = 1e-12, max_iter: int = 100):
    """Nearest-ish feasible point by minimum-norm Gauss-Newton steps."""
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        c, J = constraints(x)
        if c.size == 0 or np.abs(c).max() < tol:
            break
        step, *_ = np.linalg.lstsq(J, c, rcond=None)
        x = x - step
    return x
