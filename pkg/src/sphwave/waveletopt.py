"""Numerical synthesis of scaling filters (the "optimized" family).

Stage one fits A^j and P^j level by level, coarser levels frozen, under the
constraint A^j P^j = I. Stage two completes the wavelet filters B^j and Q^j
algebraically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from . import wavelets as wl
from .mesh import neighbor_sets, symmetry_orbits
from .optcore import (
    MinimizeOptions,
    independent_constraints,
    minimize,
    project_to_constraints,
    reduce_dofs,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptWeights:
    alpha_lambda: float = 1.0
    alpha_p1: float = 10.0
    alpha_p2: float = 10.0
    alpha_neg: float = 100.0


@dataclass
class LevelReport:
    level: int
    n_params: int
    n_constraints: int
    n_independent: int
    cost_init: float
    cost_final: float
    constraint_residual: float
    converged: bool
    history: list = field(default_factory=list)


def build_lambda(mesh, level) -> np.ndarray:
    """Target for P^j A^j over the level vertices; every column sums to 1."""
    nb = neighbor_sets(mesh, level)
    nc = mesh[level - 1].n_vertices
    nf = mesh[level].n_vertices
    L = np.zeros((nf, nf))
    for i in range(nf - nc):
        m = nc + i
        L[m, m] = 1.0 / 3.0
        for k in (*nb.v[i], *nb.f[i]):
            L[k, m] += 1.0 / 6.0
    for k in range(nc):
        inc = nb.incident[k]
        gamma = 2.0 / (2.0 + len(inc))
        L[k, k] = gamma
        L[inc, k] = gamma / 2.0
    return L


class ScalingCost:
    """Objective over (A, P) for one level with coarser levels frozen."""

    def __init__(self, mesh, level, frozen: dict, weights: OptWeights):
        self.level = level
        self.w = weights
        self.Lam = build_lambda(mesh, level)
        nc = mesh[level - 1].n_vertices
        # X_{j'} = P^{j-1}..P^{j'} A^{j'}..A^{j-1} for j' = level .. 1
        self.chains = [np.eye(nc)]
        down = np.eye(nc)
        up = np.eye(nc)
        for jp in range(level - 1, 0, -1):
            A, P = frozen[jp]
            down = A @ down
            up = up @ P
            self.chains.append(up @ down)

    def __call__(self, A, P):
        w = self.w
        nf = A.shape[1]
        R = P @ A - self.Lam
        f_lam = (R * R).mean()
        gA = w.alpha_lambda * 2 * P.T @ R / R.size
        gP = w.alpha_lambda * 2 * R @ A.T / R.size

        r = A.sum(axis=0) - 1.0
        f_p1 = (r * r).mean()
        gA = gA + w.alpha_p1 * np.broadcast_to(2 * r / nf, A.shape)

        f_p2 = 0.0
        u = P.sum(axis=0)
        for X in self.chains:
            uX = u @ X
            y = uX @ A - 1.0
            f_p2 += (y * y).mean()
            g = 2 * y / nf
            gA = gA + w.alpha_p2 * np.outer(uX, g)
            gP = gP + w.alpha_p2 * np.broadcast_to(X @ (A @ g), P.shape)

        nA = np.minimum(A, 0.0)
        nP = np.minimum(P, 0.0)
        f_neg = (nA * nA).mean() + (nP * nP).mean()
        gA = gA + w.alpha_neg * 2 * nA / A.size
        gP = gP + w.alpha_neg * 2 * nP / P.size

        f = (w.alpha_lambda * f_lam + w.alpha_p1 * f_p1 + w.alpha_p2 * f_p2
             + w.alpha_neg * f_neg)
        return f, gA, gP


class LevelProblem:
    """Symmetry-reduced parameters theta = [theta_A, theta_P] for one level."""

    def __init__(self, mesh, level, frozen, weights: OptWeights, symmetric=True, pin_rest=True,
                 exact_pressure=True):
        self.exact_pressure = exact_pressure
        orbits = symmetry_orbits(mesh, level)
        self.tA = reduce_dofs(orbits, symmetric=symmetric, pin_rest=pin_rest)
        self.tP = reduce_dofs(orbits, transpose=True, symmetric=symmetric, pin_rest=pin_rest)
        self.nA = self.tA.n_params
        self.cost = ScalingCost(mesh, level, frozen, weights)
        self.nc = mesh[level - 1].n_vertices
        self.mask = None

    @property
    def n_params(self):
        return self.nA + self.tP.n_params

    def unpack(self, theta):
        return self.tA.upscale(theta[:self.nA]), self.tP.upscale(theta[self.nA:])

    def pack(self, A, P):
        return np.concatenate([self.tA.downscale(A), self.tP.downscale(P)])

    def objective(self, theta):
        A, P = self.unpack(theta)
        f, gA, gP = self.cost(A, P)
        return f, np.concatenate([self.tA.pullback(gA), self.tP.pullback(gP)])

    def all_constraints(self, theta):
        """vec(A P - I), then column sums of A minus 1, with the Jacobian in theta."""
        A, P = self.unpack(theta)
        c = (A @ P - np.eye(self.nc)).ravel()
        cols = []
        for i in range(self.nA):
            cols.append((self.tA.T[:, i].reshape(self.tA.shape) @ P).ravel())
        for i in range(self.tP.n_params):
            cols.append((A @ self.tP.T[:, i].reshape(self.tP.shape)).ravel())
        J = np.column_stack(cols)
        if self.exact_pressure:
            nf = A.shape[1]
            c = np.concatenate([c, A.sum(axis=0) - 1.0])
            JA = self.tA.T.reshape(self.nc, nf, self.nA).sum(axis=0)
            J = np.vstack([J, np.hstack([JA, np.zeros((nf, self.tP.n_params))])])
        return c, J

    def select_constraints(self, seed=0):
        rng = np.random.default_rng(seed)
        _, J = self.all_constraints(rng.normal(size=self.n_params))
        self.mask = independent_constraints(J)
        return self.mask

    def constraints(self, theta):
        c, J = self.all_constraints(theta)
        return c[self.mask], J[self.mask]


def optimize_level(mesh, level, frozen, weights=None, init="sint", seed=0, options=None,
                   exact_pressure=True):
    """Optimised (A^j, P^j) for one level and a report.

    With ``exact_pressure`` the column sums of A are held at 1 as equality
    constraints, on top of A P = I.
    """
    weights = weights or OptWeights()
    prob = LevelProblem(mesh, level, frozen, weights, exact_pressure=exact_pressure)
    mask = prob.select_constraints(seed)
    if not mask.any():
        raise ValueError("constraint reduction left no independent constraints")
    if init == "sint":
        f = wl.sint_filters(mesh, level)
        theta0 = prob.pack(f.A, f.P)
    elif init == "random":
        theta0 = np.random.default_rng(seed).uniform(0.0, 1.0, prob.n_params)
    else:
        raise ValueError(f"unknown init {init!r}")
    theta0 = project_to_constraints(prob.constraints, theta0)
    f_init = prob.objective(theta0)[0]
    opts = options or MinimizeOptions(tol_c=1e-12, tol_g=1e-6, max_iter=60, seed=seed)
    theta, rep = minimize(prob.objective, theta0, prob.constraints, opts)
    theta = project_to_constraints(prob.constraints, theta, tol=1e-14)
    A, P = prob.unpack(theta)
    resid = float(np.abs(A @ P - np.eye(prob.nc)).max())
    report = LevelReport(level, prob.n_params, mask.size, int(mask.sum()), float(f_init),
                         float(prob.objective(theta)[0]), resid, rep.converged, rep.history)
    log.info("level %d: %d params, %d/%d constraints, f %.3g -> %.3g, |AP-I| %.2g",
             level, prob.n_params, mask.sum(), mask.size, f_init, report.cost_final, resid)
    return A, P, report


def optimize_scaling_filters(mesh, level, weights=None, frozen=None, init="sint", seed=0,
                             options=None, exact_pressure=True):
    """Optimise levels 1..level in order; levels present in ``frozen`` are kept as given.

    Returns ({j: (A, P)}, [LevelReport]).
    """
    if level < 1 or level > mesh.max_level:
        raise ValueError(f"level must be in [1, {mesh.max_level}]")
    out = dict(frozen or {})
    reports = []
    for j in range(1, level + 1):
        if j in out:
            continue
        A, P, rep = optimize_level(mesh, j, out, weights, init, seed, options, exact_pressure)
        out[j] = (A, P)
        reports.append(rep)
    return {j: out[j] for j in range(1, level + 1)}, reports


def complete_wavelet_filters(A, P, tol: float = 1e-6):
    """B and Q completing (A, P) to a biorthogonal set.

    Q spans the kernel of A with orthonormal columns and B = (Q^T Q)^-1 Q^T (I - P A).
    """
    A = np.asarray(A, dtype=float)
    P = np.asarray(P, dtype=float)
    nc, nf = A.shape
    if np.abs(A @ P - np.eye(nc)).max() > tol:
        raise ValueError("A P differs from the identity")
    Q = null_space(A)
    if Q.shape[1] != nf - nc:
        raise ValueError(f"kernel of A has dimension {Q.shape[1]}, expected {nf - nc}")
    B = np.linalg.solve(Q.T @ Q, Q.T @ (np.eye(nf) - P @ A))
    return B, Q


def build_optimized_bank(mesh, level=None, weights=None, init="sint", seed=0, frozen=None,
                         exact_pressure=True):
    """Full optimised bank up to ``level`` (default: finest) and the per-level reports."""
    level = mesh.max_level if level is None else level
    ap, reports = optimize_scaling_filters(mesh, level, weights, frozen, init, seed,
                                           exact_pressure=exact_pressure)
    levels = {}
    for j, (A, P) in ap.items():
        B, Q = complete_wavelet_filters(A, P)
        levels[j] = wl.LevelFilters(A, P, B, Q)
    return wl.FilterBank("optimized", mesh, levels), reports
