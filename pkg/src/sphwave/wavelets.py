"""Second-generation wavelet filter banks on the subdivision mesh.

A bank holds, for every level j >= 1, analysis filters A^j (coarse x fine),
B^j (details x fine) and synthesis filters P^j (fine x coarse),
Q^j (fine x details). Detail coefficients are indexed by the odd vertices of
level j in order, i.e. fine index ``V_{j-1} + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import mesh as _mesh
from ._kernels import vbap_locate


@dataclass(frozen=True, eq=False)
class LevelFilters:
    A: np.ndarray
    P: np.ndarray
    B: np.ndarray | None = None
    Q: np.ndarray | None = None

    @property
    def has_wavelets(self) -> bool:
        return self.B is not None and self.Q is not None

    def biorthogonality_error(self) -> float:
        """Largest entrywise violation of AP=I, BQ=I, AQ=0, BP=0 and PA+QB=I."""
        if not self.has_wavelets:
            raise ValueError("B and Q are absent")
        A, B, P, Q = self.A, self.B, self.P, self.Q
        nc, nd = A.shape[0], B.shape[0]
        errs = [
            A @ P - np.eye(nc),
            B @ Q - np.eye(nd),
            A @ Q,
            B @ P,
            P @ A + Q @ B - np.eye(P.shape[0]),
        ]
        return max(float(np.abs(e).max()) for e in errs)


@dataclass(frozen=True, eq=False)
class FilterBank:
    family: str
    mesh: _mesh.SubdivisionMesh
    levels: dict = field(default_factory=dict)  # j -> LevelFilters

    @property
    def finest(self) -> int:
        return max(self.levels)

    def __getitem__(self, j) -> LevelFilters:
        try:
            return self.levels[j]
        except KeyError:
            raise ValueError(f"bank has no filters for level {j}") from None

    def with_level(self, j, filters: LevelFilters) -> "FilterBank":
        levels = dict(self.levels)
        levels[j] = filters
        return replace(self, levels=levels)


@dataclass(frozen=True, eq=False)
class WaveletCoefficients:
    """Scaling coefficients at ``level`` plus details ``details[j]`` for j in [level, finest).

    Details at levels >= ``truncation`` are stored as zeros.
    """

    coarse: np.ndarray
    level: int
    details: dict
    truncation: int
    finest: int

    @property
    def c0(self) -> np.ndarray:
        return self.coarse


# ---------------------------------------------------------------------------
# selectors and the trivial families

def _selectors(mesh, level):
    nf = mesh[level].n_vertices
    nc = mesh[level - 1].n_vertices
    eye = np.eye(nf)
    return eye[:nc], eye[nc:]


def prediction_matrix(mesh, level) -> np.ndarray:
    """Linear prediction of odd from even vertices, weights 1/2 on the parent edge."""
    nc = mesh[level - 1].n_vertices
    parents = mesh[level].parent_edge
    S = np.zeros((len(parents), nc))
    rows = np.arange(len(parents))
    S[rows, parents[:, 0]] = 0.5
    S[rows, parents[:, 1]] = 0.5
    return S


def lazy_filters(mesh, level) -> LevelFilters:
    E, D = _selectors(mesh, level)
    return LevelFilters(A=E, P=E.T.copy(), B=D, Q=D.T.copy())


def lift(filters: LevelFilters, S: np.ndarray) -> LevelFilters:
    """Primal lifting: A += S B, Q -= P S."""
    A, B, P, Q = filters.A, filters.B, filters.P, filters.Q
    if S.shape != (A.shape[0], B.shape[0]):
        raise ValueError(f"S must have shape {(A.shape[0], B.shape[0])}, got {S.shape}")
    return LevelFilters(A=A + S @ B, P=P, B=B, Q=Q - P @ S)


def dual_lift(filters: LevelFilters, S: np.ndarray) -> LevelFilters:
    """Dual lifting: P += Q S, B -= S A."""
    A, B, P, Q = filters.A, filters.B, filters.P, filters.Q
    if S.shape != (B.shape[0], A.shape[0]):
        raise ValueError(f"S must have shape {(B.shape[0], A.shape[0])}, got {S.shape}")
    return LevelFilters(A=A, P=P + Q @ S, B=B - S @ A, Q=Q)


def scaling_integrals(mesh, level, finest=None, area_method="voronoi") -> np.ndarray:
    """Integrals of the interpolating scaling functions at ``level``.

    Finest-level integrals are the vertex areas; coarser ones follow from the
    refinement relation I_{j,k} = sum_l p_{l,k} I_{j+1,l}.
    """
    finest = mesh.max_level if finest is None else finest
    integrals = _mesh.vertex_areas(mesh, finest, area_method)
    for j in range(finest, level, -1):
        P = lazy_filters(mesh, j).P + lazy_filters(mesh, j).Q @ prediction_matrix(mesh, j)
        integrals = P.T @ integrals
    return integrals


def update_matrix(mesh, level, finest=None, area_method="voronoi") -> np.ndarray:
    """Update weights s_{k,m} = I_{j+1,m} / (2 I_{j,k}) giving zero-integral wavelets."""
    fine_int = scaling_integrals(mesh, level, finest, area_method)
    coarse_int = scaling_integrals(mesh, level - 1, finest, area_method)
    nc = mesh[level - 1].n_vertices
    parents = mesh[level].parent_edge
    S = np.zeros((nc, len(parents)))
    cols = np.arange(len(parents))
    for side in (0, 1):
        k = parents[:, side]
        S[k, cols] = fine_int[nc + cols] / (2.0 * coarse_int[k])
    return S


def interpolating_filters(mesh, level, finest=None, area_method="voronoi") -> LevelFilters:
    """Linear-prediction interpolating wavelets with a zero-integral update."""
    bank = dual_lift(lazy_filters(mesh, level), prediction_matrix(mesh, level))
    return lift(bank, update_matrix(mesh, level, finest, area_method))


def sint_filters(mesh, level, finest=None, area_method="voronoi") -> LevelFilters:
    """Interpolating filters with direct and dual roles swapped."""
    f = interpolating_filters(mesh, level, finest, area_method)
    return LevelFilters(A=f.P.T.copy(), P=f.A.T.copy(), B=f.Q.T.copy(), Q=f.B.T.copy())


# ---------------------------------------------------------------------------
# VBAP

def triangle_inverses(vertices, triangles) -> np.ndarray:
    """Inverse of the 3x3 vertex matrix of every triangle, for barycentric gains."""
    M = np.transpose(vertices[triangles], (0, 2, 1))
    return np.linalg.inv(M)


def vbap_gains(targets, triangles, source, tol: float = 1e-10) -> np.ndarray:
    """Panning gains of ``source`` over a triangulated set of target directions.

    Gains are barycentric on the first triangle containing the source,
    clipped at zero and normalised to sum 1.
    """
    verts = _as_vectors(targets)
    tris = np.asarray(triangles, dtype=int)
    src = _as_vectors(source)
    return vbap_gain_matrix(verts, tris, src, tol)[:, 0]


def vbap_gain_matrix(vertices, triangles, sources, tol: float = 1e-10,
                     inverses=None) -> np.ndarray:
    """Gains (n_targets x n_sources) for many sources at once."""
    inv = triangle_inverses(vertices, triangles) if inverses is None else inverses
    sources = np.ascontiguousarray(sources, dtype=float)
    tri_idx, bary = vbap_locate(np.ascontiguousarray(inv), sources, tol)
    if (tri_idx < 0).any():
        raise ValueError("no triangle contains the source; the mesh is degenerate")
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    G = np.zeros((len(vertices), len(sources)))
    cols = np.arange(len(sources))
    for c in range(3):
        np.add.at(G, (triangles[tri_idx, c], cols), bary[:, c])
    return G


def vbap_filters(mesh, level) -> LevelFilters:
    """A holds the VBAP gains of every fine vertex on the coarse mesh; P keeps even vertices."""
    coarse = mesh[level - 1]
    fine = mesh[level]
    A = vbap_gain_matrix(coarse.vertices, coarse.triangles, fine.vertices)
    E, _ = _selectors(mesh, level)
    return LevelFilters(A=A, P=E.T.copy())


def _as_vectors(dirs):
    from .sphere import as_vectors

    return as_vectors(dirs)


# ---------------------------------------------------------------------------
# banks

FAMILIES = ("lazy", "interpolating", "sint", "vbap")


def build_filter_bank(mesh, family: str, area_method: str = "voronoi") -> FilterBank:
    """Filters of one family for every level of ``mesh``."""
    makers = {
        "lazy": lambda j: lazy_filters(mesh, j),
        "interpolating": lambda j: interpolating_filters(mesh, j, area_method=area_method),
        "sint": lambda j: sint_filters(mesh, j, area_method=area_method),
        "vbap": lambda j: vbap_filters(mesh, j),
    }
    if family not in makers:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return FilterBank(family, mesh, {j: makers[family](j) for j in range(1, mesh.max_level + 1)})


def analysis_matrix(bank: FilterBank, to_level: int, from_level: int | None = None) -> np.ndarray:
    """A^{ℓ+1} ... A^{n}: maps finest-level samples to scaling coefficients at ``to_level``."""
    from_level = bank.finest if from_level is None else from_level
    M = np.eye(bank.mesh[from_level].n_vertices)
    for j in range(from_level, to_level, -1):
        M = bank[j].A @ M
    return M


def synthesis_matrix(bank: FilterBank, from_level: int, to_level: int | None = None) -> np.ndarray:
    """P^{n} ... P^{ℓ+1}: upsampling without details."""
    to_level = bank.finest if to_level is None else to_level
    M = np.eye(bank.mesh[from_level].n_vertices)
    for j in range(from_level + 1, to_level + 1):
        M = bank[j].P @ M
    return M


def forward_transform(bank: FilterBank, f, to_level: int = 0, truncation: int | None = None,
                      details: bool = True) -> WaveletCoefficients:
    """Recursive analysis c^{j-1} = A^j c^j, d^{j-1} = B^j c^j from the finest level."""
    n = bank.finest
    f = np.asarray(f, dtype=float)
    if f.shape[0] != bank.mesh[n].n_vertices:
        raise ValueError(f"signal has length {f.shape[0]}, expected {bank.mesh[n].n_vertices}")
    if not 0 <= to_level <= n:
        raise ValueError(f"to_level must be in [0, {n}]")
    truncation = n if truncation is None else truncation
    c = f
    dets = {}
    for j in range(n, to_level, -1):
        lv = bank[j]
        if details and j - 1 < truncation:
            if lv.B is None:
                raise ValueError(f"level {j} has no B filter; details cannot be computed")
            dets[j - 1] = lv.B @ c
        else:
            dets[j - 1] = np.zeros((bank.mesh[j].n_vertices - bank.mesh[j - 1].n_vertices,) + c.shape[1:])
        c = lv.A @ c
    return WaveletCoefficients(c, to_level, dets, truncation, n)


def inverse_transform(bank: FilterBank, coeffs: WaveletCoefficients, to_level: int | None = None):
    """Recursive synthesis c^k = P^k c^{k-1} + Q^k d^{k-1}; zero details skip Q."""
    to_level = coeffs.finest if to_level is None else to_level
    if not coeffs.level <= to_level <= bank.finest:
        raise ValueError(f"to_level must be in [{coeffs.level}, {bank.finest}]")
    c = coeffs.coarse
    for k in range(coeffs.level + 1, to_level + 1):
        lv = bank[k]
        c = lv.P @ c
        d = coeffs.details.get(k - 1)
        if d is not None and np.any(d):
            if lv.Q is None:
                raise ValueError(f"level {k} has no Q filter")
            c = c + lv.Q @ d
    return c


def materialize(bank: FilterBank, level: int, kind: str, index: int) -> np.ndarray:
    """Scaling function, wavelet or their duals as a finest-level vector.

    Wavelet ``index`` counts the details of level ``level`` (odd vertices of level+1).
    """
    n = bank.finest
    if kind in ("scaling", "dual_scaling"):
        size = bank.mesh[level].n_vertices
    elif kind in ("wavelet", "dual_wavelet"):
        if level >= n:
            raise ValueError("no wavelets at the finest level")
        size = bank.mesh[level + 1].n_vertices - bank.mesh[level].n_vertices
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if not 0 <= index < size:
        raise ValueError(f"index {index} out of range [0, {size})")
    e = np.zeros(size)
    e[index] = 1.0
    if kind == "scaling":
        return synthesis_matrix(bank, level) @ e
    if kind == "wavelet":
        return synthesis_matrix(bank, level + 1) @ (bank[level + 1].Q @ e)
    if kind == "dual_scaling":
        return analysis_matrix(bank, level).T @ e
    return (bank[level + 1].B @ analysis_matrix(bank, level + 1)).T @ e


# ---------------------------------------------------------------------------
# files

def save_filter_bank(bank: FilterBank, directory) -> list[Path]:
    """One CSV per level and matrix, each with a ``# matrix=... family=...`` header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, lv in sorted(bank.levels.items()):
        for name in "ABPQ":
            M = getattr(lv, name)
            if M is None:
                continue
            path = directory / f"{name}_{j}.csv"
            header = (f"# matrix={name} level={j} rows={M.shape[0]} cols={M.shape[1]} "
                      f"family={bank.family}")
            write_matrix_csv(path, M, header)
            paths.append(path)
    return paths


def load_filter_bank(directory, mesh) -> FilterBank:
    directory = Path(directory)
    found = {}
    family = None
    for path in sorted(directory.glob("*_*.csv")):
        meta, M = read_matrix_csv(path)
        if "matrix" not in meta or "level" not in meta:
            continue
        family = meta.get("family", family)
        found.setdefault(int(meta["level"]), {})[meta["matrix"]] = M
    if not found:
        raise ValueError(f"no filter files in {directory}")
    levels = {}
    for j, mats in found.items():
        if "A" not in mats or "P" not in mats:
            raise ValueError(f"level {j} lacks A or P")
        if j > mesh.max_level or mats["A"].shape != (mesh[j - 1].n_vertices, mesh[j].n_vertices):
            raise ValueError(f"level {j} filters do not match the mesh")
        levels[j] = LevelFilters(mats["A"], mats["P"], mats.get("B"), mats.get("Q"))
    return FilterBank(family or "custom", mesh, levels)


def write_matrix_csv(path, M, header: str) -> None:
    rows = [",".join(f"{x:.17g}" for x in row) for row in np.atleast_2d(M)]
    Path(path).write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def read_matrix_csv(path):
    """Return (header fields, matrix) for a CSV written by :func:`write_matrix_csv`."""
    meta = {}
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed number") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: empty or ragged matrix")
    M = np.array(rows)
    if not np.isfinite(M).all():
        raise ValueError(f"{path}: non-finite entries")
    for key, dim in (("rows", 0), ("cols", 1)):
        if key in meta and int(meta[key]) != M.shape[dim]:
            raise ValueError(f"{path}: header says {key}={meta[key]}, found {M.shape[dim]}")
    return meta, M
