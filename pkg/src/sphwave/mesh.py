"""Octahedron-seeded subdivision of the sphere.

Each level splits every triangle into four by inserting edge midpoints,
which are pushed back onto the unit sphere. Vertices of level j keep their
indices at level j+1 ("even" vertices); the new "odd" vertex on edge e gets
index ``V_j + e``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

OCTAHEDRON_VERTICES = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
])

# counterclockwise seen from outside
OCTAHEDRON_FACES = np.array([
    [0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4],
    [1, 0, 5], [2, 1, 5], [3, 2, 5], [0, 3, 5],
])

NEIGHBOR_CLASSES = ("self", "v", "f", "e", "rest")


@dataclass(frozen=True, eq=False)
class MeshLevel:
    vertices: np.ndarray
    triangles: np.ndarray
    parent_edge: np.ndarray  # (n_odd, 2), empty at level 0
    edges: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces


def _edges(triangles):
    """Unique undirected edges in order of first appearance."""
    seen = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen[key] = len(seen)
    return np.array(list(seen), dtype=int).reshape(-1, 2), seen


def _subdivide(vertices, triangles):
    edges, index = _edges(triangles)
    nv = len(vertices)
    mid = vertices[edges[:, 0]] + vertices[edges[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    new_vertices = np.vstack([vertices, mid])

    def odd(a, b):
        return nv + index[(min(a, b), max(a, b))]

    faces = []
    for a, b, c in triangles:
        ab, bc, ca = odd(a, b), odd(b, c), odd(c, a)
        faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return new_vertices, np.array(faces, dtype=int), edges


@dataclass(frozen=True, eq=False)
class SubdivisionMesh:
    levels: tuple[MeshLevel, ...]

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, j) -> MeshLevel:
        return self.levels[j]

    def vertex_counts(self) -> list[int]:
        return [lv.n_vertices for lv in self.levels]

    @cached_property
    def _neighbors(self):
        return {}

    @cached_property
    def _orbits(self):
        return {}


def build_mesh(levels: int) -> SubdivisionMesh:
    """Mesh with ``levels`` subdivisions of the octahedron (``levels + 1`` mesh levels)."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    verts, tris = OCTAHEDRON_VERTICES.copy(), OCTAHEDRON_FACES.copy()
    out = []
    parent = np.zeros((0, 2), dtype=int)
    for j in range(levels + 1):
        edges, _ = _edges(tris)
        out.append(MeshLevel(verts, tris, parent, edges))
        if j < levels:
            verts, tris, parent = _subdivide(verts, tris)
    return SubdivisionMesh(tuple(out))


def export_mesh(mesh: SubdivisionMesh, directory) -> list[Path]:
    """Write ``level_<j>.txt`` files with ``v x y z`` and ``f i j k`` lines."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, lv in enumerate(mesh.levels):
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in lv.vertices]
        lines += [f"f {a} {b} {c}" for a, b, c in lv.triangles]
        path = directory / f"level_{j}.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def read_mesh_levels(directory) -> int:
    """Number of subdivisions described by an exported mesh directory.

    The mesh is rebuilt deterministically and checked against the files.
    """
    directory = Path(directory)
    files = sorted(directory.glob("level_*.txt"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ValueError(f"no mesh files in {directory}")
    levels = len(files) - 1
    mesh = build_mesh(levels)
    for j, path in enumerate(files):
        verts = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.startswith("v "):
                verts.append([float(t) for t in line.split()[1:4]])
        verts = np.array(verts)
        if verts.shape != mesh[j].vertices.shape or not np.allclose(verts, mesh[j].vertices, atol=1e-12):
            raise ValueError(f"{path} does not match an octahedral subdivision mesh")
    return levels


# ---------------------------------------------------------------------------
# neighbourhoods

@dataclass(frozen=True, eq=False)
class NeighborSets:
    """Neighbourhood of every odd vertex at ``level`` in terms of level-1 indices.

    Rows are indexed by ``m - V_{level-1}``. ``e`` repeats a vertex when an
    edge endpoint is one of the six valence-4 vertices, whose two wings meet.
    """

    level: int
    v: np.ndarray  # (n_odd, 2)
    f: np.ndarray  # (n_odd, 2)
    e: np.ndarray  # (n_odd, 4)
    incident: tuple  # incident odd vertices (level indices) of every even vertex

    def valence(self, k: int) -> int:
        return len(self.incident[k])


def _sort_by_distance(ids, origin, vertices):
    d = np.arctan2(np.linalg.norm(np.cross(vertices[ids], origin), axis=1), vertices[ids] @ origin)
    order = np.lexsort((ids, np.round(d, 12)))
    return np.asarray(ids)[order]


def neighbor_sets(mesh: SubdivisionMesh, level: int) -> NeighborSets:
    if not 1 <= level <= mesh.max_level:
        raise ValueError(f"level must be in [1, {mesh.max_level}]")
    cache = mesh._neighbors
    if level in cache:
        return cache[level]
    coarse = mesh[level - 1]
    fine = mesh[level]
    edge_faces = {}
    for t, tri in enumerate(coarse.triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_faces.setdefault((min(a, b), max(a, b)), []).append(t)

    def opposite(face, a, b):
        return next(int(x) for x in coarse.triangles[face] if x != a and x != b)

    def across(face, a, b):
        f1, f2 = edge_faces[(min(a, b), max(a, b))]
        return opposite(f2 if f1 == face else f1, a, b)

    nc = coarse.n_vertices
    vs, fs, es = [], [], []
    incident = [[] for _ in range(nc)]
    for i, (a, b) in enumerate(fine.parent_edge):
        m = nc + i
        origin = fine.vertices[m]
        faces = edge_faces[(min(a, b), max(a, b))]
        wings_f, wings_e = [], []
        for face in faces:
            c = opposite(face, a, b)
            wings_f.append(c)
            wings_e += [across(face, a, c), across(face, b, c)]
        vs.append(_sort_by_distance([a, b], origin, fine.vertices))
        fs.append(_sort_by_distance(wings_f, origin, fine.vertices))
        es.append(_sort_by_distance(wings_e, origin, fine.vertices))
        incident[a].append(m)
        incident[b].append(m)
    out = NeighborSets(level, np.array(vs), np.array(fs), np.array(es), tuple(np.array(x) for x in incident))
    cache[level] = out
    return out


def neighbor_class_matrix(mesh: SubdivisionMesh, level: int) -> np.ndarray:
    """Class code of every (coarse k, fine m) pair.

    Codes index :data:`NEIGHBOR_CLASSES`: 0 self, 1 v, 2 f, 3 e, 4 rest.
    A pair belongs to the first class that contains it.
    """
    nb = neighbor_sets(mesh, level)
    nc = mesh[level - 1].n_vertices
    nf = mesh[level].n_vertices
    code = np.full((nc, nf), 4, dtype=np.int8)
    for k in range(nc):
        code[k, k] = 0
    for i in range(nf - nc):
        m = nc + i
        for cls, ids in ((3, nb.e[i]), (2, nb.f[i]), (1, nb.v[i])):
            code[ids, m] = cls
    return code


# ---------------------------------------------------------------------------
# symmetry

def octahedral_group() -> list[np.ndarray]:
    """The 48 signed permutation matrices."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            g = np.zeros((3, 3))
            g[np.arange(3), perm] = signs
            mats.append(g)
    return mats


def _position_lookup(vertices, moved):
    """Index of each moved point among ``vertices``."""
    d = moved @ vertices.T
    idx = d.argmax(axis=1)
    if np.abs(vertices[idx] - moved).max() > 1e-9:
        raise ValueError("vertex set is not closed under the group element")
    return idx


@dataclass(frozen=True, eq=False)
class SymmetryOrbits:
    """Octahedral orbits of level-(j-1) vertices with the induced level-j permutations.

    ``perm[k]`` maps the representative's fine indices onto member ``k``'s:
    for an orbit-symmetric matrix M, ``M[k, perm[k][i]] == M[rep(k), i]``.
    """

    level: int
    representative: np.ndarray  # per coarse vertex
    perm: np.ndarray  # (n_coarse, n_fine)
    group_element: tuple
    column_classes: dict  # rep -> array of class codes over fine vertices

    @property
    def orbits(self) -> list[np.ndarray]:
        reps = sorted(set(self.representative.tolist()))
        return [np.flatnonzero(self.representative == r) for r in reps]


def vertex_permutations(mesh: SubdivisionMesh, level: int) -> list[np.ndarray]:
    """Permutation of the level vertices induced by each group element."""
    verts = mesh[level].vertices
    return [_position_lookup(verts, verts @ g.T) for g in octahedral_group()]


def symmetry_orbits(mesh: SubdivisionMesh, level: int) -> SymmetryOrbits:
    if not 1 <= level <= mesh.max_level:
        raise ValueError(f"level must be in [1, {mesh.max_level}]")
    cache = mesh._orbits
    if level in cache:
        return cache[level]
    group = octahedral_group()
    coarse = mesh[level - 1].vertices
    fine = mesh[level].vertices
    cperm = [_position_lookup(coarse, coarse @ g.T) for g in group]
    fperm = [_position_lookup(fine, fine @ g.T) for g in group]
    nc = len(coarse)
    rep = np.full(nc, -1)
    perm = np.zeros((nc, len(fine)), dtype=int)
    which = [None] * nc
    for k in range(nc):
        if rep[k] >= 0:
            continue
        for gi, cp in enumerate(cperm):
            target = cp[k]
            if rep[target] < 0:
                rep[target] = k
                perm[target] = fperm[gi]
                which[target] = gi
    code = neighbor_class_matrix(mesh, level)
    classes = {int(r): code[r].copy() for r in np.unique(rep)}
    out = SymmetryOrbits(level, rep, perm, tuple(which), classes)
    cache[level] = out
    return out


def mirror_permutation(mesh: SubdivisionMesh, level: int) -> np.ndarray:
    """Vertex permutation for the left/right mirror y -> -y."""
    verts = mesh[level].vertices
    return _position_lookup(verts, verts * np.array([1.0, -1.0, 1.0]))


# ---------------------------------------------------------------------------
# areas

def vertex_areas(mesh: SubdivisionMesh, level: int, method: str = "voronoi") -> np.ndarray:
    """Solid angle attributed to each vertex; the areas sum to 4 pi.

    ``voronoi`` uses spherical Voronoi cells, ``barycentric`` gives each vertex
    a third of the spherical area of its incident triangles.
    """
    lv = mesh[level]
    if method == "voronoi":
        from scipy.spatial import SphericalVoronoi

        sv = SphericalVoronoi(lv.vertices, radius=1.0, center=np.zeros(3))
        return sv.calculate_areas()
    if method == "barycentric":
        areas = np.zeros(lv.n_vertices)
        for tri in lv.triangles:
            areas[tri] += spherical_triangle_area(*lv.vertices[tri]) / 3.0
        return areas
    raise ValueError(f"unknown area method {method!r}")


def spherical_triangle_area(a, b, c) -> float:
    """Solid angle of a spherical triangle (Van Oosterom and Strackee)."""
    num = abs(np.dot(a, np.cross(b, c)))
    den = 1.0 + np.dot(a, b) + np.dot(b, c) + np.dot(c, a)
    return float(2.0 * np.arctan2(num, den))
