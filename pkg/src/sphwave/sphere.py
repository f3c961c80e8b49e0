"""Spherical geometry, real spherical harmonics and analytic Ambisonics decoders.

Conventions
-----------
Azimuth is measured counterclockwise from the front (+x), so +90 deg is the
left (+y). Elevation is measured upwards from the horizontal plane.
Spherical harmonics are real, ACN ordered (``index = l**2 + l + m``) and N3D
normalised, without the Condon-Shortley phase.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere, angles in radians."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        el = float(self.elevation)
        if not -math.pi / 2 - 1e-12 <= el <= math.pi / 2 + 1e-12:
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        el = min(max(el, -math.pi / 2), math.pi / 2)
        az = wrap_azimuth(float(self.azimuth))
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def from_degrees(cls, azimuth, elevation):
        return cls(math.radians(azimuth), math.radians(elevation))

    @classmethod
    def from_vector(cls, xyz):
        x, y, z = (float(c) for c in xyz)
        r = math.sqrt(x * x + y * y + z * z)
        if r == 0.0:
            raise ValueError("zero vector has no direction")
        return cls(math.atan2(y, x), math.asin(max(-1.0, min(1.0, z / r))))

    @property
    def xyz(self) -> np.ndarray:
        return angles_to_vectors(self.azimuth, self.elevation)

    def __iter__(self):
        return iter((self.azimuth, self.elevation))


def wrap_azimuth(az: float) -> float:
    """Map an angle to (-pi, pi]."""
    az = math.fmod(az, 2 * math.pi)
    if az <= -math.pi:
        az += 2 * math.pi
    elif az > math.pi:
        az -= 2 * math.pi
    return az


def angles_to_vectors(azimuth, elevation) -> np.ndarray:
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def vectors_to_angles(xyz):
    xyz = np.asarray(xyz, dtype=float)
    r = np.linalg.norm(xyz, axis=-1)
    az = np.arctan2(xyz[..., 1], xyz[..., 0])
    el = np.arcsin(np.clip(xyz[..., 2] / r, -1.0, 1.0))
    return az, el


def as_vectors(dirs) -> np.ndarray:
    """Coerce a Direction, a list of Directions or an (n, 3) array to unit vectors."""
    if isinstance(dirs, Direction):
        return dirs.xyz[None, :]
    if isinstance(dirs, np.ndarray) and dirs.dtype != object:
        v = np.atleast_2d(np.asarray(dirs, dtype=float))
        return v / np.linalg.norm(v, axis=1, keepdims=True)
    dirs = list(dirs)
    if not dirs:
        return np.zeros((0, 3))
    if isinstance(dirs[0], Direction):
        return np.array([d.xyz for d in dirs])
    v = np.atleast_2d(np.asarray(dirs, dtype=float))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# spherical harmonics

def n_channels(order: int) -> int:
    return (order + 1) ** 2


def acn(l: int, m: int) -> int:
    return l * l + l + m


def _legendre_table(order, x):
    """Associated Legendre P_l^m(x) for 0 <= m <= l <= order, no Condon-Shortley phase.

    Returns an array of shape (order+1, order+1, len(x)) indexed [l, m].
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((order + 1, order + 1) + x.shape)
    P[0, 0] = 1.0
    for m in range(1, order + 1):
        P[m, m] = (2 * m - 1) * s * P[m - 1, m - 1]
    for m in range(0, order):
        P[m + 1, m] = (2 * m + 1) * x * P[m, m]
    for m in range(0, order + 1):
        for l in range(m + 2, order + 1):
            P[l, m] = ((2 * l - 1) * x * P[l - 1, m] - (l + m - 1) * P[l - 2, m]) / (l - m)
    return P


def sh_matrix(order: int, dirs) -> np.ndarray:
    """Real N3D spherical harmonics sampled at many directions.

    Parameters
    ----------
    order : int
        Maximum degree L.
    dirs : Direction, sequence of Direction or (n, 3) array of unit vectors

    Returns
    -------
    (n, (L+1)**2) ndarray
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    v = as_vectors(dirs)
    az = np.arctan2(v[:, 1], v[:, 0])
    sin_el = np.clip(v[:, 2], -1.0, 1.0)
    P = _legendre_table(order, sin_el)
    Y = np.empty((v.shape[0], n_channels(order)))
    for l in range(order + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            norm = math.sqrt((2 * l + 1) * (2 - (am == 0))
                             * math.factorial(l - am) / math.factorial(l + am))
            if m > 0:
                trig = np.cos(am * az)
            elif m < 0:
                trig = np.sin(am * az)
            else:
                trig = 1.0
            Y[:, acn(l, m)] = norm * P[l, am] * trig
    Y[:, 0] = 1.0
    return Y


def sh_vector(order: int, direction) -> np.ndarray:
    """Spherical harmonics up to ``order`` at one direction, ACN/N3D."""
    return sh_matrix(order, direction)[0]


def encode_plane_wave(order: int, direction, gain: float = 1.0) -> np.ndarray:
    """Ambisonics coefficients of a plane wave of amplitude ``gain``."""
    return gain * sh_vector(order, direction)


def channel_degrees(order: int) -> np.ndarray:
    """Degree l of every ACN channel."""
    return np.repeat(np.arange(order + 1), 2 * np.arange(order + 1) + 1)


def channel_mirror_signs(order: int) -> np.ndarray:
    """Sign flip per channel under the left/right mirror (azimuth -> -azimuth)."""
    signs = np.ones(n_channels(order))
    for l in range(order + 1):
        for m in range(-l, 0):
            signs[acn(l, m)] = -1.0
    return signs


# ---------------------------------------------------------------------------
# distances and sampling

def haversine(a, b) -> float:
    """Great-circle angle between two directions, in [0, pi]."""
    az1, el1 = a
    az2, el2 = b
    h = (math.sin((el2 - el1) / 2) ** 2
         + math.cos(el1) * math.cos(el2) * math.sin((az2 - az1) / 2) ** 2)
    return 2 * math.asin(min(1.0, math.sqrt(max(h, 0.0))))


def angular_distance(u, v) -> np.ndarray:
    """Pairwise great-circle angles between two sets of unit vectors, shape (len(u), len(v)).

    Uses the atan2 form, which is accurate near 0 and pi.
    """
    u = as_vectors(u)
    v = as_vectors(v)
    cross = np.linalg.norm(np.cross(u[:, None, :], v[None, :, :]), axis=-1)
    dot = u @ v.T
    return np.arctan2(cross, dot)


def sample_directions(count: int, scheme: str = "fibonacci") -> list[Direction]:
    """Evaluation directions.

    ``horizontal_ring`` and ``vertical_ring`` are equally spaced great circles
    starting at the front; the vertical ring passes through the zenith.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return [Direction.from_vector(v) for v in sample_vectors(count, scheme)]


def sample_vectors(count: int, scheme: str = "fibonacci") -> np.ndarray:
    t = 2 * np.pi * np.arange(count) / count
    if scheme == "horizontal_ring":
        return np.stack([np.cos(t), np.sin(t), np.zeros(count)], axis=1)
    if scheme == "vertical_ring":
        return np.stack([np.cos(t), np.zeros(count), np.sin(t)], axis=1)
    if scheme == "fibonacci":
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValueError(f"unknown sampling scheme {scheme!r}")


def ring_angles(count: int) -> np.ndarray:
    """Angles (radians) of the ring returned by the ring sampling schemes."""
    return 2 * np.pi * np.arange(count) / count


# ---------------------------------------------------------------------------
# layouts

@dataclass
class SpeakerLayout:
    names: list[str]
    directions: list[Direction]
    distances: list[float | None] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            raise ValueError("a layout needs at least one speaker")
        if len(self.names) != len(self.directions):
            raise ValueError("names and directions differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("speaker names must be unique")
        if not self.distances:
            self.distances = [None] * len(self.names)
        u = self.vectors
        if len(u) > 1:
            d = angular_distance(u, u)
            np.fill_diagonal(d, np.inf)
            if d.min() < 1e-9:
                raise ValueError("two speakers share the same direction")

    @classmethod
    def from_vectors(cls, xyz, names=None):
        xyz = as_vectors(xyz)
        names = names or [f"s{i}" for i in range(len(xyz))]
        return cls(list(names), [Direction.from_vector(v) for v in xyz])

    @property
    def vectors(self) -> np.ndarray:
        return np.array([d.xyz for d in self.directions])

    def __len__(self):
        return len(self.names)

    def mirror_map(self, tol_deg: float = 1.0) -> list[int] | None:
        """Index of each speaker's left/right mirror image, or None if the layout is asymmetric."""
        u = self.vectors
        mirrored = u * np.array([1.0, -1.0, 1.0])
        d = angular_distance(mirrored, u)
        partner = d.argmin(axis=1)
        if np.degrees(d[np.arange(len(u)), partner]).max() > tol_deg:
            return None
        if not np.array_equal(partner[partner], np.arange(len(u))):
            return None
        return [int(p) for p in partner]


def read_layout(path) -> SpeakerLayout:
    """Read ``name azimuth_deg elevation_deg [distance_m]`` lines."""
    names, dirs, dists = [], [], []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ValueError(f"{path}:{lineno}: expected 'name az el [dist]'")
        try:
            az, el = float(parts[1]), float(parts[2])
            dist = float(parts[3]) if len(parts) == 4 else None
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not (math.isfinite(az) and math.isfinite(el)):
            raise ValueError(f"{path}:{lineno}: non-finite angle")
        names.append(parts[0])
        dirs.append(Direction.from_degrees(az, el))
        dists.append(dist)
    return SpeakerLayout(names, dirs, dists)


def write_layout(layout: SpeakerLayout, path) -> None:
    lines = []
    for name, d, dist in zip(layout.names, layout.directions, layout.distances):
        row = f"{name} {math.degrees(d.azimuth):.17g} {math.degrees(d.elevation):.17g}"
        if dist is not None:
            row += f" {dist:.17g}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def builtin_layout(name: str) -> SpeakerLayout:
    """Layouts shipped with the package: octahedron, icosahedron, t7_48, 5.0, 7.0.4."""
    if name == "octahedron":
        v = np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
        return SpeakerLayout.from_vectors(v)
    if name == "icosahedron":
        return SpeakerLayout.from_vectors(icosahedron_vertices())
    if name == "t7_48":
        return SpeakerLayout.from_vectors(t_design_48())
    path = Path(__file__).parent / "data" / f"{name}.txt"
    if not path.exists():
        raise ValueError(f"no built-in layout named {name!r}")
    return read_layout(path)


def icosahedron_vertices() -> np.ndarray:
    g = (1 + math.sqrt(5)) / 2
    v = []
    for a in (-1, 1):
        for b in (-g, g):
            v += [(0, a, b), (a, b, 0), (b, 0, a)]
    v = np.array(v, float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def t_design_48() -> np.ndarray:
    """48-point spherical 7-design: the signed permutations of one point.

    The squared coordinates are the roots of t^3 - t^2 + t/5 - 1/105, which
    makes every octahedrally invariant harmonic of degree 4 and 6 average to 0.
    """
    sq = np.sort(np.roots([1.0, -1.0, 0.2, -1.0 / 105.0]).real)
    base = np.sqrt(sq)
    pts = set()
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((-1, 1), repeat=3):
            pts.add(tuple(np.round(np.array(signs) * base[list(perm)], 15)))
    return np.array(sorted(pts))


# ---------------------------------------------------------------------------
# analytic decoders

def encoding_matrix(order: int, layout_or_dirs) -> np.ndarray:
    """C with shape ((L+1)**2, N): spherical harmonics sampled at speaker directions."""
    dirs = layout_or_dirs.vectors if isinstance(layout_or_dirs, SpeakerLayout) else layout_or_dirs
    return sh_matrix(order, dirs).T


def decode_analytic(layout: SpeakerLayout, order: int, mode: str = "projection",
                    regularization: float = 0.0) -> np.ndarray:
    """Projection (C^T / N) or pseudoinverse (C^T (C C^T + lambda I)^-1) decoder.

    Returns the speakers x channels gain matrix.
    """
    C = encoding_matrix(order, layout)
    N = C.shape[1]
    if mode in ("projection", "proj"):
        return C.T / N
    if mode not in ("pseudoinverse", "pinv"):
        raise ValueError(f"unknown decoding mode {mode!r}")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    G = C @ C.T + regularization * np.eye(C.shape[0])
    if np.linalg.matrix_rank(G, tol=1e-10 * max(1.0, np.abs(G).max())) < G.shape[0]:
        raise np.linalg.LinAlgError(
            "C C^T is singular for this layout and order; use a Tikhonov regularization > 0")
    return np.linalg.solve(G, C).T


def degree_weights(order: int, scheme: str = "basic") -> np.ndarray:
    """Per-degree gains w_l for basic, max-rE and in-phase decoding (3-D)."""
    if scheme == "basic":
        return np.ones(order + 1)
    if order < 1:
        raise ValueError("modified decodings need order >= 1")
    if scheme in ("max_re", "maxre"):
        roots = np.polynomial.legendre.legroots([0] * (order + 1) + [1])
        rho = roots.max()
        return np.array([np.polynomial.legendre.legval(rho, [0] * l + [1])
                         for l in range(order + 1)])
    if scheme in ("in_phase", "inphase"):
        L = order
        return np.array([math.factorial(L) * math.factorial(L + 1)
                         / (math.factorial(L + l + 1) * math.factorial(L - l))
                         for l in range(L + 1)])
    raise ValueError(f"unknown weighting scheme {scheme!r}")


def apply_degree_weights(D: np.ndarray, order: int, weights) -> np.ndarray:
    """Scale the columns of an Ambisonics decoder by per-degree weights."""
    return D * np.asarray(weights)[channel_degrees(order)][None, :]
