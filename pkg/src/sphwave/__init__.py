"""Spatial audio formats on the sphere: Ambisonics, spherical wavelets and optimised decoders."""

from .sphere import (
    Direction,
    SpeakerLayout,
    builtin_layout,
    decode_analytic,
    degree_weights,
    encode_plane_wave,
    haversine,
    read_layout,
    sample_directions,
    sh_vector,
)
from .mesh import build_mesh, neighbor_sets, symmetry_orbits, vertex_areas
from .wavelets import FilterBank, build_filter_bank, forward_transform, inverse_transform

__version__ = "0.1.0"

__all__ = [
    "Direction", "SpeakerLayout", "builtin_layout", "decode_analytic", "degree_weights",
    "encode_plane_wave", "haversine", "read_layout", "sample_directions", "sh_vector",
    "build_mesh", "neighbor_sets", "symmetry_orbits", "vertex_areas",
    "FilterBank", "build_filter_bank", "forward_transform", "inverse_transform",
]
