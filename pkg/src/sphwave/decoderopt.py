"""Psychoacoustic observables and numerical decoder optimisation.

A decoder maps the channels of a linear spatial format (Ambisonics or a
spherical-wavelet format) to loudspeaker feeds. Its quality is judged by the
pressure, velocity, energy and intensity it reproduces at the listening
position for plane waves from many directions.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import sphere
from . import wavelets as wl
from ._kernels import TERMS, idhoa_cost_grad
from .mesh import mirror_permutation
from .optcore import LinearTemplate, MinimizeOptions, minimize, mirror_template

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# formats

@dataclass(frozen=True, eq=False)
class AmbisonicsFormat:
    order: int

    @property
    def n_channels(self) -> int:
        return sphere.n_channels(self.order)

    @property
    def label(self) -> str:
        return f"ambi:{self.order}"

    def encode(self, dirs) -> np.ndarray:
        """Channels x directions encoding matrix."""
        return sphere.sh_matrix(self.order, dirs).T

    def mirror(self):
        """Column permutation and signs realising the left/right mirror."""
        return np.arange(self.n_channels), sphere.channel_mirror_signs(self.order)

    def default_directions(self) -> np.ndarray:
        return sphere.sample_vectors(900, "fibonacci")


@dataclass(frozen=True, eq=False)
class SwfFormat:
    """Spherical-wavelet format: VBAP onto the finest mesh, then analysis down to ``level``."""

    bank: wl.FilterBank
    level: int

    def __post_init__(self):
        if not 0 <= self.level <= self.bank.finest:
            raise ValueError(f"truncation level must be in [0, {self.bank.finest}]")

    @property
    def mesh(self):
        return self.bank.mesh

    @property
    def n_channels(self) -> int:
        return self.mesh[self.level].n_vertices

    @property
    def label(self) -> str:
        return f"swf:{self.bank.family}:{self.level}"

    @property
    def channel_vectors(self) -> np.ndarray:
        return self.mesh[self.level].vertices

    def encode(self, dirs) -> np.ndarray:
        fine = self.mesh[self.bank.finest]
        G = wl.vbap_gain_matrix(fine.vertices, fine.triangles, sphere.as_vectors(dirs))
        return wl.analysis_matrix(self.bank, self.level) @ G

    def mirror(self):
        return mirror_permutation(self.mesh, self.level), np.ones(self.n_channels)

    def default_directions(self) -> np.ndarray:
        return self.mesh[self.bank.finest].vertices.copy()


def parse_format(spec: str, mesh_levels: int = 2):
    """``ambi:L`` or ``swf:FAMILY:LEVEL`` (finest mesh level ``mesh_levels``)."""
    from .mesh import build_mesh

    parts = spec.split(":")
    try:
        if parts[0] == "ambi" and len(parts) == 2:
            return AmbisonicsFormat(int(parts[1]))
        if parts[0] == "swf" and len(parts) == 3:
            level = int(parts[2])
            if level > max(mesh_levels, 1):
                raise ValueError(f"level {level} exceeds the mesh depth {max(mesh_levels, 1)}")
            bank = wl.build_filter_bank(build_mesh(max(mesh_levels, 1)), parts[1])
            return SwfFormat(bank, level)
    except ValueError as exc:
        raise ValueError(f"bad format {spec!r}: {exc}") from None
    raise ValueError(f"bad format {spec!r}; expected ambi:L or swf:FAMILY:LEVEL")


# ---------------------------------------------------------------------------
# decoding matrices

@dataclass(frozen=True, eq=False)
class DecodingMatrix:
    gains: np.ndarray  # speakers x channels
    format: object
    layout: sphere.SpeakerLayout
    band: str = "universal"

    def __post_init__(self):
        if self.gains.shape != (len(self.layout), self.format.n_channels):
            raise ValueError(
                f"gains have shape {self.gains.shape}, expected "
                f"{(len(self.layout), self.format.n_channels)}")
        if self.band not in ("lf", "hf", "universal"):
            raise ValueError(f"unknown band {self.band!r}")


def format_header(fmt) -> str:
    if isinstance(fmt, AmbisonicsFormat):
        return f"format=ambisonics order={fmt.order}"
    return f"format=swf family={fmt.bank.family} level={fmt.level} mesh={fmt.bank.finest}"


def save_decoder(D: DecodingMatrix, path, layout_name: str = "layout") -> None:
    rows, cols = D.gains.shape
    header = (f"# layout={layout_name} {format_header(D.format)} band={D.band} "
              f"rows={rows} cols={cols} speakers={','.join(D.layout.names)}")
    wl.write_matrix_csv(path, D.gains, header)


def load_decoder_gains(path):
    """Header fields and gain matrix of a decoder CSV."""
    return wl.read_matrix_csv(path)


# ---------------------------------------------------------------------------
# observables

@dataclass
class Observables:
    P: np.ndarray
    E: np.ndarray
    vR: np.ndarray
    vT: np.ndarray
    IR: np.ndarray
    IT: np.ndarray
    Eph: np.ndarray
    signals: np.ndarray  # directions x speakers
    errors: list = field(default_factory=list)  # indices where E == 0


def speaker_signals(D: DecodingMatrix, dirs) -> np.ndarray:
    """Speaker feeds (directions x speakers) for plane waves from ``dirs``."""
    return (D.gains @ D.format.encode(dirs)).T


def observables_from_signals(S, speaker_vectors, dirs) -> Observables:
    S = np.atleast_2d(S)
    U = np.asarray(speaker_vectors, dtype=float)
    d = sphere.as_vectors(dirs)
    E = (S * S).sum(axis=1)
    P = S.sum(axis=1)
    v = S @ U
    vR = np.einsum("jk,jk->j", v, d)
    vT = np.linalg.norm(np.cross(v, d), axis=1)
    bad = np.flatnonzero(E <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        I = ((S * S) @ U) / E[:, None]
    IR = np.einsum("jk,jk->j", I, d)
    IT = np.linalg.norm(np.cross(I, d), axis=1)
    IR[bad] = np.nan
    IT[bad] = np.nan
    neg = np.minimum(S, 0.0)
    return Observables(P, E, vR, vT, IR, IT, (neg * neg).sum(axis=1), S, bad.tolist())


def observables(D: DecodingMatrix, dirs) -> Observables:
    return observables_from_signals(speaker_signals(D, dirs), D.layout.vectors, dirs)


# ---------------------------------------------------------------------------
# cost

@dataclass(frozen=True)
class CostWeights:
    alpha_P: float = 0.0
    alpha_VR: float = 0.0
    alpha_VT: float = 0.0
    alpha_E: float = 0.0
    alpha_IR: float = 0.0
    alpha_IT: float = 0.0
    alpha_ph: float = 0.0
    beta: float = 0.25
    d_tilde: float | None = None  # radians; None -> 1.5 x mean nearest-speaker distance
    preset: str = "custom"

    def __post_init__(self):
        a = self.alphas
        if (a < 0).any() or not np.isfinite(a).all():
            raise ValueError("cost weights must be finite and non-negative")
        if not (a > 0).any():
            raise ValueError("at least one cost weight must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([getattr(self, f"alpha_{t}") for t in TERMS], dtype=float)


PRESETS = {
    "smooth": dict(alpha_E=8.0, alpha_IR=1.0, alpha_IT=0.5, alpha_ph=2.0),
    "focus": dict(alpha_E=0.5, alpha_IR=4.0, alpha_IT=0.5, alpha_ph=2.0),
    "lf": dict(alpha_P=1.0, alpha_VR=1.0, alpha_VT=1.0),
    "max_re": dict(alpha_E=1.0, alpha_IR=1.0, alpha_IT=1.0),
}


def preset_weights(name: str, **overrides) -> CostWeights:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return CostWeights(**{**PRESETS[name], **overrides, "preset": name})


def default_d_tilde(layout: sphere.SpeakerLayout) -> float:
    """1.5 times the mean great-circle distance from each speaker to its nearest neighbour."""
    if len(layout) < 2:
        return np.pi
    d = sphere.angular_distance(layout.vectors, layout.vectors)
    np.fill_diagonal(d, np.inf)
    return 1.5 * float(d.min(axis=1).mean())


def mask_weights(layout, dirs, beta: float = 0.25, d_tilde: float | None = None) -> np.ndarray:
    """1 near a speaker (closer than d_tilde), beta elsewhere."""
    d_tilde = default_d_tilde(layout) if d_tilde is None else d_tilde
    dist = sphere.angular_distance(sphere.as_vectors(dirs), layout.vectors).min(axis=1)
    return np.where(dist < d_tilde, 1.0, beta)


class IdhoaCost:
    """Objective over decoder gains for fixed directions and weights.

    Calling the object with a speakers x channels matrix returns (f, grad).
    """

    def __init__(self, layout, fmt, weights: CostWeights, dirs=None):
        self.layout = layout
        self.format = fmt
        self.weights = weights
        self.dirs = fmt.default_directions() if dirs is None else sphere.as_vectors(dirs)
        self.enc = fmt.encode(self.dirs)  # channels x directions
        self.U = layout.vectors
        self.w = mask_weights(layout, self.dirs, weights.beta, weights.d_tilde)
        self.alpha = weights.alphas
        self.shape = (len(layout), fmt.n_channels)

    def evaluate(self, gains):
        """(f, gradient, unweighted terms)."""
        gains = np.asarray(gains, dtype=float).reshape(self.shape)
        S = (gains @ self.enc).T
        f, terms, G = idhoa_cost_grad(S, self.U, self.dirs, self.w, self.alpha)
        return f, G.T @ self.enc.T, terms

    def __call__(self, gains):
        f, g, _ = self.evaluate(gains)
        return f, g


def idhoa_cost(D: DecodingMatrix, dirs, weights: CostWeights):
    """Objective value and its gradient with respect to the gains of ``D``."""
    return IdhoaCost(D.layout, D.format, weights, dirs)(D.gains)


# ---------------------------------------------------------------------------
# optimisation

@dataclass
class DecoderOptions:
    band: str = "hf"
    symmetric: bool = True
    mirror_tol_deg: float = 1.0
    seed: int = 0
    directions: object = None
    init_scale: float = 0.1
    regularization: float = 0.0
    max_iter: int = 20
    max_inner: int = 3000
    tol_g: float = 1e-7


@dataclass
class DecoderReport:
    f_init: float
    f_final: float
    init: str
    converged: bool
    paired: bool
    message: str = ""
    terms: dict = field(default_factory=dict)


def symmetry_template(layout, fmt, tol_deg: float = 1.0) -> LinearTemplate | None:
    """Ties mirrored speaker rows: D[mirror(i)] = D[i] M. None for asymmetric layouts."""
    row_map = layout.mirror_map(tol_deg)
    if row_map is None:
        return None
    col_map, signs = fmt.mirror()
    return mirror_template(len(layout), fmt.n_channels, row_map, col_map, signs)


def analytic_candidates(layout, fmt: AmbisonicsFormat, band: str, regularization=0.0):
    scheme = "basic" if band == "lf" else "max_re"
    w = sphere.degree_weights(fmt.order, scheme) if fmt.order >= 1 else np.ones(1)
    out = {"projection": sphere.decode_analytic(layout, fmt.order, "projection")}
    try:
        out["pseudoinverse"] = sphere.decode_analytic(layout, fmt.order, "pseudoinverse", regularization)
    except np.linalg.LinAlgError:
        log.info("pseudoinverse unavailable for this layout; using projection only")
    return {k: sphere.apply_degree_weights(v, fmt.order, w) for k, v in out.items()}


def optimize_decoder(layout, fmt, weights: CostWeights, options: DecoderOptions | None = None):
    """Numerically optimised decoder and a report of the objective before and after."""
    opts = options or DecoderOptions()
    if isinstance(fmt, SwfFormat) and len(layout) >= len(fmt.default_directions()):
        raise ValueError("SWF decoding needs fewer speakers than finest-mesh points")
    cost = IdhoaCost(layout, fmt, weights, opts.directions)

    if isinstance(fmt, AmbisonicsFormat):
        cands = analytic_candidates(layout, fmt, opts.band, opts.regularization)
        scored = {k: cost(v)[0] for k, v in cands.items()}
        init_name = min(scored, key=scored.get)
        D0 = cands[init_name]
    else:
        rng = np.random.default_rng(opts.seed)
        D0 = opts.init_scale * rng.random(cost.shape)
        init_name = f"random(seed={opts.seed})"

    tmpl = symmetry_template(layout, fmt, opts.mirror_tol_deg) if opts.symmetric else None
    paired = tmpl is not None
    if tmpl is None:
        if opts.symmetric:
            log.info("layout is not left/right symmetric; pairing disabled")
        tmpl = LinearTemplate.full(cost.shape)
    else:
        D0 = tmpl.project(D0)

    f_init = cost(D0)[0]

    def reduced(theta):
        f, g = cost(tmpl.upscale(theta))
        return f, tmpl.pullback(g)

    theta, rep = minimize(reduced, tmpl.downscale(D0), None,
                          MinimizeOptions(max_iter=opts.max_iter, max_inner=opts.max_inner,
                                          tol_g=opts.tol_g, seed=opts.seed))
    gains = tmpl.upscale(theta)
    f_final, _, terms = cost.evaluate(gains)
    if f_final > f_init:
        gains, f_final = D0, f_init
        _, _, terms = cost.evaluate(gains)
    if not rep.converged:
        warnings.warn(f"decoder optimisation did not fully converge: {rep.message}", RuntimeWarning)
    D = DecodingMatrix(gains, fmt, layout, opts.band if opts.band in ("lf", "hf") else "universal")
    report = DecoderReport(f_init, float(f_final), init_name, rep.converged, paired, rep.message,
                           dict(zip(TERMS, map(float, terms))))
    return D, report


def dual_band_decoders(layout, fmt, presets=("lf", "smooth"), options: DecoderOptions | None = None):
    """LF and HF decoders optimised with velocity-type and energy-type weights respectively."""
    opts = options or DecoderOptions()
    lf_w = presets[0] if isinstance(presets[0], CostWeights) else preset_weights(presets[0])
    hf_w = presets[1] if isinstance(presets[1], CostWeights) else preset_weights(presets[1])
    D_lf, r_lf = optimize_decoder(layout, fmt, lf_w, replace(opts, band="lf"))
    D_hf, r_hf = optimize_decoder(layout, fmt, hf_w, replace(opts, band="hf"))
    return (D_lf, D_hf), (r_lf, r_hf)
