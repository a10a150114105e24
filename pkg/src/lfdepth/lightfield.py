"""Light-field container, manifest loading and a multi-plane synthetic renderer.

Conventions used throughout the package:

* ``views`` has shape ``(nu, nv, H, W, C)``; ``u`` is the horizontal angular
  axis (it shifts image columns) and ``v`` the vertical one (it shifts rows).
* angular offsets are ``u' = iu - (nu - 1) / 2`` and ``v' = iv - (nv - 1) / 2``.
* a scene point at central-view position ``(x, y)`` with disparity ``s`` is seen
  in view ``(u', v')`` at ``(x + u' s, y + v' s)``.  Nearer surfaces have larger
  disparity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io as lfio


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LightField:
    views: np.ndarray

    def __post_init__(self):
        views = np.asarray(self.views, dtype=np.float64)
        if views.ndim == 4:
            views = views[..., None]
        if views.ndim != 5:
            raise ValueError("views must have shape (nu, nv, H, W[, C])")
        nu, nv, h, w, c = views.shape
        if nu < 3 or nu % 2 == 0:
            raise ValueError(f"nu must be odd and >= 3, got {nu}")
        if nv < 1 or nv % 2 == 0:
            raise ValueError(f"nv must be odd and >= 1, got {nv}")
        if c not in (1, 3):
            raise ValueError(f"expected 1 or 3 channels, got {c}")
        if h < 1 or w < 1:
            raise ValueError("views must be non-empty")
        if not np.all(np.isfinite(views)) or views.min() < 0.0 or views.max() > 1.0:
            raise ValueError("radiance values must lie in [0, 1]")
        object.__setattr__(self, "views", _frozen(views))

    @property
    def nu(self):
        return self.views.shape[0]

    @property
    def nv(self):
        return self.views.shape[1]

    @property
    def shape(self):
        """Spatial size (H, W)."""
        return self.views.shape[2:4]

    @property
    def channels(self):
        return self.views.shape[4]

    @property
    def center(self):
        return ((self.nu - 1) // 2, (self.nv - 1) // 2)

    @property
    def max_offset(self):
        """Largest |u'| or |v'| over the angular grid."""
        return max((self.nu - 1) // 2, (self.nv - 1) // 2)

    def offsets(self):
        """Yield ``(iu, iv, u', v')`` for every view in a fixed order."""
        cu, cv = self.center
        for iu in range(self.nu):
            for iv in range(self.nv):
                yield iu, iv, iu - cu, iv - cv

    @property
    def central_view(self):
        cu, cv = self.center
        return self.views[cu, cv]

    @property
    def central_gray(self):
        """Channel-mean central view, (H, W)."""
        return self.central_view.mean(axis=2)


@dataclass(frozen=True)
class LabelGrid:
    s_min: float
    s_max: float
    n_labels: int

    def __post_init__(self):
        if int(self.n_labels) != self.n_labels or self.n_labels < 2:
            raise ValueError("n_labels must be an integer >= 2")
        if not self.s_min < self.s_max:
            raise ValueError("s_min must be smaller than s_max")

    @property
    def step(self):
        return (self.s_max - self.s_min) / (self.n_labels - 1)

    @property
    def labels(self):
        return self.s_min + np.arange(self.n_labels) * self.step

    def to_index(self, disparity):
        """Continuous label index, increasing with disparity (index 0 = s_min)."""
        return (np.asarray(disparity, dtype=np.float64) - self.s_min) / self.step

    def to_depth_index(self, disparity):
        """Continuous label index counted from the nearest label (index 0 = s_max),
        so it grows with scene depth."""
        return (self.s_max - np.asarray(disparity, dtype=np.float64)) / self.step

    def from_index(self, index):
        return self.s_min + np.asarray(index, dtype=np.float64) * self.step

    @property
    def max_abs(self):
        return max(abs(self.s_min), abs(self.s_max))


@dataclass(frozen=True)
class GroundTruth:
    disparity: np.ndarray
    occlusion_boundary: np.ndarray
    pobr: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "disparity", _frozen(self.disparity))
        object.__setattr__(self, "occlusion_boundary", _frozen(self.occlusion_boundary, bool))
        object.__setattr__(self, "pobr", _frozen(self.pobr, bool))


# --------------------------------------------------------------------------
# bilinear sampling


def _axis_taps(n, positions):
    """Left tap, right tap, fraction and validity for 1D sample positions."""
    i0 = np.floor(positions).astype(np.int64)
    valid = (positions >= 0.0) & (positions <= n - 1)
    i0 = np.clip(i0, 0, max(n - 2, 0))
    frac = positions - i0
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, frac, valid


def _lerp(a, b, f):
    # exact when a == b, which keeps constant regions exactly constant
    return a + f * (b - a)


def shift_bilinear(image, dx, dy):
    """Sample ``image`` at ``(x + dx, y + dy)`` for every pixel.

    Returns ``(shifted, valid)``; samples whose position falls outside the
    image are flagged invalid (their value is meaningless).
    """
    h, w = image.shape[:2]
    xs = np.arange(w) + dx
    ys = np.arange(h) + dy
    x0, x1, fx, vx = _axis_taps(w, xs)
    y0, y1, fy, vy = _axis_taps(h, ys)
    fy = fy.reshape((h,) + (1,) * (image.ndim - 1))
    fx = fx.reshape((1, w) + (1,) * (image.ndim - 2))
    rows = _lerp(image[y0], image[y1], fy)
    out = _lerp(rows[:, x0], rows[:, x1], fx)
    return out, vy[:, None] & vx[None, :]


def sample_bilinear(image, px, py):
    """Bilinear sample at one continuous position; ``None`` when out of bounds."""
    h, w = image.shape[:2]
    if not (0.0 <= px <= w - 1 and 0.0 <= py <= h - 1):
        return None
    x0 = min(int(np.floor(px)), max(w - 2, 0))
    y0 = min(int(np.floor(py)), max(h - 2, 0))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = px - x0, py - y0
    top = _lerp(image[y0, x0], image[y0, x1], fx)
    bottom = _lerp(image[y1, x0], image[y1, x1], fx)
    return _lerp(top, bottom, fy)


# --------------------------------------------------------------------------
# procedural textures and masks; all are callables of continuous (X, Y)


def _hash_uniform(ix, iy, seed):
    """Deterministic uniform [0, 1) value per integer lattice point."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
            iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        )
        h ^= np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * np.uint64(0x165667B19E3779F9)
        h ^= h >> np.uint64(30)
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(27)
        h *= np.uint64(0x94D049BB133111EB)
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _smooth_lattice(X, Y, cell, seed):
    gx, gy = X / cell, Y / cell
    ix, iy = np.floor(gx), np.floor(gy)
    fx, fy = gx - ix, gy - iy
    fx = fx * fx * (3.0 - 2.0 * fx)
    fy = fy * fy * (3.0 - 2.0 * fy)
    ix, iy = ix.astype(np.int64), iy.astype(np.int64)
    v00 = _hash_uniform(ix, iy, seed)
    v10 = _hash_uniform(ix + 1, iy, seed)
    v01 = _hash_uniform(ix, iy + 1, seed)
    v11 = _hash_uniform(ix + 1, iy + 1, seed)
    return _lerp(_lerp(v00, v10, fx), _lerp(v01, v11, fx), fy)


@dataclass(frozen=True)
class ValueNoise:
    """Seeded multi-octave value noise, ``mean +- amplitude``, clipped to [0, 1]."""

    seed: int
    cell: float = 4.0
    amplitude: float = 0.4
    mean: float = 0.5
    channels: int = 1
    octaves: int = 2

    def __call__(self, X, Y):
        out = []
        for c in range(self.channels):
            acc = np.zeros(np.shape(X))
            norm = 0.0
            for o in range(self.octaves):
                weight = 0.5**o
                acc += weight * _smooth_lattice(X, Y, self.cell / 2**o, self.seed * 7919 + c * 104729 + o)
                norm += weight
            out.append(self.mean + self.amplitude * (2.0 * acc / norm - 1.0))
        return np.clip(np.stack(out, axis=-1), 0.0, 1.0)


@dataclass(frozen=True)
class Constant:
    value: float | Sequence[float] = 0.5

    def __call__(self, X, Y):
        value = np.atleast_1d(np.asarray(self.value, dtype=np.float64))
        return np.broadcast_to(value, np.shape(X) + value.shape).copy()


@dataclass(frozen=True)
class ArrayTexture:
    """Bilinear lookup into an image; coordinates beyond the border clamp to the edge."""

    image: np.ndarray

    def __call__(self, X, Y):
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = img[..., None]
        h, w = img.shape[:2]
        X = np.clip(X, 0, w - 1)
        Y = np.clip(Y, 0, h - 1)
        x0 = np.clip(np.floor(X).astype(np.int64), 0, max(w - 2, 0))
        y0 = np.clip(np.floor(Y).astype(np.int64), 0, max(h - 2, 0))
        x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
        fx, fy = (X - x0)[..., None], (Y - y0)[..., None]
        top = _lerp(img[y0, x0], img[y0, x1], fx)
        bottom = _lerp(img[y1, x0], img[y1, x1], fx)
        return _lerp(top, bottom, fy)


@dataclass(frozen=True)
class WithConstantRegion:
    """``base`` texture replaced by a constant wherever ``region(X, Y)`` is true."""

    base: Callable
    region: Callable
    value: float | Sequence[float] = 0.5

    def __call__(self, X, Y):
        tex = self.base(X, Y)
        const = np.atleast_1d(np.asarray(self.value, dtype=np.float64))
        return np.where(self.region(X, Y)[..., None], const, tex)


@dataclass(frozen=True)
class HalfPlane:
    """Opaque where the coordinate along ``axis`` is below ``edge`` (side='low') or
    at/above it (side='high')."""

    edge: float
    axis: str = "x"
    side: str = "low"

    def __call__(self, X, Y):
        coord = X if self.axis == "x" else Y
        inside = coord < self.edge if self.side == "low" else coord >= self.edge
        return inside.astype(np.float64)

    def distance(self, X, Y):
        """Distance from the opaque half, zero inside it."""
        coord = X if self.axis == "x" else Y
        d = coord - self.edge if self.side == "low" else self.edge - coord
        return np.maximum(d, 0.0)


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    def __call__(self, X, Y):
        return ((X >= self.x0) & (X < self.x1) & (Y >= self.y0) & (Y < self.y1)).astype(np.float64)


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    def __call__(self, X, Y):
        return ((X - self.cx) ** 2 + (Y - self.cy) ** 2 < self.radius**2).astype(np.float64)


@dataclass(frozen=True)
class Plane:
    """Fronto-parallel layer. ``mask`` of None means fully opaque everywhere."""

    disparity: float
    texture: Callable
    mask: Callable | None = None

    def alpha(self, X, Y):
        if self.mask is None:
            return np.ones(np.shape(X))
        return np.asarray(self.mask(X, Y), dtype=np.float64)


# --------------------------------------------------------------------------
# rendering


def render_synthetic(scene, nu, nv, height, width, *, noise_sigma=0.0, seed=0, return_ids=False):
    """Render fronto-parallel planes into a light field with ground truth.

    ``scene`` lists planes front to back (nearest first).  Each view composites
    the planes translated by ``(u' s, v' s)``.  ``noise_sigma`` adds seeded
    Gaussian sensor noise to every view (clipped to [0, 1]).  With ``return_ids`` the per-view
    index of the frontmost opaque plane (alpha > 0.5, -1 for none) is also
    returned, shape ``(nu, nv, H, W)``.
    """
    scene = list(scene)
    if not scene:
        raise ValueError("scene must contain at least one plane")
    for k, plane in enumerate(scene):
        if not np.isfinite(plane.disparity):
            raise ValueError(f"plane {k}: disparity must be finite")

    Y, X = np.mgrid[0:height, 0:width].astype(np.float64)
    channels = None
    cu, cv = (nu - 1) // 2, (nv - 1) // 2
    views = None
    ids = np.full((nu, nv, height, width), -1, dtype=np.int64) if return_ids else None

    for iu in range(nu):
        for iv in range(nv):
            du, dv = iu - cu, iv - cv
            color = None
            transmit = np.ones((height, width))
            for k, plane in enumerate(scene):
                tx, ty = X - du * plane.disparity, Y - dv * plane.disparity
                alpha = plane.alpha(tx, ty)
                if alpha.min() < 0.0 or alpha.max() > 1.0:
                    raise ValueError(f"plane {k}: opacity outside [0, 1]")
                tex = np.asarray(plane.texture(tx, ty), dtype=np.float64)
                if tex.ndim == 2:
                    tex = tex[..., None]
                if channels is None:
                    channels = tex.shape[-1]
                    views = np.zeros((nu, nv, height, width, channels))
                elif tex.shape[-1] != channels:
                    raise ValueError(f"plane {k}: channel count differs from plane 0")
                contrib = (transmit * alpha)[..., None] * tex
                color = contrib if color is None else color + contrib
                if return_ids:
                    view_ids = ids[iu, iv]
                    view_ids[(view_ids < 0) & (alpha > 0.5)] = k
                transmit = transmit * (1.0 - alpha)
            views[iu, iv] = color
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        views = np.clip(views + rng.normal(0.0, noise_sigma, views.shape), 0.0, 1.0)

    # ground truth over the central view
    alphas = np.stack([p.alpha(X, Y) for p in scene])
    for k, a in enumerate(alphas):
        if not np.any(a > 0.0):
            raise ValueError(f"plane {k}: zero area in the central view")
    opaque = alphas > 0.5
    front = np.where(opaque.any(axis=0), opaque.argmax(axis=0), -1)
    disp = np.array([p.disparity for p in scene])
    gt_disp = np.where(front >= 0, disp[np.maximum(front, 0)], np.nan)

    pobr = np.zeros((height, width), dtype=bool)
    for p in range(1, len(scene)):
        on_p = front == p
        if not on_p.any():
            continue
        occluded = np.zeros_like(on_p)
        for iu in range(nu):
            for iv in range(nv):
                du, dv = iu - cu, iv - cv
                if du == 0 and dv == 0:
                    continue
                for q in range(p):
                    ds = scene[p].disparity - scene[q].disparity
                    if ds == 0.0:
                        continue
                    occluded |= scene[q].alpha(X + du * ds, Y + dv * ds) > 0.5
        pobr |= on_p & occluded

    boundary = _disparity_edges(gt_disp)
    lf = LightField(views)
    gt = GroundTruth(gt_disp, boundary, pobr)
    if return_ids:
        return lf, gt, ids
    return lf, gt


def _disparity_edges(disp):
    """Pixels whose disparity differs from a 4-neighbour."""
    edge = np.zeros(disp.shape, dtype=bool)
    dx = disp[:, 1:] != disp[:, :-1]
    dy = disp[1:, :] != disp[:-1, :]
    edge[:, 1:] |= dx
    edge[:, :-1] |= dx
    edge[1:, :] |= dy
    edge[:-1, :] |= dy
    return edge


def single_plane_scene(seed, disparity, channels=1):
    return [Plane(disparity, ValueNoise(seed, cell=4.0, amplitude=0.45, channels=channels))]


def occlusion_scene(
    seed,
    size=64,
    s_near=0.7,
    s_far=0.0,
    band=0.0,
    far_amplitude=0.001,
    near_amplitude=0.3,
    far_range=(0.15, 0.25),
    near_mean=0.6,
):
    """Two-plane occlusion test scene.

    A textured half-plane occluder at ``s_near`` over a dark far plane at
    ``s_far`` whose texture contrast is only ``far_amplitude`` (near
    textureless, yet its depth remains observable).  With ``band > 0`` the far
    plane is exactly constant within ``band`` pixels of the occluder edge.
    The seed picks the edge orientation and position, the far brightness and
    both textures.
    """
    rng = np.random.default_rng(seed)
    axis = ["x", "y"][int(rng.integers(2))]
    side = ["low", "high"][int(rng.integers(2))]
    # edges on pixel boundaries make the POBR width side-independent
    edge = float(rng.integers(int(size * 0.4), int(size * 0.6) + 1)) + 0.5
    occluder = HalfPlane(edge, axis, side)
    far_value = float(rng.uniform(*far_range))
    near = ValueNoise(int(rng.integers(1 << 30)), cell=3.0, amplitude=near_amplitude, mean=near_mean)
    far = ValueNoise(int(rng.integers(1 << 30)), cell=4.0, amplitude=far_amplitude, mean=far_value)
    if band > 0:

        def in_band(X, Y):
            coord = X if axis == "x" else Y
            return np.abs(coord - edge) < band

        far = WithConstantRegion(far, in_band, far_value)
    return [Plane(s_near, near, occluder), Plane(s_far, far)]


# --------------------------------------------------------------------------
# loading


def load_lightfield(manifest_path):
    """Load sub-aperture images listed by a ``key = value`` manifest.

    ``cols`` is the horizontal angular count (nu) and ``rows`` the vertical one
    (nv); ``pattern`` is expanded with each (row, col) relative to the manifest
    directory.  Returns ``(LightField, gt_disparity or None)``.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise lfio.ManifestError(f"manifest not found: {manifest_path}")
    entries = lfio.parse_manifest(manifest_path)
    try:
        rows, cols = int(entries["rows"]), int(entries["cols"])
    except ValueError as exc:
        raise lfio.ManifestError(f"{manifest_path}: rows/cols must be integers") from exc
    if rows % 2 == 0 or cols % 2 == 0:
        raise lfio.ManifestError(f"even angular count: rows={rows}, cols={cols}")
    if cols < 3 or rows < 1:
        raise lfio.ManifestError(f"angular grid too small: rows={rows}, cols={cols}")

    base = manifest_path.parent
    views = None
    for row in range(rows):
        for col in range(cols):
            path = base / lfio.format_view_name(entries["pattern"], row, col)
            if not path.is_file():
                raise lfio.ManifestError(f"missing view (row={row}, col={col}): {path}")
            img = lfio.read_image(path)
            if views is None:
                views = np.zeros((cols, rows) + img.shape)
            elif img.shape != views.shape[2:]:
                raise lfio.ManifestError(
                    f"size mismatch at (row={row}, col={col}): {img.shape} vs {views.shape[2:]}"
                )
            views[col, row] = img

    gt = None
    if "gt_disparity" in entries:
        gt_path = base / entries["gt_disparity"]
        if not gt_path.is_file():
            raise lfio.ManifestError(f"missing ground truth: {gt_path}")
        gt = lfio.read_pfm(gt_path).astype(np.float64)
        if gt.shape != views.shape[2:4]:
            raise lfio.ManifestError(f"ground truth size {gt.shape} differs from views {views.shape[2:4]}")
    return LightField(views), gt


def save_lightfield(out_dir, lf, gt=None, bits=16, pattern="view_%(row)02d_%(col)02d.png"):
    """Write views plus a manifest (and optional PFM ground truth) to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for iu, iv, _, _ in lf.offsets():
        lfio.write_image(out_dir / lfio.format_view_name(pattern, iv, iu), lf.views[iu, iv], bits=bits)
    lines = [f"rows = {lf.nv}", f"cols = {lf.nu}", f"pattern = {pattern}"]
    if gt is not None:
        lfio.write_pfm(out_dir / "gt_disparity.pfm", gt.disparity)
        lfio.write_image(out_dir / "gt_pobr.png", gt.pobr.astype(np.float64))
        lfio.write_image(out_dir / "gt_boundary.png", gt.occlusion_boundary.astype(np.float64))
        lines.append("gt_disparity = gt_disparity.pfm")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
