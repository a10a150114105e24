"""Scene descriptions for the renderer, and the reference setup for the
two-plane occlusion family used by the acceptance suite.

A scene mapping either names a preset::

    preset = "occlusion"    # or "single_plane"
    seed = 3

or lists planes front to back::

    [[plane]]
    disparity = 0.75
    texture = { type = "value_noise", seed = 1, cell = 3, amplitude = 0.3, mean = 0.6 }
    mask = { type = "half_plane", edge = 32, axis = "x", side = "low" }

Common keys: ``nu``, ``nv`` (default 9), ``height``, ``width`` (default 64),
``noise_sigma`` (default 0) and ``seed``.
"""

from __future__ import annotations

import dataclasses

from .lightfield import (
    Constant,
    Disk,
    HalfPlane,
    LabelGrid,
    Plane,
    Rectangle,
    ValueNoise,
    occlusion_scene,
    render_synthetic,
    single_plane_scene,
)
from .pipeline import PipelineConfig
from .superpixel import SpRegParams

_TEXTURES = {"value_noise": ValueNoise, "constant": Constant}
_MASKS = {"half_plane": HalfPlane, "rectangle": Rectangle, "disk": Disk}

# Occlusion family: 5-label gap on a 0.15 px grid, occluder at 0.75 px.
OCCLUSION_GRID = LabelGrid(-0.6, 1.35, 14)
OCCLUSION_S_NEAR = 0.75
OCCLUSION_S_FAR = 0.0
OCCLUSION_VIEWS = 9


def occlusion_config():
    """Pipeline settings the occlusion family is evaluated with."""
    return PipelineConfig(
        sp=SpRegParams(lam=0.01, gradient="central"),
        labels=OCCLUSION_GRID,
        eta=0.05,
    )


def render_occlusion(seed, size=64, noise_sigma=0.0):
    """``(LightField, GroundTruth)`` for one member of the occlusion family."""
    scene = occlusion_scene(seed, size=size, s_near=OCCLUSION_S_NEAR, s_far=OCCLUSION_S_FAR)
    n = OCCLUSION_VIEWS
    return render_synthetic(scene, n, n, size, size, noise_sigma=noise_sigma, seed=seed)


def _build(kind_table, spec, what):
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in kind_table:
        raise ValueError(f"unknown {what} type {kind!r}; expected one of {sorted(kind_table)}")
    cls = kind_table[kind]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(spec) - names
    if unknown:
        raise ValueError(f"unknown {what} keys for {kind}: {sorted(unknown)}")
    return cls(**spec)


def planes_from_dict(data):
    """Scene (list of planes, front first) described by ``data``."""
    preset = data.get("preset")
    seed = int(data.get("seed", 0))
    if preset == "occlusion":
        kw = {k: data[k] for k in ("s_near", "s_far", "band", "far_amplitude", "near_amplitude") if k in data}
        kw.setdefault("s_near", OCCLUSION_S_NEAR)
        kw.setdefault("s_far", OCCLUSION_S_FAR)
        return occlusion_scene(seed, size=int(data.get("height", 64)), **kw)
    if preset == "single_plane":
        return single_plane_scene(seed, float(data.get("disparity", 0.5)), int(data.get("channels", 1)))
    if preset is not None:
        raise ValueError(f"unknown preset {preset!r}")
    planes = data.get("plane")
    if not planes:
        raise ValueError("scene needs a preset or at least one [[plane]]")
    scene = []
    for entry in planes:
        texture = _build(_TEXTURES, entry.get("texture", {"type": "constant"}), "texture")
        mask = _build(_MASKS, entry["mask"], "mask") if "mask" in entry else None
        scene.append(Plane(float(entry["disparity"]), texture, mask))
    return scene


def render_from_dict(data):
    """Render the scene described by ``data``; returns ``(LightField, GroundTruth)``."""
    scene = planes_from_dict(data)
    nu, nv = int(data.get("nu", 9)), int(data.get("nv", 9))
    height, width = int(data.get("height", 64)), int(data.get("width", 64))
    return render_synthetic(
        scene,
        nu,
        nv,
        height,
        width,
        noise_sigma=float(data.get("noise_sigma", 0.0)),
        seed=int(data.get("seed", 0)),
    )
