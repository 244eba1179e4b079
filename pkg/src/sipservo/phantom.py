"""Parametric chest phantom: skin, ribs, pleura, respiration, and a spring contact.

Phantom coordinates coincide with the robot base frame. The body is a cylinder
whose axis runs along base x (the scan direction); ribs are rings around that
axis spaced ``rib_spacing`` apart, and the pleura is a concentric shell.
``body_radius = inf`` gives a flat plate at z = 0. The standardized imaging
plane (SIP) sits on the apex line midway between two ribs with the probe
pressed in until it carries ``sip_force``.

Probe frame: +z points into the body along the beam, +x is the image lateral
axis (column u grows with x), +y completes the right-handed frame.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .kinematics import Pose

MAX_RANGE = 0.3
OUT_OF_RANGE = math.inf
CONTACT_MARGIN = 0.005

BACKGROUND_MEAN = 60.0
PL_MEAN = 220.0
RS_MEAN = 15.0
NOISE_SIGMA = 10.0

# SIP orientation: probe z down into the body, image x along the body axis
SIP_ROTATION = np.diag([1.0, -1.0, -1.0])


class DomainError(ValueError):
    """Query outside the modelled phantom extent."""


class NoContactError(RuntimeError):
    """Probe is too far above the skin to image."""


@dataclass(frozen=True)
class ImageSpec:
    width: int = 256
    height: int = 256
    depth: float = 0.10
    lateral_width: float = 0.04

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("image must be at least 32x32 pixels")
        if self.depth <= 0 or self.lateral_width <= 0:
            raise ValueError("image extents must be positive")

    @property
    def axial_pitch(self) -> float:
        return self.depth / self.height

    @property
    def lateral_pitch(self) -> float:
        return self.lateral_width / self.width

    def column_x(self) -> np.ndarray:
        """Probe-frame x (m) of every column centre."""
        return (np.arange(self.width) + 0.5 - self.width / 2) * self.lateral_pitch

    def row_z(self) -> np.ndarray:
        """Probe-frame z (m) of every row centre."""
        return (np.arange(self.height) + 0.5) * self.axial_pitch

    def as_dict(self) -> dict:
        return {"width": self.width, "height": self.height,
                "depth": self.depth, "lateral_width": self.lateral_width}


@dataclass(frozen=True)
class PhantomModel:
    body_radius: float = 0.15
    rib_spacing: float = 0.035
    rib_radius: float = 0.006
    rib_top_depth: float = 0.010
    pleura_depth: float = 0.025
    pl_band_thickness: float = 0.002
    respiration_amplitude: float = 0.0
    respiration_freq: float = 0.25
    respiration_phase: float = 0.0
    contact_stiffness: float = 500.0
    sip_x: float = 0.0
    sip_force: float = 3.5
    half_extent: float = 0.2
    speckle_seed: int = 0

    def __post_init__(self):
        lengths = ("body_radius", "rib_spacing", "rib_radius", "rib_top_depth",
                   "pleura_depth", "pl_band_thickness", "half_extent")
        for name in lengths:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rib_spacing <= 2 * self.rib_radius:
            raise ValueError("rib_spacing must exceed the rib diameter")
        if self.pleura_depth <= self.rib_top_depth:
            raise ValueError("pleura must lie deeper than the rib tops")
        if self.contact_stiffness <= 0:
            raise ValueError("contact_stiffness must be positive")
        if self.respiration_amplitude < 0:
            raise ValueError("respiration_amplitude must be >= 0")

    @property
    def flat(self) -> bool:
        return math.isinf(self.body_radius)

    @property
    def sip_penetration(self) -> float:
        return self.sip_force / self.contact_stiffness

    def respiration(self, t: float) -> float:
        """Vertical skin offset (m) at time ``t``."""
        if self.respiration_amplitude == 0.0:
            return 0.0
        return self.respiration_amplitude * math.sin(
            2 * math.pi * self.respiration_freq * t + self.respiration_phase)

    def sip_pose_at(self, t: float) -> Pose:
        """Ground-truth SIP probe pose (base->probe) with the skin displaced as at ``t``."""
        z = self.respiration(t) - self.sip_penetration
        return Pose(SIP_ROTATION, [self.sip_x, 0.0, z], "base", "probe")

    @property
    def sip_pose(self) -> Pose:
        """SIP pose for the skin at rest (zero respiration offset)."""
        return Pose(SIP_ROTATION, [self.sip_x, 0.0, -self.sip_penetration], "base", "probe")

    def depth_below_skin(self, points, t: float) -> np.ndarray:
        """Signed depth (m) of base-frame points below the skin, measured along the normal."""
        pts = np.asarray(points, dtype=float)
        h = self.respiration(t)
        if self.flat:
            return h - pts[..., 2]
        R = self.body_radius
        return R - np.hypot(pts[..., 1], pts[..., 2] + R - h)


def surface_point_and_normal(model: PhantomModel, x: float, y: float, t: float):
    """Skin height (m) and outward unit normal at base (x, y)."""
    lim = model.half_extent
    if abs(x) > lim or abs(y) > lim or (not model.flat and abs(y) >= model.body_radius):
        raise DomainError(f"({x}, {y}) is outside the phantom")
    h = model.respiration(t)
    if model.flat:
        return h, np.array([0.0, 0.0, 1.0])
    R = model.body_radius
    c = math.sqrt(R * R - y * y)
    return h - R + c, np.array([0.0, y / R, c / R])


def _ray_cast_many(model: PhantomModel, origins: np.ndarray, dirs: np.ndarray,
                   t: float) -> np.ndarray:
    o = np.atleast_2d(np.asarray(origins, dtype=float))
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    if np.any(model.depth_below_skin(o, t) > 0):
        raise ValueError("ray origin must lie above the skin")
    h = model.respiration(t)
    out = np.full(len(o), OUT_OF_RANGE)
    if model.flat:
        dz = d[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (h - o[:, 2]) / dz
        ok = (dz < 0) & (s >= 0) & (s <= MAX_RANGE)
        out[ok] = s[ok]
        return out
    R = model.body_radius
    oy, oz = o[:, 1], o[:, 2] + R - h
    dy, dz = d[:, 1], d[:, 2]
    a = dy * dy + dz * dz
    b = 2 * (oy * dy + oz * dz)
    c = oy * oy + oz * oz - R * R
    disc = b * b - 4 * a * c
    hit = (a > 1e-15) & (disc >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (-b - np.sqrt(np.where(hit, disc, 0.0))) / (2 * a)
    ok = hit & (s >= 0) & (s <= MAX_RANGE)
    out[ok] = s[ok]
    return out


def ray_cast(model: PhantomModel, origin, direction, t: float) -> float:
    """Distance to the first skin intersection, or ``OUT_OF_RANGE`` beyond 0.3 m."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return float(_ray_cast_many(model, origin, d, t)[0])


@dataclass(frozen=True)
class LaserRing:
    """Four range sensors on a ring around the probe axis, looking along probe +z.

    Sensor order: d1 at -y, d2 at +x, d3 at +y, d4 at -x. With this layout a
    positive tilt about probe x (y) makes ``d3 - d1`` (``d4 - d2``) negative,
    so proportional feedback on those differences rotates the probe back.
    """

    radius: float = 0.04
    standoff: float = 0.03

    def sensor_points(self) -> np.ndarray:
        r, h = self.radius, -self.standoff
        return np.array([[0.0, -r, h], [r, 0.0, h], [0.0, r, h], [-r, 0.0, h]])


def _ray_scalar(model: PhantomModel, h: float, o, d) -> float:
    """Scalar ray/skin intersection for one ray; origin assumed above the skin."""
    if model.flat:
        if d[2] >= 0:
            return OUT_OF_RANGE
        s = (h - o[2]) / d[2]
        return s if 0 <= s <= MAX_RANGE else OUT_OF_RANGE
    R = model.body_radius
    oy, oz = o[1], o[2] + R - h
    a = d[1] * d[1] + d[2] * d[2]
    b = 2 * (oy * d[1] + oz * d[2])
    c = oy * oy + oz * oz - R * R
    disc = b * b - 4 * a * c
    if a <= 1e-15 or disc < 0:
        return OUT_OF_RANGE
    s = (-b - math.sqrt(disc)) / (2 * a)
    return s if 0 <= s <= MAX_RANGE else OUT_OF_RANGE


def laser_distances(model: PhantomModel, probe_pose: Pose, t: float,
                    ring: LaserRing = LaserRing()) -> np.ndarray:
    """Simulated readings d1..d4 (m); ``OUT_OF_RANGE`` where a beam misses.

    A sensor at or below the skin cannot see the surface and reads out of range.
    """
    R = probe_pose.rotation.tolist()
    p = probe_pose.translation.tolist()
    d = (R[0][2], R[1][2], R[2][2])
    h = model.respiration(t)
    out = np.empty(4)
    for k, (sx, sy, sz) in enumerate(ring.sensor_points().tolist()):
        o = [R[i][0] * sx + R[i][1] * sy + R[i][2] * sz + p[i] for i in range(3)]
        if model.flat:
            depth = h - o[2]
        else:
            depth = model.body_radius - math.hypot(o[1], o[2] + model.body_radius - h)
        out[k] = OUT_OF_RANGE if depth > 0 else _ray_scalar(model, h, o, d)
    return out


def contact_force(model: PhantomModel, probe_pose: Pose, t: float) -> float:
    """Spring force (N) from probe-tip penetration along the surface normal."""
    pen = float(model.depth_below_skin(probe_pose.translation, t))
    return model.contact_stiffness * max(0.0, pen)


@dataclass(frozen=True, eq=False)
class FrameData:
    intensities: np.ndarray
    timestamp: float = 0.0


@dataclass(frozen=True, eq=False)
class GroundTruth:
    pl_mask: np.ndarray
    rs_mask: np.ndarray

    def instances(self, min_area: int = 1):
        from .perception import SemanticMask, extract_semantic_instances
        return extract_semantic_instances(SemanticMask(self.pl_mask, self.rs_mask), min_area)


def _image_tissue_coords(model: PhantomModel, probe_pose: Pose, spec: ImageSpec, t: float):
    """Axial body coordinate x and depth below skin for every pixel (H x W, float32)."""
    R, p = probe_pose.rotation, probe_pose.translation
    xs, zs = spec.column_x(), spec.row_z()

    def coord(i, shift=0.0):
        col = (p[i] + shift + xs * R[i, 0]).astype(np.float32)
        row = (zs * R[i, 2]).astype(np.float32)
        return row[:, None] + col[None, :]

    h = model.respiration(t)
    ax = coord(0)
    if model.flat:
        depth = coord(2, -h)
        np.negative(depth, out=depth)
        return ax, depth
    Rb = model.body_radius
    y = coord(1)
    z = coord(2, Rb - h)
    y *= y
    z *= z
    y += z
    np.sqrt(y, out=y)
    np.subtract(np.float32(Rb), y, out=y)
    return ax, y


def _check_contact(model: PhantomModel, probe_pose: Pose, t: float):
    pen = float(model.depth_below_skin(probe_pose.translation, t))
    if pen < -CONTACT_MARGIN:
        raise NoContactError(f"probe is {-pen * 1e3:.1f} mm above the skin")


def _label_pixels(model: PhantomModel, probe_pose: Pose, spec: ImageSpec, t: float):
    _check_contact(model, probe_pose, t)
    ax, depth = _image_tissue_coords(model, probe_pose, spec, t)
    d = model.rib_spacing
    r = model.rib_radius
    dz = depth - np.float32(model.rib_top_depth + r)
    band = np.abs(dz) < r
    rows_any = np.nonzero(band.any(axis=1))[0]
    in_rib = np.zeros(depth.shape, dtype=bool)
    if len(rows_any):
        # only rows that reach the rib band can hit a rib
        sl = slice(rows_any[0], rows_any[-1] + 1)
        rel = ax[sl] - np.float32(model.sip_x + d / 2)
        dx = rel - np.floor(rel / np.float32(d) + np.float32(0.5)) * np.float32(d)
        in_rib[sl] = dx * dx + dz[sl] * dz[sl] < np.float32(r * r)
    hit = in_rib.any(axis=0)
    first = np.argmax(in_rib, axis=0)
    rows = np.arange(spec.height)[:, None]
    rs = hit[None, :] & (rows >= first[None, :])
    pl = ((depth >= np.float32(model.pleura_depth))
          & (depth < np.float32(model.pleura_depth + model.pl_band_thickness))
          & ~hit[None, :])
    return pl, rs, ax, depth


def ground_truth_masks(model: PhantomModel, probe_pose: Pose, spec: ImageSpec,
                       t: float) -> GroundTruth:
    """Per-column axial ray model: rib hit -> shadow to the bottom, else pleural band."""
    pl, rs, _, _ = _label_pixels(model, probe_pose, spec, t)
    return GroundTruth(pl, rs)


_SPECKLE_PITCH = 2e-4
_SPECKLE_SHAPE = (1000, 1000)       # (depth cells, axial cells)
_SPECKLE_DEPTH0 = -0.02


@functools.lru_cache(maxsize=4)
def _speckle_field(seed: int) -> np.ndarray:
    """Tissue-fixed Rayleigh speckle with the background mean; grains ~1 mm axially and ~3 mm laterally."""
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(_SPECKLE_SHAPE)
    im = rng.standard_normal(_SPECKLE_SHAPE)
    sigma = (1.5, 7.5)
    re = ndimage.gaussian_filter(re, sigma, mode="wrap")
    im = ndimage.gaussian_filter(im, sigma, mode="wrap")
    mag = np.hypot(re, im)
    mag *= BACKGROUND_MEAN / mag.mean()
    mag = mag.astype(np.float32)
    mag.flags.writeable = False
    return mag


_NOISE_BANK = 8


@functools.lru_cache(maxsize=4)
def _noise_bank(shape: tuple) -> np.ndarray:
    """Fixed stack of N(0, NOISE_SIGMA^2) fields twice the image size per axis."""
    rng = np.random.default_rng(0x5EED)
    bank = rng.standard_normal((_NOISE_BANK, 2 * shape[0], 2 * shape[1]), dtype=np.float32)
    bank *= np.float32(NOISE_SIGMA)
    bank.flags.writeable = False
    return bank


def _frame_noise(shape: tuple, seed: int) -> np.ndarray:
    """Per-frame electronic noise: a seeded window into the cached noise bank.

    Drawing a fresh 256x256 Gaussian field costs more than the rest of the
    render; a random window over a fixed bank is statistically equivalent per
    frame and keeps perception cheap enough for 1 kHz trials.
    """
    h, w = shape
    k, r0, c0 = np.random.default_rng(seed).integers(0, (_NOISE_BANK, h + 1, w + 1))
    return _noise_bank((h, w))[k, r0:r0 + h, c0:c0 + w]


def render_frame(model: PhantomModel, probe_pose: Pose, spec: ImageSpec, t: float,
                 seed: int) -> FrameData:
    """Deterministic grayscale B-mode stand-in driven by the ground-truth masks."""
    return acquire(model, probe_pose, spec, t, seed)[0]


def acquire(model: PhantomModel, probe_pose: Pose, spec: ImageSpec, t: float, seed: int):
    """Render a frame and its ground-truth masks from one geometric pass."""
    pl, rs, ax, depth = _label_pixels(model, probe_pose, spec, t)
    field_ = _speckle_field(model.speckle_seed)
    nd, na = field_.shape
    depth -= np.float32(_SPECKLE_DEPTH0)
    depth *= np.float32(1.0 / _SPECKLE_PITCH)
    i = np.clip(depth, 0, nd - 1).astype(np.intp)
    ax *= np.float32(1.0 / _SPECKLE_PITCH)
    j = np.floor(ax).astype(np.intp) % na
    i *= na
    i += j
    img = np.take(field_.ravel(), i)
    img[pl] = PL_MEAN
    img[rs] = RS_MEAN
    img += _frame_noise(img.shape, seed)
    np.rint(img, out=img)
    np.clip(img, 0, 255, out=img)
    return FrameData(img.astype(np.uint8), t), GroundTruth(pl, rs)


def write_pgm(path, frame) -> Path:
    """Write a binary (P5) 8-bit PGM."""
    img = np.asarray(frame.intensities if isinstance(frame, FrameData) else frame)
    img = np.clip(img, 0, 255).astype(np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(data[m.end(): m.end() + w * h], dtype=np.uint8).reshape(h, w)
