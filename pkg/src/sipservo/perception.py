"""Landmark extraction: segmenters, instances, centroids, category descriptors.

Image coordinates are (u, v) = (column, row); u grows with probe x, v with depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .phantom import FrameData, GroundTruth, ImageSpec

CLASSES = ("PL", "RS")
MIN_AREA = 20
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class SemanticMask:
    pl: np.ndarray
    rs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pl", np.asarray(self.pl, dtype=bool))
        object.__setattr__(self, "rs", np.asarray(self.rs, dtype=bool))
        if self.pl.shape != self.rs.shape:
            raise ValueError("class masks must share one shape")

    def __getitem__(self, cls: str) -> np.ndarray:
        return {"PL": self.pl, "RS": self.rs}[cls]


@dataclass(frozen=True, eq=False)
class Instance:
    cls: str
    pixels: np.ndarray          # (area, 2) integer (u, v)
    area: int = field(init=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "area", len(px))


@dataclass(frozen=True, eq=False)
class CategoryFeatures:
    cls: str
    centroids: np.ndarray       # (n, 2)
    areas: tuple = ()

    @property
    def descriptor(self) -> np.ndarray:
        return category_descriptor(self.centroids)

    def __len__(self) -> int:
        return len(self.centroids)


class OracleSegmenter:
    """Pass the phantom's ground truth through, optionally with boundary jitter.

    Jitter erodes or dilates each class mask as a whole by a seeded radius in
    ``[-noise_px, noise_px]`` (8-connected structuring element), so
    mirror-symmetric layouts stay symmetric.
    """

    needs_ground_truth = True

    def __init__(self, noise_px: int = 0):
        if not 0 <= noise_px <= 2:
            raise ValueError("noise_px must be in [0, 2]")
        self.noise_px = int(noise_px)

    def segment(self, gt: GroundTruth, rng: np.random.Generator | None = None) -> SemanticMask:
        if self.noise_px == 0:
            return SemanticMask(gt.pl_mask.copy(), gt.rs_mask.copy())
        if rng is None:
            raise ValueError("a noisy oracle needs a seeded generator")
        out = []
        for mask in (gt.pl_mask, gt.rs_mask):
            k = int(rng.integers(-self.noise_px, self.noise_px + 1))
            if k > 0:
                mask = ndimage.binary_dilation(mask, EIGHT_CONNECTED, iterations=k)
            elif k < 0:
                mask = ndimage.binary_erosion(mask, EIGHT_CONNECTED, iterations=-k)
            out.append(mask)
        return SemanticMask(*out)


class ClassicalSegmenter:
    """Intensity rules standing in for a learned segmenter.

    PL: horizontally smoothed intensity >= ``pl_threshold``. RS: columns whose
    mean below ``rs_min_depth`` is <= ``rs_threshold``; the shadow starts at the
    first row where a short vertical running mean falls to the threshold.
    """

    needs_ground_truth = False

    def __init__(self, spec: ImageSpec, pl_threshold: float = 180.0,
                 rs_threshold: float = 30.0, rs_min_depth: float = 0.010,
                 smooth_px: int = 9):
        self.spec = spec
        self.pl_threshold = pl_threshold
        self.rs_threshold = rs_threshold
        self.rs_min_depth = rs_min_depth
        self.smooth_px = smooth_px

    def segment(self, frame: FrameData, rng=None) -> SemanticMask:
        img = np.asarray(frame.intensities, dtype=float)
        h, w = img.shape
        row0 = min(int(round(self.rs_min_depth / self.spec.axial_pitch)), h - 1)
        col_mean = img[row0:].mean(axis=0)
        rs_cols = col_mean <= self.rs_threshold
        run = ndimage.uniform_filter1d(img, 5, axis=0, mode="nearest")
        suffix = np.cumsum(img[::-1], axis=0)[::-1] / np.arange(h, 0, -1)[:, None]
        dark = (run <= self.rs_threshold) & (suffix <= self.rs_threshold)
        first = np.where(dark.any(axis=0), np.argmax(dark, axis=0), h)
        rows = np.arange(h)[:, None]
        rs = rs_cols[None, :] & (rows >= first[None, :])

        smooth = ndimage.uniform_filter1d(img, self.smooth_px, axis=1, mode="nearest")
        pl = (smooth >= self.pl_threshold) & ~rs
        pl = ndimage.binary_opening(pl, np.ones((1, 3), dtype=bool))
        return SemanticMask(pl, rs)


def segment(source, segmenter=None, rng=None) -> SemanticMask:
    """Run ``segmenter`` on a frame or ground truth (oracle by default)."""
    if segmenter is None:
        segmenter = OracleSegmenter()
    return segmenter.segment(source, rng)


def extract_instances(mask: np.ndarray, min_area: int = MIN_AREA, cls: str = "PL") -> list:
    """8-connected components with ``area >= min_area``, largest first.

    Equal areas keep raster-scan label order.
    """
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), EIGHT_CONNECTED)
    comps = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = np.nonzero(labels[sl] == k)
        if len(rows) >= min_area:
            comps.append(np.column_stack([cols + sl[1].start, rows + sl[0].start]))
    comps.sort(key=len, reverse=True)       # stable: equal areas keep label order
    return [Instance(cls, px) for px in comps]


def extract_semantic_instances(mask: SemanticMask, min_area: int = MIN_AREA) -> dict:
    return {c: extract_instances(mask[c], min_area, c) for c in CLASSES}


def centroid(inst: Instance) -> np.ndarray:
    """First-order moment (mean pixel coordinate) of an instance."""
    if inst.area == 0:
        raise ValueError("centroid of an empty instance")
    return inst.pixels.mean(axis=0)


def category_descriptor(centroids: Sequence) -> np.ndarray:
    """Geometric centre of a class's centroids (the centroid itself when n = 1)."""
    c = np.asarray(centroids, dtype=float).reshape(-1, 2)
    if len(c) == 0:
        raise ValueError("descriptor of an empty centroid list")
    return c.mean(axis=0)


def category_features(instances: dict) -> dict:
    """Map class -> CategoryFeatures for every class with at least one instance."""
    out = {}
    for cls, insts in instances.items():
        if insts:
            out[cls] = CategoryFeatures(cls, np.array([centroid(i) for i in insts]),
                                        tuple(i.area for i in insts))
    return out


def dice_index(pred: np.ndarray, truth: np.ndarray) -> float:
    """Overlap 2|A & B| / (|A| + |B|); two empty masks score 1."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    denom = pred.sum() + truth.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * np.logical_and(pred, truth).sum() / denom)
