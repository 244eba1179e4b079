"""Evaluation math: image similarity, segmentation losses, pose and landmark errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import FrameError, Pose

BCE_EPS = 1e-7


class UndefinedCorrelationError(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a.ravel(), b.ravel()


def ncc(a, b) -> float:
    """Zero-mean normalised cross-correlation over all pixels.

    If exactly one image is constant the correlation is 0.
    """
    a, b = _pair(a, b)
    a = a - a.mean()
    b = b - b.mean()
    na, nb = math.sqrt(a @ a), math.sqrt(b @ b)
    if na == 0 and nb == 0:
        raise UndefinedCorrelationError("both images are constant")
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def ssd(a, b) -> float:
    a, b = _pair(a, b)
    d = a - b
    return float(d @ d)


def nssd(a, b, max_ssd: float) -> float:
    """``1 - SSD / max_ssd``; defined as 1 when ``max_ssd`` is 0."""
    s = ssd(a, b)
    if max_ssd < s:
        raise ValueError(f"max_ssd {max_ssd} is below this pair's SSD {s}")
    if max_ssd == 0:
        return 1.0
    return 1.0 - s / max_ssd


def _bin(x, bins):
    x = np.asarray(x)
    if x.dtype == np.uint8 and 256 % bins == 0:
        return (x // (256 // bins)).astype(np.intp)
    idx = np.floor(x.astype(float) * (bins / 256.0)).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def entropy(a, bins: int = 32) -> float:
    """Shannon entropy (nats) of the intensity histogram over [0, 255]."""
    p = np.bincount(_bin(np.ravel(a), bins), minlength=bins) / np.size(a)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mutual_information(a, b, bins: int = 32) -> float:
    """Mutual information (nats) from the joint histogram, equal-width bins over [0, 255]."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    ia, ib = _bin(a.ravel(), bins), _bin(b.ravel(), bins)
    joint = np.bincount(ia * bins + ib, minlength=bins * bins).reshape(bins, bins)
    total = joint.sum()
    pxy = joint / total
    px = joint.sum(axis=1) / total      # integer marginals keep the result symmetric
    py = joint.sum(axis=0) / total
    nz = pxy > 0
    terms = pxy[nz] * (np.log(pxy[nz]) - np.log(np.outer(px, py)[nz]))
    # fsum is order-independent, so MI(a, b) == MI(b, a) exactly
    return max(math.fsum(terms.tolist()), 0.0)


def bce_loss(pred, truth) -> float:
    """Mean binary cross-entropy.

    ``pred`` plays the role of the predicted label and ``truth`` the ground
    truth; the log is taken of the clamped ``pred``.
    """
    y, t = _pair(truth, pred)
    p = np.clip(t, BCE_EPS, 1 - BCE_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def dice_loss(pred, truth) -> float:
    """``1 - (2 sum(y yhat) + 1) / (sum(y^2) + sum(yhat^2) + 1)``."""
    y, t = _pair(pred, truth)
    return float(1.0 - (2.0 * (y @ t) + 1.0) / (y @ y + t @ t + 1.0))


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")


def composite_loss(pred, truth, cfg: LossConfig = LossConfig()) -> float:
    return cfg.alpha * bce_loss(pred, truth) + (1 - cfg.alpha) * dice_loss(pred, truth)


def rotation_angle_deg(Ra, Rb) -> float:
    c = (np.trace(np.asarray(Ra).T @ np.asarray(Rb)) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def pose_error(current: Pose, reference: Pose):
    """(translational mm, geodesic rotational degrees) between two poses."""
    if (current.from_frame, current.to_frame) != (reference.from_frame, reference.to_frame):
        raise FrameError("pose error needs matching frame tags")
    dp = current.translation - reference.translation
    return float(np.linalg.norm(dp) * 1e3), rotation_angle_deg(current.rotation, reference.rotation)


def paired_pixel_distance(pairings: dict, classes=("PL", "RS")) -> dict:
    """Class -> descriptor distance in px, or ``None`` where the class is absent."""
    return {c: (pairings[c].descriptor_distance if c in pairings else None) for c in classes}


def rms(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


@dataclass(frozen=True)
class SimilarityReport:
    ncc: float
    nssd: float
    mi: float
    timestamp: float = 0.0


@dataclass(frozen=True)
class TrackingReport:
    translation_mm: float
    rotation_deg: float
    pl_px: float | None
    rs_px: float | None
    force_error: float
