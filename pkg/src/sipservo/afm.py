"""Anatomical feature map: template matching of landmark centroids.

For each class the query centroids are assigned to an ordered selection of
template centroids by exhaustive search over all P(N, n) orderings, minimising
the summed image-space distance. The matched subsets are summarised by their
geometric centres, whose difference is the class visual error.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .perception import CLASSES, category_descriptor, category_features
from .phantom import GroundTruth, ImageSpec

MAX_INSTANCES = 4


class ExcessInstancesError(ValueError):
    """More query instances than template instances for a class."""


class EmptyClassError(ValueError):
    """No query instances for a class; the class is skipped in servoing."""


class InvalidTemplateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Template:
    centroids: dict             # class -> (N, 2) array, px
    spec: ImageSpec

    def __post_init__(self):
        cents = {}
        for cls, c in self.centroids.items():
            arr = np.array(c, dtype=float).reshape(-1, 2)
            if len(arr) < 1:
                raise InvalidTemplateError(f"template class {cls} has no instances")
            arr.flags.writeable = False
            cents[cls] = arr
        object.__setattr__(self, "centroids", cents)

    def __getitem__(self, cls: str) -> np.ndarray:
        return self.centroids[cls]

    def to_dict(self) -> dict:
        return {"classes": {c: a.tolist() for c, a in self.centroids.items()},
                "image_spec": self.spec.as_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Template":
        return cls({k: v for k, v in d["classes"].items()}, ImageSpec(**d["image_spec"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Template":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def load(cls, path) -> "Template":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Template):
            return NotImplemented
        return (self.spec == other.spec and self.centroids.keys() == other.centroids.keys()
                and all(np.array_equal(self[c], other[c]) for c in self.centroids))


@dataclass(frozen=True, eq=False)
class Pairing:
    cls: str
    order: tuple                # template index matched to each query centroid
    matched: np.ndarray         # (n, 2) template centroids in query order
    query: np.ndarray           # (n, 2)
    cost: float

    @property
    def query_descriptor(self) -> np.ndarray:
        return category_descriptor(self.query)

    @property
    def template_descriptor(self) -> np.ndarray:
        return category_descriptor(self.matched)

    @property
    def descriptor_distance(self) -> float:
        d = self.query_descriptor - self.template_descriptor
        return math.hypot(d[0], d[1])


@dataclass(frozen=True, eq=False)
class VisualError:
    e: np.ndarray               # (e_x, e_y, e_z) m, probe frame
    cls: str = "PL"
    px_distance: float = 0.0

    def __post_init__(self):
        e = np.array(self.e, dtype=float).reshape(3)
        if not np.all(np.isfinite(e)):
            raise ValueError("visual error must be finite")
        object.__setattr__(self, "e", e)


def candidate_orderings(N: int, n: int):
    """All ordered selections of ``n`` of ``N`` template indices, lexicographic."""
    return itertools.permutations(range(N), n)


def match(template_centroids, query_centroids, cls: str = "PL") -> Pairing:
    """Minimum-cost assignment of query centroids to ordered template centroids.

    Ties resolve to the lexicographically smallest template-index sequence.
    """
    T = np.asarray(template_centroids, dtype=float).reshape(-1, 2)
    C = np.asarray(query_centroids, dtype=float).reshape(-1, 2)
    N, n = len(T), len(C)
    if n == 0:
        raise EmptyClassError(f"no {cls} instances detected")
    if N > MAX_INSTANCES:
        raise ValueError(f"at most {MAX_INSTANCES} template instances are supported")
    if n > N:
        raise ExcessInstancesError(f"{n} {cls} instances for a {N}-instance template")
    dist = [[math.hypot(C[j, 0] - T[i, 0], C[j, 1] - T[i, 1]) for i in range(N)]
            for j in range(n)]
    best, best_cost = None, math.inf
    for order in candidate_orderings(N, n):
        cost = 0.0
        for j, i in enumerate(order):
            cost += dist[j][i]
        if cost < best_cost:
            best, best_cost = order, cost
    return Pairing(cls, tuple(best), T[list(best)].copy(), C.copy(), best_cost)


def visual_error(pairing: Pairing, spec: ImageSpec) -> VisualError:
    """Metric class error in the probe frame from the descriptor offset (query - template)."""
    du, dv = pairing.query_descriptor - pairing.template_descriptor
    return VisualError([du * spec.lateral_pitch, 0.0, dv * spec.axial_pitch],
                       pairing.cls, math.hypot(du, dv))


def build_template(gt: GroundTruth, spec: ImageSpec, min_area: int | None = None) -> Template:
    """Per-class centroids of the ground-truth instances at the SIP."""
    kwargs = {} if min_area is None else {"min_area": min_area}
    feats = category_features(gt.instances(**kwargs))
    if "PL" not in feats:
        raise InvalidTemplateError("template image shows no pleural line")
    return Template({c: feats[c].centroids for c in CLASSES if c in feats}, spec)


def build_afm(features: dict, template: Template) -> dict:
    """Pair every detected class with the template; returns class -> Pairing.

    Surplus query instances (n > N) are dropped smallest-area first. Classes
    absent from either side are left out.
    """
    out = {}
    for cls, feat in features.items():
        if cls not in template.centroids or len(feat) == 0:
            continue
        N = len(template[cls])
        cents = feat.centroids
        if len(cents) > N:
            areas = np.asarray(feat.areas if feat.areas else np.zeros(len(cents)))
            cents = cents[np.sort(np.argsort(-areas, kind="stable")[:N])]
        out[cls] = match(template[cls], cents, cls)
    return out
