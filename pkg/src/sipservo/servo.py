"""Probe controllers: IBVS in-plane servoing, normal positioning, force, and fusion.

All twists here are expressed in the probe frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .afm import VisualError
from .kinematics import Twist

COMPONENTS = ("vx", "vy", "vz", "wx", "wy", "wz")


class NoFeaturesError(RuntimeError):
    """No landmark class detected; the caller holds the previous IBVS command."""


class SensorFaultError(RuntimeError):
    """A range sensor returned the out-of-range sentinel."""


@dataclass(frozen=True)
class IbvsGains:
    lam: float = 1.5
    gamma_pl: float = 0.7
    gamma_rs: float = 0.3
    termination_threshold: float = 2.0
    inplane_mask: tuple = ("vx", "vz", "wy")

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not self.gamma_pl > self.gamma_rs > 0:
            raise ValueError("weights must satisfy gamma_pl > gamma_rs > 0")
        bad = set(self.inplane_mask) - set(COMPONENTS)
        if bad:
            raise ValueError(f"unknown twist components {sorted(bad)}")

    def gamma(self, cls: str) -> float:
        return {"PL": self.gamma_pl, "RS": self.gamma_rs}[cls]

    @property
    def mask_vector(self) -> np.ndarray:
        return np.array([c in self.inplane_mask for c in COMPONENTS], dtype=float)


@dataclass(frozen=True)
class NormalPdGains:
    kpn: float = 2000.0         # rad/(s m)
    kdn: float = 5.0            # rad/m
    smoothing: float = 0.0      # exponential smoothing of the error derivative, [0, 1)

    def __post_init__(self):
        if self.kpn <= 0 or self.kdn < 0:
            raise ValueError("need kpn > 0 and kdn >= 0")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")


@dataclass(frozen=True)
class ForceGains:
    kpf: float = 0.01
    w: float = 0.5
    desired_force: float = 3.5

    def __post_init__(self):
        if self.kpf <= 0:
            raise ValueError("kpf must be positive")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("w must be in [0, 1]")


@dataclass(frozen=True, eq=False)
class LaserReadings:
    d: np.ndarray               # d1..d4, m
    timestamp: float = 0.0

    valid: bool = field(init=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(4)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "valid", all(math.isfinite(x) and x > 0 for x in d.tolist()))

    @property
    def e13(self) -> float:
        return float(self.d[2] - self.d[0])

    @property
    def e24(self) -> float:
        return float(self.d[3] - self.d[1])


@dataclass(frozen=True, eq=False)
class ServoCommand:
    fused: Twist
    out_of_plane_wx: float = 0.0
    inplane_normal_wy: float = 0.0
    ibvs: Twist = field(default_factory=Twist.zero)
    force_vz: float = 0.0


class IbvsOutput(NamedTuple):
    twist: Twist
    converged: bool


def interaction_matrix(e) -> np.ndarray:
    """3x6 map from probe twist to the rate of the point error ``e``."""
    ex, ey, ez = np.asarray(e.e if isinstance(e, VisualError) else e, dtype=float)
    if not np.all(np.isfinite([ex, ey, ez])):
        raise ValueError("error must be finite")
    return np.array([[-1.0, 0.0, 0.0, 0.0, -ez, ey],
                     [0.0, -1.0, 0.0, ez, 0.0, -ex],
                     [0.0, 0.0, -1.0, -ey, ex, 0.0]])


def class_velocity(err: VisualError, lam: float) -> np.ndarray:
    """Minimum-norm twist ``pinv(L) (-lam e)`` giving exponential decay of one class error."""
    return np.linalg.pinv(interaction_matrix(err.e)) @ (-lam * err.e)


def ibvs_command(errors: Sequence[VisualError], gains: IbvsGains = IbvsGains()) -> IbvsOutput:
    """Weighted sum of per-class IBVS twists, masked to the in-plane components.

    Returns a zero twist with ``converged=True`` when every class descriptor is
    within ``termination_threshold`` pixels of its template.
    """
    if not errors:
        raise NoFeaturesError("no landmark classes detected")
    if max(err.px_distance for err in errors) < gains.termination_threshold:
        return IbvsOutput(Twist.zero("probe"), True)
    u = np.zeros(6)
    for err in errors:
        u += gains.gamma(err.cls) * class_velocity(err, gains.lam)
    u *= gains.mask_vector
    return IbvsOutput(Twist.from_vector(u, "probe"), False)


def normal_pd(readings: LaserReadings, prev: LaserReadings, gains: NormalPdGains,
              dt: float, prev_rates=None):
    """Angular velocities (w_x, w_y) that equalise opposite range readings.

    ``w_x = kpn e13 + kdn d/dt e13`` and ``w_y = kpn e24 + kdn d/dt e24`` with
    range differences in metres and backward-difference derivatives. ``prev_rates`` (previous smoothed
    derivatives) enables the optional exponential smoothing.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (readings.valid and prev.valid):
        raise SensorFaultError("range sensor out of range")
    r13 = (readings.e13 - prev.e13) / dt
    r24 = (readings.e24 - prev.e24) / dt
    if prev_rates is not None and gains.smoothing > 0:
        a = gains.smoothing
        r13 = a * prev_rates[0] + (1 - a) * r13
        r24 = a * prev_rates[1] + (1 - a) * r24
    wx = gains.kpn * readings.e13 + gains.kdn * r13
    wy = gains.kpn * readings.e24 + gains.kdn * r24
    return wx, wy, (r13, r24)


def force_control(fz: float, prev_v: float, gains: ForceGains = ForceGains()) -> float:
    """Smoothed proportional force law; positive output presses into the body."""
    if fz < 0:
        raise ValueError("contact force must be non-negative")
    return gains.w * gains.kpf * (gains.desired_force - fz) + (1 - gains.w) * prev_v


def fuse(w_out_of_plane: float, w_inplane_normal: float, ibvs: Twist,
         v_fz: float) -> ServoCommand:
    """Sum the contributions into their slots of one probe-frame twist."""
    if ibvs.frame != "probe":
        raise ValueError("IBVS twist must be in the probe frame")
    v = np.array([ibvs.linear[0], 0.0, ibvs.linear[2] + v_fz])
    w = np.array([w_out_of_plane, w_inplane_normal + ibvs.angular[1], 0.0])
    return ServoCommand(Twist(v, w, "probe"), float(w_out_of_plane), float(w_inplane_normal),
                        ibvs, float(v_fz))


class NormalPositioner:
    """Stateful wrapper around :func:`normal_pd` owned by the control loop."""

    def __init__(self, gains: NormalPdGains = NormalPdGains()):
        self.gains = gains
        self.prev: LaserReadings | None = None
        self.rates = None

    def reset(self):
        self.prev = None
        self.rates = None

    def step(self, readings: LaserReadings, dt: float):
        prev = self.prev if self.prev is not None else readings
        try:
            wx, wy, rates = normal_pd(readings, prev, self.gains, dt, self.rates)
        except SensorFaultError:
            self.prev = None
            self.rates = None
            raise
        self.prev = readings
        self.rates = rates
        return wx, wy


class ForceRegulator:
    """Stateful wrapper around :func:`force_control`."""

    def __init__(self, gains: ForceGains = ForceGains()):
        self.gains = gains
        self.v = 0.0

    def step(self, fz: float) -> float:
        self.v = force_control(fz, self.v, self.gains)
        return self.v
