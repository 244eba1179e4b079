"""Closed-loop trial runner: scenario config, simulation loop, logging, sweeps.

A trial captures the reference frame at the SIP, applies the configured
offset, then runs the fused controller at the control rate with perception
(rendering, segmentation, AFM, IBVS) every ``control_rate // perception_rate``
steps and a zero-order hold in between.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import queue
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation

from . import afm, kinematics as kin, metrics, perception, servo
from . import phantom as ph

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz", "err_mm", "err_deg", "Fz",
               "v_x", "v_y", "v_z", "w_x", "w_y", "w_z", "ibvs_vx", "ibvs_vz", "ibvs_wy",
               "normal_wx", "normal_wy", "force_vz", "pl_px_dist", "rs_px_dist",
               "ncc", "nssd", "mi", "converged")

SENSOR_FAULT_LIMIT = 0.5        # s
DEFAULT_RESPIRATION = 0.002     # m, used when respiration is on but no amplitude is given
RIGS = ("direct", "arm")
SEGMENTERS = ("oracle", "oracle_noise", "classical")


class ScenarioError(ValueError):
    pass


def _from_dict(cls, d: dict | None, where: str):
    """Build a dataclass from a dict, rejecting unknown keys."""
    d = dict(d or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {unknown}")
    for k, v in d.items():
        if isinstance(v, list):
            d[k] = tuple(v)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid {where}: {exc}") from exc


def _check_keys(d: dict, allowed, where: str):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {unknown}")


@dataclass(frozen=True)
class ArmConfig:
    """Serial arm description; ``mdh`` rows are (a, alpha, d) modified DH parameters."""

    mdh: tuple | None = None
    flange_d: float = kin.PANDA_FLANGE_D
    probe_offset: tuple = (0.0, 0.0, 0.15)
    probe_yaw: float = -math.pi / 4
    mount_xyz: tuple = (-0.40, 0.0, -0.28)
    q_home: tuple | None = None
    damping: float = 1e-3

    def build(self) -> kin.ArmModel:
        tool = kin.Pose(kin.exp_so3([0.0, 0.0, self.probe_yaw]), self.probe_offset,
                        "flange", "probe")
        mount = np.eye(4)
        mount[:3, 3] = self.mount_xyz
        if self.mdh is None:
            arm = kin.ArmModel.panda(tool, mount)
            if self.q_home is not None:
                arm = dataclasses.replace(arm, q_home=np.array(self.q_home))
            return arm
        q_home = None if self.q_home is None else np.array(self.q_home)
        return kin.ArmModel.from_mdh([tuple(r) for r in self.mdh], self.flange_d,
                                     flange_to_probe=tool, mount=mount, q_home=q_home)


@dataclass(frozen=True)
class Controllers:
    ibvs: bool = True
    normal: bool = True
    force: bool = True


@dataclass(frozen=True)
class Scenario:
    name: str = "default_phantom"
    phantom: ph.PhantomModel = field(default_factory=ph.PhantomModel)
    image: ph.ImageSpec = field(default_factory=ph.ImageSpec)
    rig: str = "direct"
    offset_axis: str = "x"
    offset: float = 0.0175
    initial_tilt: tuple = (0.0, 0.0, 0.0)     # rotation vector (rad) in the probe frame
    duration: float = 5.0
    control_rate: int = 1000
    perception_rate: int = 30
    ibvs_gains: servo.IbvsGains = field(default_factory=servo.IbvsGains)
    normal_gains: servo.NormalPdGains = field(default_factory=servo.NormalPdGains)
    force_gains: servo.ForceGains = field(default_factory=servo.ForceGains)
    controllers: Controllers = field(default_factory=Controllers)
    segmenter: str = "oracle_noise"
    noise_px: int = 1
    respiration: bool = False
    seed: int = 0
    repeats: int = 1
    quantitative: bool = True
    arm: ArmConfig = field(default_factory=ArmConfig)
    template: str | None = None
    live: bool = False
    latch_convergence: bool = True

    def __post_init__(self):
        if self.rig not in RIGS:
            raise ScenarioError(f"rig must be one of {RIGS}")
        if self.segmenter not in SEGMENTERS:
            raise ScenarioError(f"segmenter must be one of {SEGMENTERS}")
        if self.offset_axis not in ("x", "y", "z"):
            raise ScenarioError("offset_axis must be x, y or z")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.control_rate < 1 or self.perception_rate < 1:
            raise ScenarioError("rates must be >= 1 Hz")
        if self.perception_rate > self.control_rate:
            raise ScenarioError("perception rate cannot exceed the control rate")
        if self.control_rate < 100:
            raise ScenarioError("control rate must be >= 100 Hz (integration step <= 10 ms)")
        if self.repeats < 1:
            raise ScenarioError("repeats must be >= 1")
        lateral = self.offset_axis in ("x", "y")
        if self.quantitative and lateral and abs(self.offset) > self.phantom.rib_spacing / 2 + 1e-12:
            raise ScenarioError("quantitative trials need a lateral |offset| <= rib_spacing / 2")
        if not 0 <= self.noise_px <= 2:
            raise ScenarioError("noise_px must be in [0, 2]")
        if len(self.initial_tilt) != 3:
            raise ScenarioError("initial_tilt must be a 3-vector")
        object.__setattr__(self, "initial_tilt", tuple(float(x) for x in self.initial_tilt))

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def steps(self) -> int:
        return int(round(self.duration * self.control_rate))

    @property
    def perception_every(self) -> int:
        return self.control_rate // self.perception_rate

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        top = {f.name for f in dataclasses.fields(cls)} - {"ibvs_gains", "normal_gains",
                                                           "force_gains"}
        _check_keys(d, top | {"gains"}, "scenario")
        kw: dict[str, Any] = {}
        for k, v in d.items():
            if k == "phantom":
                kw[k] = _from_dict(ph.PhantomModel, v, "phantom")
            elif k == "image":
                kw[k] = _from_dict(ph.ImageSpec, v, "image")
            elif k == "controllers":
                kw[k] = _from_dict(Controllers, v, "controllers")
            elif k == "arm":
                kw[k] = _from_dict(ArmConfig, v, "arm")
            elif k == "gains":
                _check_keys(v, ("ibvs", "normal", "force"), "gains")
                if "ibvs" in v:
                    kw["ibvs_gains"] = _from_dict(servo.IbvsGains, v["ibvs"], "gains.ibvs")
                if "normal" in v:
                    kw["normal_gains"] = _from_dict(servo.NormalPdGains, v["normal"],
                                                    "gains.normal")
                if "force" in v:
                    kw["force_gains"] = _from_dict(servo.ForceGains, v["force"], "gains.force")
            else:
                kw[k] = v
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
        s = cls.from_dict(data)
        if s.template is not None and not Path(s.template).is_absolute():
            s = dataclasses.replace(s, template=str(path.parent / s.template))
        return s

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gains"] = {"ibvs": d.pop("ibvs_gains"), "normal": d.pop("normal_gains"),
                      "force": d.pop("force_gains")}
        return json.loads(json.dumps(d, default=list))

    def trial_phantom(self, seed: int) -> ph.PhantomModel:
        """Phantom used for one trial: respiration switched on/off, seeded phase."""
        if not self.respiration:
            return dataclasses.replace(self.phantom, respiration_amplitude=0.0)
        amp = self.phantom.respiration_amplitude or DEFAULT_RESPIRATION
        phase = _rng(seed, 3).uniform(0.0, 2 * math.pi)
        return dataclasses.replace(self.phantom, respiration_amplitude=amp,
                                   respiration_phase=phase)

    def make_segmenter(self):
        if self.segmenter == "oracle":
            return perception.OracleSegmenter(0)
        if self.segmenter == "oracle_noise":
            return perception.OracleSegmenter(self.noise_px)
        return perception.ClassicalSegmenter(self.image)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def _frame_seed(seed: int, step: int) -> int:
    """Per-frame noise seed; step -1 is the reference frame."""
    return int(np.random.SeedSequence([int(seed), 7, int(step) + 1]).generate_state(1)[0])


def initial_pose(model: ph.PhantomModel, s: Scenario) -> kin.Pose:
    sip = model.sip_pose_at(0.0)
    off = np.zeros(3)
    off["xyz".index(s.offset_axis)] = s.offset
    R = sip.rotation @ kin.exp_so3(s.initial_tilt)
    return kin.Pose(R, sip.translation + off, "base", "probe")


def sip_template(model: ph.PhantomModel | None = None,
                 spec: ph.ImageSpec | None = None) -> afm.Template:
    """Template from the ground-truth landmarks at the phantom SIP (skin at rest)."""
    model = ph.PhantomModel() if model is None else model
    spec = ph.ImageSpec() if spec is None else spec
    model = dataclasses.replace(model, respiration_amplitude=0.0)
    gt = ph.ground_truth_masks(model, model.sip_pose, spec, 0.0)
    return afm.build_template(gt, spec, perception.MIN_AREA)


@dataclass
class PerceptionResult:
    ibvs: servo.IbvsOutput | None       # None: no features, hold previous command
    distances: dict
    frame: ph.FrameData
    t: float


class LatestSlot:
    """Single-value handoff; the newest write wins and reads never block."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None
        self._version = 0

    def put(self, value):
        with self._lock:
            self._value = value
            self._version += 1

    def get(self):
        with self._lock:
            return self._version, self._value


class Perceiver:
    """Frame -> segmentation -> AFM -> IBVS command for one trial."""

    def __init__(self, s: Scenario, template: afm.Template, model: ph.PhantomModel,
                 seed: int):
        self.s = s
        self.template = template
        self.model = model
        self.seed = seed
        self.segmenter = s.make_segmenter()
        self.rng = _rng(seed, 1)

    def acquire(self, pose: kin.Pose, t: float, step: int):
        return ph.acquire(self.model, pose, self.s.image, t, _frame_seed(self.seed, step))

    def process(self, frame: ph.FrameData, gt: ph.GroundTruth, t: float):
        src = gt if self.segmenter.needs_ground_truth else frame
        mask = self.segmenter.segment(src, self.rng)
        feats = perception.category_features(perception.extract_semantic_instances(mask))
        pairings = afm.build_afm(feats, self.template)
        dists = metrics.paired_pixel_distance(pairings)
        errors = [afm.visual_error(p, self.s.image) for p in pairings.values()]
        try:
            out = servo.ibvs_command(errors, self.s.ibvs_gains)
        except servo.NoFeaturesError:
            out = None
        return PerceptionResult(out, dists, frame, t)


@dataclass
class TrialLog:
    scenario: Scenario
    seed: int
    columns: dict
    status: str = "completed"           # completed | aborted_contact | aborted_sensor
    reason: str = ""
    frames: dict = field(default_factory=dict)
    max_ssd: float = 0.0
    reference_entropy: float = 0.0

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def aborted(self) -> bool:
        return self.status != "completed"

    def col(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    @property
    def final_error(self):
        if not len(self):
            return math.nan, math.nan
        return float(self.col("err_mm")[-1]), float(self.col("err_deg")[-1])

    @property
    def converged(self) -> bool:
        return bool(len(self)) and bool(self.col("converged")[-1]) and not self.aborted

    @property
    def convergence_time(self) -> float | None:
        """Start of the final unbroken run of converged updates (the first one when latched)."""
        c = self.col("converged")
        if not self.converged:
            return None
        bad = np.nonzero(c == 0)[0]
        idx = 0 if len(bad) == 0 else bad[-1] + 1
        return float(self.col("t")[idx])

    def similarity_at_perception(self):
        """(t, ncc, nssd, mi) at the perception updates."""
        t = self.col("t")
        step = self.scenario.perception_every
        idx = np.arange(0, len(t), step)
        return t[idx], self.col("ncc")[idx], self.col("nssd")[idx], self.col("mi")[idx]

    def force_rms_error(self, after: float = 1.0) -> float:
        t, f = self.col("t"), self.col("Fz")
        sel = t >= after
        if not sel.any():
            return math.nan
        return metrics.rms(f[sel] - self.scenario.force_gains.desired_force)

    def similarity_improvement(self) -> dict:
        _, n, s, m = self.similarity_at_perception()
        if not len(n):
            return {"ncc": math.nan, "nssd": math.nan, "mi": math.nan}
        h = self.reference_entropy or 1.0
        return {"ncc": float(100.0 * (n[-1] - n[0])),
                "nssd": float(100.0 * (s[-1] - s[0])),
                "mi": float(100.0 * (m[-1] - m[0]) / h)}

    def summary(self) -> dict:
        err_mm, err_deg = self.final_error
        return {"seed": self.seed, "status": self.status, "reason": self.reason,
                "records": len(self), "final_error_mm": err_mm, "final_error_deg": err_deg,
                "converged": self.converged, "convergence_time": self.convergence_time,
                "force_rms_error": self.force_rms_error(),
                "similarity_improvement_pct": self.similarity_improvement(),
                "max_ssd": self.max_ssd}


def _append(cols: dict, rots: list, t, pose: kin.Pose, ref: kin.Pose, fz,
            cmd: servo.ServoCommand, per: PerceptionResult | None, sims, converged):
    err_mm, err_deg = metrics.pose_error(pose, ref)
    p = pose.translation
    rots.append(pose.rotation)
    v, w = cmd.fused.linear, cmd.fused.angular
    iv, iw = cmd.ibvs.linear, cmd.ibvs.angular
    dist = per.distances if per is not None else {}
    row = (t, p[0], p[1], p[2], None, None, None, None, err_mm, err_deg, fz,
           v[0], v[1], v[2], w[0], w[1], w[2], iv[0], iv[2], iw[1],
           cmd.out_of_plane_wx, cmd.inplane_normal_wy, cmd.force_vz,
           dist.get("PL"), dist.get("RS"), sims[0], sims[1], sims[2], int(converged))
    for name, val in zip(CSV_COLUMNS, row):
        cols[name].append(val)


def _fill_quaternions(cols: dict, rots: list):
    if not rots:
        return
    xyzw = Rotation.from_matrix(np.array(rots)).as_quat()
    # keep consecutive samples on one hemisphere so the columns are continuous
    flips = np.einsum("ij,ij->i", xyzw[1:], xyzw[:-1]) < 0
    sign = np.concatenate([[1.0], np.where(np.cumsum(flips) % 2 == 1, -1.0, 1.0)])
    xyzw *= sign[:, None]
    for i, name in enumerate(("qx", "qy", "qz", "qw")):
        cols[name] = xyzw[:, i].tolist()


def run_trial(s: Scenario, seed: int | None = None, dump_frames: bool = False,
              template: afm.Template | None = None) -> TrialLog:
    """Run one closed-loop trial; deterministic for a fixed (scenario, seed) unless live."""
    seed = s.seed if seed is None else seed
    model = s.trial_phantom(seed)
    if template is None:
        template = afm.Template.load(s.template) if s.template else sip_template(model, s.image)
    perceiver = Perceiver(s, template, model, seed)

    ref_frame, _ = ph.acquire(model, model.sip_pose_at(0.0), s.image, 0.0,
                                   _frame_seed(seed, -1))
    ref_img = ref_frame.intensities
    href = metrics.entropy(ref_img)

    pose = initial_pose(model, s)
    arm = q = None
    if s.rig == "arm":
        arm = s.arm.build()
        q = kin.solve_ik(arm, pose)
        pose = kin.forward_kinematics(arm, q)

    normal = servo.NormalPositioner(s.normal_gains)
    force = servo.ForceRegulator(s.force_gains)
    dt, every = s.dt, s.perception_every
    cols = {c: [] for c in CSV_COLUMNS}
    rots = []
    fixed_ref = model.sip_pose_at(0.0) if model.respiration_amplitude == 0.0 else None
    ssds = []
    frames = {}
    status, reason = "completed", ""
    ibvs_twist = kin.Twist.zero("probe")
    converged = False
    fresh = False
    per = None
    sims = (math.nan, math.nan, math.nan)
    fault_steps = 0
    fault_limit = int(round(SENSOR_FAULT_LIMIT * s.control_rate))

    slot = worker = None
    frames_q: queue.Queue | None = None
    seen = 0
    if s.live:
        slot = LatestSlot()
        frames_q = queue.Queue(maxsize=1)

        def _work():
            while True:
                item = frames_q.get()
                if item is None:
                    return
                slot.put(perceiver.process(*item))

        worker = threading.Thread(target=_work, name="perception", daemon=True)
        worker.start()

    try:
        for k in range(s.steps + 1):
            t = k * dt
            if k % every == 0:
                try:
                    frame, gt = perceiver.acquire(pose, t, k)
                except ph.NoContactError as exc:
                    status, reason = "aborted_contact", str(exc)
                    break
                ssd = metrics.ssd(frame.intensities, ref_img)
                ssds.append(ssd)
                sims = (metrics.ncc(frame.intensities, ref_img), ssd,
                        metrics.mutual_information(frame.intensities, ref_img))
                if dump_frames:
                    frames[k] = frame
                if s.live:
                    try:
                        frames_q.get_nowait()
                    except queue.Empty:
                        pass
                    frames_q.put((frame, gt, t))
                else:
                    per = perceiver.process(frame, gt, t)
                    fresh = True
            if s.live:
                version, latest = slot.get()
                if version != seen and latest is not None:
                    seen, per, fresh = version, latest, True
            if fresh:
                fresh = False
                if per.ibvs is not None and not (converged and s.latch_convergence):
                    ibvs_twist, converged = per.ibvs

            pen = float(model.depth_below_skin(pose.translation, t))
            if pen < -ph.CONTACT_MARGIN:
                status, reason = "aborted_contact", f"probe {-pen * 1e3:.1f} mm above skin at t={t:.3f}"
                break
            fz = ph.contact_force(model, pose, t)

            wx = wy = 0.0
            if s.controllers.normal:
                d = ph.laser_distances(model, pose, t)
                try:
                    wx, wy = normal.step(servo.LaserReadings(d, t), dt)
                    fault_steps = 0
                except servo.SensorFaultError:
                    fault_steps += 1
                    # faulted for fault_steps control steps in a row
                    if fault_steps > fault_limit:
                        status, reason = "aborted_sensor", f"range sensor fault until t={t:.3f}"
                        break
            vfz = force.step(fz) if s.controllers.force else 0.0
            it = ibvs_twist if s.controllers.ibvs else kin.Twist.zero("probe")
            cmd = servo.fuse(wx, wy, it, vfz)
            ref = fixed_ref if fixed_ref is not None else model.sip_pose_at(t)
            _append(cols, rots, t, pose, ref, fz, cmd, per, sims, converged)
            if k == s.steps:
                break

            tb = kin.transform_twist(cmd.fused, pose)
            v = kin.point_velocity(tb, pose.translation)
            if arm is None:
                pose = kin.integrate_pose(pose, kin.Twist(v, tb.angular, "base"), dt)
            else:
                J = kin.geometric_jacobian(arm, q)
                q = q + kin.joint_velocities(J, np.concatenate([v, tb.angular]),
                                             s.arm.damping) * dt
                pose = kin.forward_kinematics(arm, q)
    finally:
        if worker is not None:
            try:
                frames_q.get_nowait()
            except queue.Empty:
                pass
            frames_q.put(None)
            worker.join(timeout=5.0)

    _fill_quaternions(cols, rots)
    max_ssd = max(ssds) if ssds else 0.0
    cols["nssd"] = [1.0 - x / max_ssd if max_ssd > 0 else 1.0 for x in cols["nssd"]]
    if status != "completed":
        log.warning("trial seed=%d %s: %s", seed, status, reason)
    return TrialLog(s, seed, cols, status, reason, frames, max_ssd, href)


@dataclass
class SummaryReport:
    scenario: str
    trials: list                        # per-trial summary dicts
    final_error_mm: tuple = (math.nan, 0.0)     # mean, std over completed trials
    final_error_deg: tuple = (math.nan, 0.0)
    similarity_improvement_pct: dict = field(default_factory=dict)
    force_rms_error: tuple = (math.nan, 0.0)
    converged: bool = False
    convergence_time: tuple = (math.nan, 0.0)
    n_aborted: int = 0

    @classmethod
    def from_logs(cls, name: str, logs: list) -> "SummaryReport":
        done = [lg for lg in logs if not lg.aborted]
        n_aborted = len(logs) - len(done)
        if n_aborted:
            warnings.warn(f"{n_aborted} aborted trial(s) excluded from statistics")

        def ms(xs):
            xs = [x for x in xs if x is not None]
            if not xs:
                return (math.nan, 0.0)
            a = np.asarray(xs, dtype=float)
            return (float(a.mean()), float(a.std()))

        imps = [lg.similarity_improvement() for lg in done]
        sim = {m: ms([i[m] for i in imps]) for m in ("ncc", "nssd", "mi")}
        return cls(name, [lg.summary() for lg in logs],
                   ms([lg.final_error[0] for lg in done]),
                   ms([lg.final_error[1] for lg in done]),
                   sim, ms([lg.force_rms_error() for lg in done]),
                   bool(done) and all(lg.converged for lg in done) and not n_aborted,
                   ms([lg.convergence_time for lg in done]), n_aborted)

    def to_dict(self) -> dict:
        """Plain JSON-ready dict; NaN becomes ``None``."""
        return _json_clean(dataclasses.asdict(self))


def _json_clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (list, tuple)):
        return [_json_clean(i) for i in x]
    if isinstance(x, dict):
        return {k: _json_clean(v) for k, v in x.items()}
    return x


def run_sweep(s: Scenario, repeats: int | None = None, dump_frames: bool = False):
    """``repeats`` trials with seeds ``s.seed + i``; returns (SummaryReport, logs)."""
    k = s.repeats if repeats is None else repeats
    if k < 1:
        raise ValueError("repeats must be >= 1")
    template = afm.Template.load(s.template) if s.template else sip_template(s.phantom, s.image)
    logs = [run_trial(s, s.seed + i, dump_frames, template) for i in range(k)]
    return SummaryReport.from_logs(s.name, logs), logs


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, float) and math.isnan(v):
        return ""
    return "%.9g" % v


def trial_csv(trial: TrialLog) -> str:
    lines = [",".join(CSV_COLUMNS)]
    cols = [trial.columns[c] for c in CSV_COLUMNS]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def emit_outputs(trial: TrialLog, out_dir, summary: SummaryReport | None = None) -> list:
    """Write trial.csv, summary.json and any captured frames; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "trial.csv", out / "summary.json"]
        paths[0].write_text(trial_csv(trial))
        data = summary.to_dict() if summary is not None else SummaryReport.from_logs(
            trial.scenario.name, [trial]).to_dict()
        paths[1].write_text(json.dumps(data, indent=2) + "\n")
        for step, frame in sorted(trial.frames.items()):
            paths.append(ph.write_pgm(out / f"frame_{step}.pgm", frame))
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc
    return paths
