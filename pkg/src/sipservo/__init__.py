"""Simulated lung-ultrasound probe navigation to a standardized imaging plane.

Modules: ``kinematics`` (poses, twists, arm Jacobians), ``phantom`` (chest
model, range sensors, synthetic B-mode frames), ``perception`` (segmentation
and landmark centroids), ``afm`` (template matching), ``servo`` (IBVS, normal
and force control), ``metrics`` and ``harness`` (closed-loop trials).
"""

from .afm import Template, build_afm, match, visual_error
from .harness import Scenario, TrialLog, SummaryReport, emit_outputs, run_sweep, run_trial
from .kinematics import Pose, Twist
from .phantom import ImageSpec, PhantomModel

__version__ = "0.1.0"

__all__ = ["Pose", "Twist", "ImageSpec", "PhantomModel", "Template", "match", "build_afm",
           "visual_error", "Scenario", "TrialLog", "SummaryReport", "run_trial", "run_sweep",
           "emit_outputs"]
