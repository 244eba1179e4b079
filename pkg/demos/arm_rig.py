#!/usr/bin/env python3
"""
Probe on a 7-DoF arm.

The same navigation task as the phantom protocol, but the probe twist is
mapped to joint rates with damped least squares. The joints are then
integrated. The result is compared with the direct rig that moves the probe
pose itself.

Usage:
    python3 demos/arm_rig.py
"""

import dataclasses

import numpy as np

from sipservo import harness


def main():
    s = harness.Scenario(duration=5.0, segmenter="oracle")
    for rig in ("direct", "arm"):
        lg = harness.run_trial(dataclasses.replace(s, rig=rig))
        mm, deg = lg.final_error
        t = lg.convergence_time
        print(f"{rig:>6}: final {mm:.3f} mm / {deg:.3f} deg, converged at "
              f"{'never' if t is None else f'{t:.2f} s'}, "
              f"peak |v| {np.abs(lg.col('v_x')).max() * 1e3:.1f} mm/s")


if __name__ == "__main__":
    main()
