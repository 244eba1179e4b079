#!/usr/bin/env python3
"""
Half-rib ambiguity.

The rib cage is periodic, so a start offset beyond half a rib spacing looks
closer to the neighbouring SIP than to the target one. This script sweeps the
lateral start offset across that boundary. It reports where the probe ends up
relative to the target SIP.

Usage:
    python3 demos/half_rib_ambiguity.py
"""

import numpy as np

from sipservo import harness


def main():
    d = harness.Scenario().phantom.rib_spacing
    print(f"rib spacing {1e3 * d:.1f} mm, boundary at {0.5e3 * d:.2f} mm\n")
    print(f"{'offset (mm)':>12} {'final err (mm)':>15} {'lands on':>10}")
    for offset in np.array([0.25, 0.4, 0.5, 0.6, 0.75]) * d:
        s = harness.Scenario(offset=float(offset), quantitative=False,
                             segmenter="oracle", duration=4.0)
        lg = harness.run_trial(s)
        mm = lg.final_error[0]
        where = "target" if mm < 0.25e3 * d else "neighbour"
        print(f"{1e3 * offset:12.2f} {mm:15.2f} {where:>10}")


if __name__ == "__main__":
    main()
