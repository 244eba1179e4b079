#!/usr/bin/env python3
"""
From one ultrasound frame to a visual error.

Renders a frame away from the SIP and segments it with the classical
segmenter. The instances are then matched against the SIP template, and the
result is converted to a metric error and a servo twist. Frames are written
as PGM so they can be inspected with any image viewer.

Usage:
    python3 demos/frames_and_matching.py [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from sipservo import afm, harness, metrics, servo
from sipservo import kinematics as kin
from sipservo import perception as pc
from sipservo import phantom as ph


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--out", type=Path, default=Path("demo_frames"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    model, spec = ph.PhantomModel(), ph.ImageSpec()
    template = harness.sip_template(model, spec)
    sip = model.sip_pose
    ref, _ = ph.acquire(model, sip, spec, 0.0, seed=0)
    ph.write_pgm(args.out / "at_sip.pgm", ref)

    seg = pc.ClassicalSegmenter(spec)
    for dx in (0.0, 0.005, 0.010, 0.0175):
        pose = kin.Pose(sip.rotation, sip.translation + [dx, 0.0, 0.0])
        frame, gt = ph.acquire(model, pose, spec, 0.0, seed=1)
        ph.write_pgm(args.out / f"offset_{1e3 * dx:04.1f}mm.pgm", frame)

        mask = seg.segment(frame)
        feats = pc.category_features(pc.extract_semantic_instances(mask))
        pairs = afm.build_afm(feats, template)
        errors = [afm.visual_error(p, spec) for p in pairs.values()]
        cmd = servo.ibvs_command(errors)
        px = {k: round(v, 1) if v is not None else None
              for k, v in metrics.paired_pixel_distance(pairs).items()}
        print(f"offset {1e3 * dx:5.1f} mm  NCC {metrics.ncc(frame.intensities, ref.intensities):6.3f}"
              f"  paired px {px}  v_x {1e3 * cmd.twist.linear[0]:7.2f} mm/s"
              f"  Dice PL {pc.dice_index(mask.pl, gt.pl_mask):.3f}")
    print(f"\nframes written to {args.out}/")


if __name__ == "__main__":
    main()
