"""Command line entry point: ``sipservo run`` and ``sipservo template``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import harness
from .phantom import ImageSpec, PhantomModel

EXIT_CONVERGED, EXIT_NOT_CONVERGED, EXIT_ABORTED = 0, 1, 2


def _run(args) -> int:
    s = harness.Scenario.load(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.rig is not None:
        changes["rig"] = args.rig
    if changes:
        s = dataclasses.replace(s, **changes)
    k = args.repeats if args.repeats is not None else s.repeats
    report, logs = harness.run_sweep(s, k, dump_frames=args.dump_frames)
    out = Path(args.out)
    if len(logs) == 1:
        harness.emit_outputs(logs[0], out, report)
    else:
        for i, lg in enumerate(logs):
            harness.emit_outputs(lg, out / f"repeat_{i}")
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    mm, deg = report.final_error_mm, report.final_error_deg
    print(f"{s.name}: {len(logs)} trial(s), {report.n_aborted} aborted, "
          f"final error {mm[0]:.3f} +/- {mm[1]:.3f} mm, {deg[0]:.3f} +/- {deg[1]:.3f} deg, "
          f"converged={report.converged}")
    if report.n_aborted:
        return EXIT_ABORTED
    return EXIT_CONVERGED if report.converged else EXIT_NOT_CONVERGED


def _template(args) -> int:
    model, spec = PhantomModel(), ImageSpec()
    if args.scenario:
        s = harness.Scenario.load(args.scenario)
        model, spec = s.phantom, s.image
    path = harness.sip_template(model, spec).save(args.out)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sipservo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run closed-loop trials from a scenario file")
    r.add_argument("--scenario", required=True, help="scenario JSON file")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--repeats", type=int, default=None)
    r.add_argument("--rig", choices=harness.RIGS, default=None)
    r.add_argument("--dump-frames", action="store_true", help="write frame_<step>.pgm files")
    r.set_defaults(func=_run)

    t = sub.add_parser("template", help="write the phantom SIP template JSON")
    t.add_argument("--out", required=True)
    t.add_argument("--scenario", default=None, help="take phantom and image spec from here")
    t.set_defaults(func=_template)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ScenarioError, OSError) as exc:
        print(f"sipservo: error: {exc}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
