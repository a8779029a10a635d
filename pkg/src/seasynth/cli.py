"""Command-line entry point: ``seasynth {render,gen,augment,eval,sheet}``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import SeasynthError
from .evaluation import DEFAULT_TAUS, check_report, evaluate, load_pairs


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None


def _tau(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("tau must lie in (0, 1)")
    return v


def _env_workers():
    env = os.environ.get("SEASYNTH_WORKERS")
    if env is None:
        return None
    try:
        return _positive_int(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"SEASYNTH_WORKERS: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seasynth", description="Synthetic overhead whale imagery with ground-truth masks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("render", help="render one scene file")
    r.add_argument("--scene", required=True, help="SceneSpec JSON file")
    r.add_argument("--seed", type=_seed, default=0)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--workers", type=_positive_int, default=None, help="tile threads (default $SEASYNTH_WORKERS or 1)")

    g = sub.add_parser("gen", help="generate a dataset from a range configuration")
    g.add_argument("--config", required=True, help="RangeConfig JSON file")
    g.add_argument("--out", default=None, help="output directory (overrides output_dir in the config)")
    g.add_argument("--workers", type=_positive_int, default=None, help="worker processes (default $SEASYNTH_WORKERS)")

    a = sub.add_parser("augment", help="write one augmented copy of every manifest sample")
    a.add_argument("--manifest", required=True)
    a.add_argument("--spec", required=True, help="AugmentSpec JSON file")
    a.add_argument("--seed", type=_seed, default=0)
    a.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval", help="score prediction masks against ground truth")
    e.add_argument("--pairs", required=True, help="JSONL pair list")
    e.add_argument("--tau", type=_tau, action="append", default=None,
                   help="IoU threshold, repeatable (default 0.5 and 0.6)")
    e.add_argument("--out", default=None, help="write the JSON report here")

    s = sub.add_parser("sheet", help="tile the first rows*cols images of a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--rows", type=_positive_int, required=True)
    s.add_argument("--cols", type=_positive_int, required=True)
    s.add_argument("--out", required=True, help="output PNG file")
    return p


def _cmd_render(args, out):
    from .render import render, save_output
    from .scene import load_scene

    scene = load_scene(args.scene)
    workers = args.workers or _env_workers() or 1
    result = render(scene, args.seed, workers=workers)
    ip, mp = save_output(result, args.out)
    meta = Path(args.out) / "render.json"
    meta.write_text(json.dumps(result.metadata(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {ip}, {mp}, {meta}", file=out)


def _cmd_gen(args, out):
    from .dataset import generate, load_config

    if not os.path.exists(args.config):
        raise FileNotFoundError(f"config file not found: {args.config}")
    config = load_config(args.config)
    workers = args.workers or _env_workers()
    manifest = generate(config, workers=workers, output_dir=args.out)
    print(f"wrote {len(manifest)} samples to {manifest.root}", file=out)


def _cmd_augment(args, out):
    from .dataset import DatasetManifest, augment_manifest, load_augment_spec

    for p in (args.manifest, args.spec):
        if not os.path.exists(p):
            raise FileNotFoundError(f"file not found: {p}")
    spec = load_augment_spec(args.spec)
    manifest = DatasetManifest.load(args.manifest)
    result = augment_manifest(manifest, spec, args.seed, args.out)
    print(f"wrote {len(result)} augmented samples to {result.root}", file=out)


def _cmd_eval(args, out):
    if not os.path.exists(args.pairs):
        raise FileNotFoundError(f"pair list not found: {args.pairs}")
    pairs = load_pairs(args.pairs)
    taus = args.tau or list(DEFAULT_TAUS)
    report = evaluate(pairs, taus, method=Path(args.pairs).stem, data_size=str(len(pairs)))
    check_report(report)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    out.write(report.table())


def _cmd_sheet(args, out):
    from .dataset import DatasetManifest, contact_sheet
    from .render import save_png

    if not os.path.exists(args.manifest):
        raise FileNotFoundError(f"manifest not found: {args.manifest}")
    manifest = DatasetManifest.load(args.manifest)
    sheet = contact_sheet(manifest, args.rows, args.cols)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_png(sheet, args.out)
    print(f"wrote {args.out} ({sheet.shape[1]}x{sheet.shape[0]})", file=out)


_COMMANDS = {"render": _cmd_render, "gen": _cmd_gen, "augment": _cmd_augment, "eval": _cmd_eval, "sheet": _cmd_sheet}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        _COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"seasynth {args.command}: {exc}", file=err)
        return 1
    except (SeasynthError, OSError, ValueError) as exc:
        print(f"seasynth {args.command}: error: {exc}", file=err)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
