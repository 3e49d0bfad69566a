"""``actualcause`` command line.

Exit codes: 0 success, 2 configuration error, 3 event not realized.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .causes import DEFAULT_MAX_SIZE, DEFINITIONS, EventNotRealized
from .experiments import (
    DEMO_N,
    DEMO_SEED,
    ENVS,
    GOOFSPIEL,
    ExperimentConfig,
    cmd_causes,
    cmd_demo,
    cmd_metrics,
    cmd_properties,
    cmd_responsibility,
    cmd_simulate,
)
from .properties import CSV_COLUMNS
from .responsibility import METHODS

EXIT_OK, EXIT_CONFIG, EXIT_NOT_REALIZED = 0, 2, 3
_DEF = {d.lower(): d for d in DEFINITIONS}
_METH = {m.lower(): m for m in METHODS}


class ConfigError(ValueError):
    pass


def _deck(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad deck {text!r}; expected e.g. 5,4,3,2,1")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--env", choices=ENVS, default=GOOFSPIEL)
    common.add_argument("--n", type=int, default=DEMO_N)
    common.add_argument("--deck", type=_deck, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trajectories", type=int, default=50)
    common.add_argument("--definition", choices=sorted(_DEF), action="append")
    common.add_argument("--max-size", type=int, default=DEFAULT_MAX_SIZE)
    common.add_argument("--method", choices=sorted(_METH), action="append")
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=None, help="process pool size")
    common.add_argument("--ns", type=str, default=None, help="comma-separated N values for batch commands")

    p = argparse.ArgumentParser(prog="actualcause", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "roll out sampled contexts and write trajectory logs"),
        ("demo", "cause tables and responsibility for the demo trajectory"),
        ("causes", "enumerate cause-witness pairs of one trajectory"),
        ("responsibility", "degrees of responsibility of one trajectory"),
        ("properties", "property-violation and correction-impact statistics"),
        ("metrics", "distinct causes, cause sizes and improvements"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return p


def _definitions(args, default) -> tuple:
    return tuple(_DEF[d] for d in args.definition) if args.definition else default


def _methods(args) -> tuple:
    return tuple(_METH[m] for m in args.method) if args.method else METHODS


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _seed(args, default=DEMO_SEED) -> int:
    return default if args.seed is None else args.seed


def run(args) -> None:
    if args.trajectories < 0:
        raise ConfigError("--trajectories must be nonnegative")
    if args.max_size < 1:
        raise ConfigError("--max-size must be at least 1")
    cmd = args.command

    if cmd == "simulate":
        out_dir = args.out
        trajs = cmd_simulate(args.env, args.n, _seed(args, 0), args.trajectories, args.deck)
        names = [f"trajectory_{k:05d}.json" for k in range(len(trajs))]
        manifest = _dump({"env": args.env, "n": args.n, "seed": _seed(args, 0), "files": names})
        if out_dir is None:
            sys.stdout.write("".join(t + "\n" for t in trajs))
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, t in zip(names, trajs):
            (out_dir / name).write_text(t + "\n", encoding="utf-8")
        (out_dir / "manifest.json").write_text(manifest, encoding="utf-8")
        return

    if cmd == "demo":
        if args.env != GOOFSPIEL:
            raise ConfigError("demo runs on goofspiel")
        res = cmd_demo(_seed(args), args.n, args.deck, args.max_size, _definitions(args, ("AC", "BF", "HP")))
        _emit(_csv(res.csv_rows()) if args.format == "csv" else _dump(res.to_json()), args.out)
        return

    if cmd == "causes":
        (d,) = _definitions(args, ("AC",))[:1]
        cs = cmd_causes(args.env, d, args.n, args.deck, _seed(args), args.max_size)
        if args.format == "csv":
            rows = [("cause", "cf", "contingency", "improvement")]
            for p in cs.pairs:
                j = p.to_json()
                rows.append((json.dumps(j["cause"]), json.dumps(j["cf"]), json.dumps(j["contingency"]), j.get("improvement", "")))
            _emit(_csv(rows), args.out)
        else:
            _emit(_dump(cs.to_json()), args.out)
        return

    if cmd == "responsibility":
        (d,) = _definitions(args, ("AC",))[:1]
        profiles = cmd_responsibility(args.env, d, _methods(args), args.n, args.deck, _seed(args), args.max_size)
        if args.format == "csv":
            rows = [("method", "agent", "degree")]
            for pr in profiles:
                for i, v in pr.to_json()["degrees"].items():
                    rows.append((pr.method, i, v))
            _emit(_csv(rows), args.out)
        else:
            _emit(_dump([p.to_json() for p in profiles]), args.out)
        return

    if cmd in ("properties", "metrics"):
        cfg = ExperimentConfig(
            env=args.env,
            n=args.n,
            trajectories=args.trajectories,
            seed=_seed(args, 0),
            definitions=_definitions(args, DEFINITIONS),
            max_size=args.max_size,
            methods=_methods(args),
            deck=args.deck,
            workers=args.workers,
        )
        ns = tuple(int(x) for x in args.ns.split(",")) if args.ns else None
        fn = cmd_properties if cmd == "properties" else cmd_metrics
        rows = fn(cfg, ns)
        if args.format == "csv":
            _emit(_csv([CSV_COLUMNS, *rows]), args.out)
        else:
            _emit(_dump([dict(zip(CSV_COLUMNS, r)) for r in rows]), args.out)
        return


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except EventNotRealized as e:
        print(f"event not realized in the actual world: {e}", file=sys.stderr)
        return EXIT_NOT_REALIZED
    except (ConfigError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
