"""Batch entry points: simulate, train, benchmark, serve, eval.

Every command is deterministic given its flags and seed; seeds are always
printed so any reported number can be replayed. Diagnostics go to stderr,
data to files or stdout; exit code 0 means the command's postcondition held.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .empirical import MIN_PRESENCE, fit_distributions, sparse_map_to_json
from .errors import IpsError, MalformedRecord
from .gpr import densify, dense_map_from_json, dense_map_to_json
from .localize import (
    MIN_MATCH,
    TOP_K,
    Observation,
    evaluate,
    records_to_csv,
    summary_to_json,
)
from .model import (
    HEADINGS,
    SurveyArea,
    Heading,
    observation_readings_to_json,
    parse_timestamp,
    read_jsonl,
    readings_from_json,
    render_timestamp,
    write_jsonl,
)
from .simulate import (
    grid_reference_points,
    load_scenario,
    probe_rng,
    simulate_rssi,
    simulate_survey,
    simulate_walk,
)

_EPILOG = "config files are JSON; see README for file formats"


# -- observation-with-truth JSONL (walk files, eval input) --------------------

_WALK_KEYS = {"x", "y", "t", "heading_deg", "readings"}


def walk_entry_to_json(obs: Observation, truth: tuple[float, float]) -> dict:
    return {
        "x": truth[0],
        "y": truth[1],
        "t": render_timestamp(obs.timestamp),
        "heading_deg": obs.heading_hint.degrees if obs.heading_hint else None,
        "readings": observation_readings_to_json(obs.readings),
    }


def walk_entry_from_json(obj: dict) -> tuple[Observation, tuple[float, float]]:
    unknown = obj.keys() - _WALK_KEYS
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r}")
    missing = {"x", "y", "t", "readings"} - obj.keys()
    if missing:
        raise ValueError(f"missing key {sorted(missing)[0]!r}")
    heading = None
    if obj.get("heading_deg") is not None:
        heading = Heading.from_degrees(obj["heading_deg"])
    obs = Observation(
        readings=readings_from_json(obj["readings"]),
        timestamp=parse_timestamp(obj["t"]),
        heading_hint=heading,
    )
    return obs, (float(obj["x"]), float(obj["y"]))


def read_walk_file(path: Path) -> list[tuple[Observation, tuple[float, float]]]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                raise MalformedRecord(lineno, "blank line")
            try:
                out.append(walk_entry_from_json(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise MalformedRecord(lineno, str(exc)) from exc
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, rng_seed=args.seed)
    print(f"seed: {scenario.rng_seed}", file=sys.stderr)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dropout = not args.no_dropout

    if args.walk:
        waypoints = _parse_waypoints(args.waypoints)
        entries = simulate_walk(
            scenario, waypoints, speed=args.speed, scan_period=args.period, dropout=dropout
        )
        path = out_dir / "walk.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for obs, truth in entries:
                f.write(json.dumps(walk_entry_to_json(obs, truth), separators=(",", ":")))
                f.write("\n")
        print(f"{len(entries)} scans -> {path}")
        return 0

    rps = grid_reference_points(scenario.area, args.rp_spacing)
    area = SurveyArea(scenario.area.width, scenario.area.height, tuple(rps))
    samples = simulate_survey(scenario, rps, args.scans_per_cell, dropout=dropout)
    samples_path = out_dir / "samples.jsonl"
    with open(samples_path, "wb") as f:
        write_jsonl(samples, f)
    area_path = out_dir / "area.json"
    with open(area_path, "w", encoding="utf-8") as f:
        json.dump(area.to_json(), f, separators=(",", ":"))
        f.write("\n")
    print(f"{len(samples)} samples -> {samples_path}")
    return 0


def _parse_waypoints(text: str) -> list[tuple[float, float]]:
    points = []
    for chunk in text.split(";"):
        x, y = chunk.split(",")
        points.append((float(x), float(y)))
    return points


def cmd_train(args: argparse.Namespace) -> int:
    with open(args.area, "r", encoding="utf-8") as f:
        area = SurveyArea.from_json(json.load(f))
    with open(args.samples, "rb") as f:
        samples = read_jsonl(f)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = [out_dir / "sparse_map.json", out_dir / "radiomap.json", out_dir / "report.json"]
    try:
        sparse = fit_distributions(samples, area, args.min_presence)
        dense = densify(sparse, args.spacing, args.hyper_policy)
        report = {
            "status": "trained",
            "sample_count": len(samples),
            "spacing": args.spacing,
            "hyper_policy": args.hyper_policy,
            "min_presence": args.min_presence,
            "grid": {"nx": dense.nx, "ny": dense.ny},
            "surfaces": [
                {
                    "heading": heading.name,
                    "bssid": ap.bssid,
                    "band": ap.band.value,
                    "hyperparams": surface.hyperparams.to_json(),
                }
                for (heading, ap), surface in sorted(
                    dense.surfaces.items(), key=lambda kv: (kv[0][0].degrees, kv[0][1].key())
                )
            ],
            "skipped": [
                {"heading": h.name, "bssid": ap.bssid, "band": ap.band.value}
                for h, ap in dense.skipped
            ],
        }
        _dump_json(out_dir / "sparse_map.json", sparse_map_to_json(sparse))
        _dump_json(out_dir / "radiomap.json", dense_map_to_json(dense))
        _dump_json(out_dir / "report.json", report)
    except Exception:
        for path in artifacts:
            path.unlink(missing_ok=True)
        raise
    print(f"trained {len(report['surfaces'])} surfaces "
          f"({len(report['skipped'])} skipped) -> {out_dir / 'radiomap.json'}")
    return 0


def _dump_json(path: Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, separators=(",", ":"))
        f.write("\n")


def cmd_benchmark(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    scenario = replace(scenario, rng_seed=args.seed)
    print(f"seed: {scenario.rng_seed}", file=sys.stderr)
    dropout = not args.no_dropout

    rps = grid_reference_points(scenario.area, args.rp_spacing)
    area = SurveyArea(scenario.area.width, scenario.area.height, tuple(rps))
    samples = simulate_survey(scenario, rps, args.scans_per_cell, dropout=dropout)
    print(f"surveyed {len(samples)} samples at {len(rps)} reference points", file=sys.stderr)
    sparse = fit_distributions(samples, area, args.min_presence)
    dense = densify(sparse, args.spacing, args.hyper_policy)
    print(f"trained {len(dense.surfaces)} surfaces ({len(dense.skipped)} skipped)",
          file=sys.stderr)

    rng = probe_rng(scenario)
    pairs = []
    for i in range(args.test_count):
        if args.test_at_rps:
            rp = rps[i % len(rps)]
            position = (rp.x, rp.y)
            heading = HEADINGS[i % 4]
        else:
            position = (
                float(rng.uniform(0.0, scenario.area.width)),
                float(rng.uniform(0.0, scenario.area.height)),
            )
            heading = HEADINGS[int(rng.integers(0, 4))]
        obs = simulate_rssi(scenario, position, heading, rng, dropout=dropout)
        if args.known_heading:
            obs = Observation(
                readings=obs.readings, timestamp=obs.timestamp, heading_hint=heading
            )
        pairs.append((obs, position))

    _, summary = evaluate(pairs, dense, k=args.k, min_match=args.min_match)
    metrics = summary_to_json(summary)
    if args.out:
        _dump_json(Path(args.out), metrics)
    print(json.dumps(metrics, separators=(",", ":")))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    app = create_app(args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    with open(args.radiomap, "r", encoding="utf-8") as f:
        dense = dense_map_from_json(json.load(f))
    pairs = read_walk_file(Path(args.observations))
    records, summary = evaluate(pairs, dense, k=args.k, min_match=args.min_match)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "records.csv", "w", encoding="utf-8") as f:
        records_to_csv(records, f)
    _dump_json(out_dir / "summary.json", summary_to_json(summary))
    print(json.dumps(summary_to_json(summary), separators=(",", ":")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ips",
        description="dual-band WiFi RSSI fingerprinting: survey, train, localize",
        epilog=_EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )

    p = add_parser("simulate", "generate a synthetic survey or walk")
    p.add_argument("--scenario", required=True, help="scenario.json path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rp-spacing", type=float, default=1.0, help="reference grid spacing, m")
    p.add_argument("--scans-per-cell", type=int, default=200)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--no-dropout", action="store_true", help="disable weak-AP dropout")
    p.add_argument("--walk", action="store_true", help="emit a walk instead of a survey")
    p.add_argument("--waypoints", default="", help='walk path: "x,y;x,y;..."')
    p.add_argument("--speed", type=float, default=1.0, help="walk speed, m/s")
    p.add_argument("--period", type=float, default=1.0, help="scan period, s")
    p.set_defaults(func=cmd_simulate)

    p = add_parser("train", "fit the radio map from a survey file")
    p.add_argument("--samples", required=True, help="samples.jsonl path")
    p.add_argument("--area", required=True, help="area.json path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--spacing", type=float, default=1.0, help="dense grid spacing, m")
    p.add_argument("--hyper-policy", choices=("fixed", "grid-search"), default="fixed")
    p.add_argument("--min-presence", type=float, default=MIN_PRESENCE)
    p.set_defaults(func=cmd_train)

    p = add_parser("benchmark", "simulate, train, and score end to end")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rp-spacing", type=float, default=1.0)
    p.add_argument("--scans-per-cell", type=int, default=50)
    p.add_argument("--test-count", type=int, default=200)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--hyper-policy", choices=("fixed", "grid-search"), default="grid-search")
    p.add_argument("--min-presence", type=float, default=MIN_PRESENCE)
    p.add_argument("--min-match", type=int, default=MIN_MATCH)
    p.add_argument("--k", type=int, default=TOP_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write metrics JSON here")
    p.add_argument("--no-dropout", action="store_true")
    p.add_argument("--test-at-rps", action="store_true",
                   help="probe at reference points instead of uniform positions")
    p.add_argument("--known-heading", action="store_true",
                   help="pass the true heading to the localizer")
    p.set_defaults(func=cmd_benchmark)

    p = add_parser("serve", "run the ingestion/localization service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = add_parser("eval", "score recorded observations against a radio map")
    p.add_argument("--radiomap", required=True, help="radiomap.json path")
    p.add_argument("--observations", required=True, help="walk.jsonl path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-match", type=int, default=MIN_MATCH)
    p.add_argument("--k", type=int, default=TOP_K)
    p.set_defaults(func=cmd_eval)

    return parser


def validate_args(args: argparse.Namespace) -> None:
    positive = [
        ("rp_spacing", "rp-spacing"), ("scans_per_cell", "scans-per-cell"),
        ("spacing", "spacing"), ("test_count", "test-count"),
        ("speed", "speed"), ("period", "period"), ("k", "k"),
    ]
    for attr, flag in positive:
        if hasattr(args, attr) and getattr(args, attr) is not None:
            if getattr(args, attr) <= 0:
                raise SystemExit(f"--{flag} must be > 0")
    if getattr(args, "walk", False) and not args.waypoints:
        raise SystemExit("--walk requires --waypoints")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    validate_args(args)
    try:
        return args.func(args)
    except IpsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
