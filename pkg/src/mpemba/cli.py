"""Command-line front end.

Subcommands: dynamics (asymmetry vs time over a circuit ensemble),
latetime (long-depth sweep over subsystem sizes / tilt angles with
analytic columns attached), oracle (closed-form late-time table, no
simulation), scan-theta (locate the angle maximizing the late-time
asymmetry).

Angles are accepted either in radians ("0.628") or as multiples of pi
("0.2pi") so figure labels can be typed verbatim.  A JSON config file
may supply any flag by destination name; explicit command-line flags
win over file values.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .circuits import MODES, CircuitConfig, canonical_mode
from .experiment import (DEFAULT_MEMORY_BOUND, GIB, ExperimentConfig, emit,
                         render, run_ensemble, run_latetime_sweep)
from .gates import SYMMETRIES
from .oracle import oracle_rows, theta_scan
from .states import InitialStateSpec

INIT_NAMES = {
    "ferro": "ferro",
    "neel": "neel",
    "domain-wall": "domain_wall",
    "random-ferro": "random_tilt_ferro",
    "random-neel": "random_tilt_neel",
    "ghz": "ghz",
    "staggered-ferro": "staggered_ferro",
}


def parse_theta(text):
    """Radians, or a multiple of pi written like '0.2pi' or '-pi'."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "")
    if s.endswith("pi"):
        head = s[:-2].rstrip("*")
        if head in ("", "+"):
            return math.pi
        if head == "-":
            return -math.pi
        return float(head) * math.pi
    return float(s)


def parse_subsystem(text):
    """Sites as 'start..stop' (half-open) or a comma list like '0,2,5'."""
    if isinstance(text, (list, tuple)):
        return tuple(int(s) for s in text)
    s = str(text).strip()
    if ".." in s:
        start, stop = s.split("..", 1)
        sites = range(int(start), int(stop))
        if len(sites) == 0:
            raise argparse.ArgumentTypeError(f"empty subsystem range {text!r}")
        return tuple(sites)
    return tuple(int(tok) for tok in s.split(","))


def parse_int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).split(",")]


def parse_theta_list(text):
    if isinstance(text, (list, tuple)):
        return [parse_theta(v) for v in text]
    return [parse_theta(tok) for tok in str(text).split(",")]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="number of qubits (even)")
    common.add_argument("--symmetry", choices=SYMMETRIES, default="none")
    common.add_argument("--mode", type=canonical_mode, default="iid",
                        help=f"gate sharing: {'|'.join(MODES)} (aliases t, f, ft)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--memory-gib", type=float,
                        default=DEFAULT_MEMORY_BOUND / GIB,
                        help="refuse runs whose transient estimate exceeds this")
    common.add_argument("--out", help="output file (default: print to stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--config", help="JSON file of flag values; "
                                         "explicit flags override it")

    init = argparse.ArgumentParser(add_help=False)
    init.add_argument("--init", choices=sorted(INIT_NAMES), default="ferro")
    init.add_argument("--theta", type=parse_theta, default=0.0,
                      help="tilt angle; radians or e.g. 0.2pi")
    init.add_argument("--tilt-width", type=parse_theta, default=0.0)
    init.add_argument("--tilt-seed", type=int, default=None,
                      help="freeze random tilts across realizations")

    parser = argparse.ArgumentParser(
        prog="mpemba",
        description="symmetry restoration in random circuits: "
                    "simulation and closed-form late-time values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dynamics", parents=[common, init],
                       help="mean asymmetry vs circuit step")
    p.add_argument("--subsystem", type=parse_subsystem, required=False,
                   help="sites, '0..4' (half-open) or '0,1,2,3'")
    p.add_argument("--depth", type=int, required=False)
    p.add_argument("--shots", type=int, default=100)
    p.add_argument("--times", type=parse_int_list, default=None,
                   help="steps to observe (default: every step)")
    p.add_argument("--renyi2", action="store_true",
                   help="second Renyi asymmetry instead of von Neumann")
    p.add_argument("--measure-symmetry", choices=("u1", "z2", "su2"),
                   default=None, help="sector grouping of the measurement "
                                      "(default: the circuit symmetry)")

    p = sub.add_parser("latetime", parents=[common, init],
                       help="long-depth sweep with analytic columns")
    p.add_argument("--sizes", type=parse_int_list, default=None,
                   help="subsystem sizes |A| to sweep, e.g. 1,2,3")
    p.add_argument("--thetas", type=parse_theta_list, default=None,
                   help="tilt angles to sweep, e.g. 0.1pi,0.3pi")
    p.add_argument("--depth", type=int, default=None,
                   help="circuit steps (default 4*N)")
    p.add_argument("--shots", type=int, default=100)
    p.add_argument("--no-check-convergence", dest="check_convergence",
                   action="store_false",
                   help="skip the doubled-depth convergence column")

    p = sub.add_parser("oracle", parents=[common],
                       help="closed-form late-time table (no simulation)")
    p.add_argument("--sizes", type=parse_int_list, default=None,
                   help="subsystem sizes (default 1..N-1)")
    p.add_argument("--thetas", type=parse_theta_list, default=[math.pi / 2])

    p = sub.add_parser("scan-theta", parents=[common],
                       help="angle maximizing the late-time asymmetry")
    p.add_argument("--a-fraction", type=float, default=0.25)
    p.add_argument("--curve", action="store_true",
                   help="emit the whole scan curve instead of the summary row")

    return parser, sub


def _extract_config(argv):
    """Pop --config [=]PATH out of argv; returns the path or None."""
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                raise SystemExit("--config needs a file path")
            path = argv[i + 1]
            del argv[i:i + 2]
            return path
        if tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            del argv[i]
            return path
    return None


def _apply_config(parser, sub, argv, path):
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        parser.error(f"cannot read config {path}: {err}")
    if not isinstance(values, dict):
        parser.error(f"config {path} must be a JSON object")
    command = None
    if argv and not argv[0].startswith("-"):
        command = argv[0]
    elif "command" in values:
        command = str(values["command"])
        argv.insert(0, command)
    if command not in sub.choices:
        parser.error(f"config needs a known subcommand, got {command!r}")
    target = sub.choices[command]
    known = {action.dest for action in target._actions}
    unknown = sorted(set(values) - known - {"command"})
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    # set_defaults bypasses the per-flag converters, so convert here
    converters = {action.dest: action.type for action in target._actions}
    defaults = {}
    for key, value in values.items():
        if key == "command":
            continue
        conv = converters.get(key)
        defaults[key] = conv(value) if conv is not None and value is not None else value
    target.set_defaults(**defaults)


def _require(parser, args, *names):
    for name in names:
        if getattr(args, name) is None:
            parser.error(f"--{name.replace('_', '-')} is required "
                         f"(flag or config file)")


def _initial_spec(args):
    return InitialStateSpec(INIT_NAMES[args.init], theta=args.theta,
                            tilt_width=args.tilt_width, tilt_seed=args.tilt_seed)


def _circuit(args, depth):
    return CircuitConfig(num_qubits=args.n, depth=depth,
                         symmetry=args.symmetry, mode=args.mode, seed=args.seed)


def _deliver(args, payload, fieldnames=None):
    if args.out:
        emit(payload, args.out, fmt=args.format, fieldnames=fieldnames)
        print(args.out)
    else:
        sys.stdout.write(render(payload, fmt=args.format, fieldnames=fieldnames))


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub = build_parser()
    config_path = _extract_config(argv)
    if config_path:
        _apply_config(parser, sub, argv, config_path)
    args = parser.parse_args(argv)
    _require(parser, args, "n")
    bound = int(args.memory_gib * GIB)

    if args.command == "dynamics":
        _require(parser, args, "subsystem", "depth")
        times = tuple(args.times) if args.times is not None else \
            tuple(range(args.depth + 1))
        config = ExperimentConfig(
            circuit=_circuit(args, args.depth), initial=_initial_spec(args),
            subsystem=tuple(args.subsystem), times=times, shots=args.shots,
            kind="renyi2" if args.renyi2 else "von_neumann",
            measure_symmetry=args.measure_symmetry, workers=args.workers,
            memory_bound=bound)
        _deliver(args, run_ensemble(config))
        return 0

    if args.command == "latetime":
        depth = args.depth if args.depth is not None else 4 * args.n
        sizes = args.sizes if args.sizes is not None else [args.n // 4 or 1]
        config = ExperimentConfig(
            circuit=_circuit(args, depth), initial=_initial_spec(args),
            subsystem=tuple(range(max(sizes))), times=(depth,),
            shots=args.shots, kind="purity_pair", workers=args.workers,
            memory_bound=bound)
        rows = run_latetime_sweep(config, subsystem_sizes=sizes,
                                  thetas=args.thetas,
                                  convergence_check=args.check_convergence)
        _deliver(args, rows)
        return 0

    if args.command == "oracle":
        sizes = args.sizes if args.sizes is not None else list(range(1, args.n))
        _deliver(args, oracle_rows(args.n, sizes, args.thetas))
        return 0

    if args.command == "scan-theta":
        result = theta_scan(args.n, args.a_fraction)
        if args.curve:
            rows = [{"N": args.n, "theta": float(t), "dS2_exact": float(v)}
                    for t, v in zip(result.thetas, result.values)]
        else:
            rows = [{"N": args.n, "a": int(round(args.a_fraction * args.n)),
                     "a_fraction": args.a_fraction,
                     "theta_max": result.theta_max, "theta_c": result.theta_c,
                     "unimodal": result.unimodal}]
        _deliver(args, rows)
        return 0

    parser.error(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
