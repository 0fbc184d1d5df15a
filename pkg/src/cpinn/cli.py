"""Command-line entry point: ``cpinn <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .experiments.problems import manufactured
from .experiments.studies import (
    FIGURE1_HEADER,
    NORM_CHECKS,
    STUDY_FUNCTIONS,
    TABLE1_HEADER,
    TABLE1_MESHES,
    figure1_data,
    norm_check,
    rate_study_interp,
    rate_study_recovery,
    recovery_rows,
    reproduce_table1,
    write_csv,
    write_json,
)
from .experiments.training import TrainConfig, TrainingDiverged, train
from .grid import GridSpec, boundary_grid, initial_grid, tensor_grid
from .loss import l_star, lattice_data
from .network import load_checkpoint, save_checkpoint
from .polyinterp import BesovClass

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _index(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _add_training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", default="u1", choices=["u1", "u2"])
    p.add_argument("--W", type=int, default=20)
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--step-size", dest="step_size", type=float, default=1e-3)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--iterations", type=int, default=20000)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--no-skip", dest="skip", action="store_false")
    p.add_argument("--record-every", dest="record_every", type=int, default=100)
    p.add_argument("--probe-res", dest="probe_res", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--out", default=None, help="output file (stdout when omitted)")
    common.add_argument("--config", default=None, help="key=value file supplying option defaults")
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="cpinn", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one network")
    _add_training(p)
    p.add_argument("--loss", default="pinn", choices=["pinn", "cpinn"])
    p.add_argument("--N", type=int, default=15)
    p.add_argument("--checkpoint", default=None, help="write the trained parameters here")
    p.add_argument("--history", default=None, help="write the loss history CSV here")
    p.add_argument("--no-initial-term", dest="no_initial_term", action="store_true",
                   help="drop the initial-data term from the reported final_l_star")

    p = sub.add_parser("reproduce-table1", parents=[common], help="PINN vs CPINN over mesh sizes and seeds")
    _add_training(p)
    p.add_argument("--meshes", type=_int_list, default=list(TABLE1_MESHES))
    p.add_argument("--seeds", type=_int_list, default=[1, 2, 3])

    p = sub.add_parser("figure1", parents=[common], help="value grids of exact, PINN and CPINN solutions")
    _add_training(p)
    p.add_argument("--N", type=int, default=15)
    p.add_argument("--res", type=int, default=51)
    p.add_argument("--times", type=_float_list, default=[0.0, 0.5, 1.0])
    p.add_argument("--pinn-checkpoint", dest="pinn_checkpoint", default=None)
    p.add_argument("--cpinn-checkpoint", dest="cpinn_checkpoint", default=None)

    p = sub.add_parser("rates", help="convergence-rate studies")
    rsub = p.add_subparsers(dest="rates_command", required=True)
    q = rsub.add_parser("interp", parents=[common], help="interpolation error sweep k = k'")
    q.add_argument("--f", dest="fname", default="sine", choices=sorted(STUDY_FUNCTIONS))
    q.add_argument("--r", type=int, default=2)
    q.add_argument("--rp", type=int, default=2)
    q.add_argument("--norm", default="c", choices=["c", "l2l2", "l2h1"])
    q.add_argument("--kmin", type=int, default=1)
    q.add_argument("--kmax", type=int, default=5)
    q = rsub.add_parser("recovery", parents=[common], help="spatial sweeps for a smoothness class")
    q.add_argument("--s", type=float, default=1.5)
    q.add_argument("--theta", type=float, default=1.0)
    q.add_argument("--p", type=_index, default=math.inf)
    q.add_argument("--pp", type=_index, default=math.inf)
    q.add_argument("--norm", default="C", choices=["C", "Ltau"])
    q.add_argument("--kmin", type=int, default=1)
    q.add_argument("--kmax", type=int, default=5)
    q.add_argument("--kp", type=int, default=2)

    p = sub.add_parser("norm-check", parents=[common], help="discrete vs quadrature norms")
    p.add_argument("--which", default="h1214", choices=list(NORM_CHECKS))
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=5)

    p = sub.add_parser("grid", help="grid utilities")
    gsub = p.add_subparsers(dest="grid_command", required=True)
    q = gsub.add_parser("dump", parents=[common], help="write all sites as CSV")
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--kp", type=int, default=1)
    q.add_argument("--r", type=int, default=2)
    q.add_argument("--rp", type=int, default=2)
    q.add_argument("--d", type=int, default=2)
    q.add_argument("--T", type=float, default=1.0)
    return parser


def _read_config(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _leaf_parser(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.ArgumentParser:
    """The subparser that handles ``argv``'s command path."""
    node = parser
    for token in argv:
        sub = next((a for a in node._actions if isinstance(a, argparse._SubParsersAction)), None)
        if sub is None:
            break
        if token in sub.choices:
            node = sub.choices[token]
    return node


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = _read_config(known.config)
        leaf = _leaf_parser(parser, argv)
        dests = {a.dest for a in leaf._actions}
        unknown = sorted(set(cfg) - dests)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for action in leaf._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                    action.default = raw.lower() in ("1", "true", "yes", "on")
                else:
                    action.default = raw
    return parser.parse_args(argv)


def _train_config(args, **extra) -> TrainConfig:
    return TrainConfig(
        W=args.W,
        L=args.L,
        step_size=args.step_size,
        momentum=args.momentum,
        iterations=args.iterations,
        gamma=args.gamma,
        skip=args.skip,
        record_every=args.record_every,
        **extra,
    )


def _emit_csv(args, header, rows) -> None:
    if args.out:
        write_csv(args.out, header, rows)
        if str(args.out).endswith(".csv"):
            write_json(str(args.out)[:-4] + ".json", header, rows)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])
        sys.stdout.write(buf.getvalue())


def cmd_train(args) -> int:
    problem = manufactured(args.problem)
    cfg = _train_config(args, loss=args.loss, N=args.N, seed=args.seed)
    data = lattice_data(problem, args.N)
    net, report = train(problem, cfg, data=data, probe_res=args.probe_res)
    summary = report.summary()
    summary["final_l_star"] = l_star(net, data, gamma=args.gamma, include_initial=not args.no_initial_term)
    text = json.dumps(summary, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.checkpoint:
        save_checkpoint(net, args.checkpoint)
    if args.history:
        write_csv(args.history, ("iteration", "loss"), report.history)
    return EXIT_OK


def cmd_table1(args) -> int:
    base = _train_config(args)
    rows, _ = reproduce_table1(args.problem, args.meshes, args.seeds, base, args.threads)
    _emit_csv(args, TABLE1_HEADER, rows)
    return EXIT_OK


def cmd_figure1(args) -> int:
    problem = manufactured(args.problem)
    nets = {}
    for kind, ckpt in (("pinn", args.pinn_checkpoint), ("cpinn", args.cpinn_checkpoint)):
        if ckpt:
            nets[kind] = load_checkpoint(ckpt)
        else:
            nets[kind], _ = train(problem, _train_config(args, loss=kind, N=args.N, seed=args.seed), probe_res=args.probe_res)
    _emit_csv(args, FIGURE1_HEADER, figure1_data(nets, problem, args.times, args.res))
    return EXIT_OK


def cmd_rates(args) -> int:
    if args.rates_command == "interp":
        study = rate_study_interp(args.fname, args.r, args.rp, args.norm, args.kmin, args.kmax)
        rows = [(k, kp, e, study.fitted_slope, study.predicted_slope) for (k, kp), e in zip(study.levels, study.errors)]
        _emit_csv(args, ("k", "k'", "error", "fitted_slope", "predicted_slope"), rows)
        for note in study.notes:
            print(f"note: {note}", file=sys.stderr)
    else:
        cls = BesovClass(args.s, args.theta, args.p, math.inf, args.pp, math.inf)
        studies = rate_study_recovery(cls, args.norm, args.kmin, args.kmax, args.kp)
        _emit_csv(args, ("sweep", "k", "k'", "error", "fitted_slope", "predicted_slope"), recovery_rows(studies))
    return EXIT_OK


def cmd_norm_check(args) -> int:
    _emit_csv(args, ("k", "k'", "discrete", "quadrature", "ratio"), norm_check(args.which, args.kmin, args.kmax))
    return EXIT_OK


def cmd_grid(args) -> int:
    spec = GridSpec(args.d, args.k, args.kp, args.r, args.rp, args.T)
    rows = []
    for name, grid in (("interior", tensor_grid(spec)), ("boundary", boundary_grid(spec)), ("initial", initial_grid(args.k, args.r, args.d))):
        for p in grid.points:
            rows.append((name,) + tuple(float(v) for v in p))
    header = ("site_class",) + tuple(f"x{i + 1}" for i in range(args.d)) + ("t",)
    _emit_csv(args, header, rows)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "reproduce-table1": cmd_table1,
    "figure1": cmd_figure1,
    "rates": cmd_rates,
    "norm-check": cmd_norm_check,
    "grid": cmd_grid,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
