"""``nonlocal-lab`` command line: reproducible runs that write CSV/JSON artifacts.

Exit codes: 0 when the command's checks pass, 1 when they fail, 2 on usage
errors.  Every JSON file starts with ``{"version", "command", "flags"}`` where
``flags`` holds the fully resolved parameters, defaults included.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path


from . import __version__, bell, constraints, cylinder, mechanics
from .errors import UsageError

WAVE_TOL = 1e-10
BELL_BOUND_TOL = 1e-9
SCAN_MODELS = ("quantum", "sawtooth")
CONSERVE_EXPECTED = {
    "wave": constraints.CONSERVED,
    "particles": constraints.CONSERVED,
    "twopoint": constraints.NOT_CONSERVED,
}
CONSERVE_THRESHOLD = {"wave": 1e-9, "particles": 1e-9, "twopoint": 1e-3}


def _write_json(path: Path, command: str, flags: dict, body: dict) -> None:
    doc = {"version": __version__, "command": command, "flags": flags}
    doc.update(body)
    path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def _flags(args, names) -> dict:
    return {name: getattr(args, name) for name in names}


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_wave(args) -> int:
    grid = cylinder.GridSpec(args.T, args.M, args.N)
    width = grid.T / 4 if args.bump_width is None else args.bump_width
    window = grid.T / 4 if args.window is None else args.window
    if not 0 < width < grid.T:
        raise UsageError(f"bump width must lie in (0, T={grid.T}), got {width}")
    flags = {"T": grid.T, "M": grid.M, "N": grid.N, "bump_width": width, "window": window}

    bump = cylinder.smooth_bump(grid, width)
    window_diff = cylinder.locality_window_check(bump, window)
    spectral = cylinder.project_periodic(cylinder.analyze(bump))
    start = cylinder.synthesize(spectral, 0.0)
    end = cylinder.synthesize(spectral, grid.T)
    periodicity = cylinder.periodicity_residual(spectral)
    repetition = cylinder.spatial_repetition_residual(start)
    e0 = cylinder.energy(start)
    energies = [cylinder.energy(cylinder.synthesize(spectral, t))
                for t in constraints.uniform_times(grid.T)]
    energy_drift = max(abs(e - e0) for e in energies) / e0 if e0 > 0 else 0.0

    summary = {
        "periodicity_residual": periodicity,
        "repetition_residual": repetition,
        "window_diff": window_diff,
        "energy_drift": energy_drift,
    }
    passed = all(v <= WAVE_TOL for v in summary.values())

    out = _outdir(args)
    bump.to_csv(out / "wave_bump.csv")
    start.to_csv(out / "wave_t0.csv")
    end.to_csv(out / "wave_tT.csv")
    _write_json(out / "wave_spectrum.json", "wave", flags, spectral.to_dict())
    _write_json(out / "wave.json", "wave", flags,
                {**summary, "threshold": WAVE_TOL, "passed": passed})
    print(json.dumps(summary))
    return 0 if passed else 1


def cmd_bell(args) -> int:
    menu = bell.parse_menu(args.menu)
    model = bell.build_model(args.model, menu)
    flags = {"model": args.model, "menu": list(menu), "runs": args.runs, "seed": args.seed}
    exact = bell.chsh(model, *menu)
    record = bell.monte_carlo(model, menu, "coins", args.runs, args.seed)
    if record.unavailable:
        chsh_mc = None
    else:
        chsh_mc = dict(zip(("E11", "E12", "E21", "E22"), record.estimates))
        chsh_mc.update(S=record.S, S_stderr=record.S_stderr)
    si = bell.si_report(model, menu).to_dict() if isinstance(model, bell.HiddenVariableModel) else None

    out = _outdir(args)
    _write_json(out / "bell.json", "bell", flags, {
        "chsh_exact": exact.to_dict(),
        "chsh_mc": chsh_mc,
        "si_report": si,
        "record": record.to_dict(),
    })
    print(f"{args.model}: S_exact={exact.S:.12f}" + (f" S_mc={record.S:.6f}" if chsh_mc else ""))
    return 0


def cmd_scan(args) -> int:
    if args.model not in bell.MODEL_FACTORIES:
        raise UsageError(f"unknown model {args.model!r}; choose from {', '.join(bell.MODEL_FACTORIES)}")
    if args.model not in SCAN_MODELS:
        raise UsageError(f"model {args.model!r} is menu-restricted; scan supports {', '.join(SCAN_MODELS)}")
    if not args.step > 0:
        raise UsageError("step must be positive")
    count = math.pi / args.step
    if abs(count - round(count)) > 1e-9:
        raise UsageError(f"step {args.step} does not divide pi")
    count = int(round(count))
    thetas = [i * math.pi / count for i in range(count + 1)]
    flags = {"model": args.model, "step": args.step, "runs": args.runs, "seed": args.seed}

    model = bell.build_model(args.model)
    rows = bell.correlation_sweep(model, thetas, args.runs, args.seed)
    out = _outdir(args)
    bell.sweep_to_csv(rows, out / f"scan_{args.model}.csv")
    _write_json(out / f"scan_{args.model}.json", "scan", flags,
                {"points": len(rows), "csv": f"scan_{args.model}.csv"})
    print(f"{args.model}: {len(rows)} points written")
    return 0


def cmd_bound(args) -> int:
    if args.models < 1:
        raise UsageError("need at least one model")
    flags = {"models": args.models, "lambda_count": args.lambda_count, "seed": args.seed,
             "menu": list(bell.CANONICAL_MENU)}
    menu = bell.CANONICAL_MENU
    worst, worst_seed = -1.0, None
    for i in range(args.models):
        model_seed = args.seed + i
        S = bell.chsh(bell.random_si_model(model_seed, args.lambda_count), *menu).S
        if abs(S) > worst:
            worst, worst_seed = abs(S), model_seed
    passed = worst <= 2 + BELL_BOUND_TOL
    out = _outdir(args)
    _write_json(out / "bound.json", "bound", flags, {
        "max_abs_S": worst, "argmax_seed": worst_seed, "bound": 2.0,
        "tolerance": BELL_BOUND_TOL, "passed": passed,
    })
    print(f"max |S| over {args.models} SI models: {worst:.12f}")
    return 0 if passed else 1


def _conserve_wave(args, grid):
    f = cylinder.project_field(cylinder.random_bandlimited(grid, args.seed, max_mode=min(16, grid.N // 4)))
    probe = cylinder.spectral_trajectory(cylinder.analyze(f), 2 * grid.T)
    return probe, cylinder.periodic_subspace_constraint()


def _conserve_twopoint(args, grid):
    # A right-moving allowed mode, symmetric about x = 0 at t = 0, so the
    # equality phi(x0) = phi(x0 + d) holds initially.
    d = grid.T / 2
    f = cylinder.single_mode(grid, grid.M, direction="right")
    probe = cylinder.spectral_trajectory(cylinder.analyze(f), grid.T)
    return probe, constraints.two_point_equality_constraint(-d / 2, d)


def cmd_conserve(args) -> int:
    if args.system not in CONSERVE_EXPECTED:
        raise UsageError(f"unknown system {args.system!r}; choose from {', '.join(CONSERVE_EXPECTED)}")
    threshold = CONSERVE_THRESHOLD[args.system] if args.threshold is None else args.threshold
    out = _outdir(args)
    if args.system == "particles":
        flags = {"system": "particles", "particles": args.particles, "steps": args.steps,
                 "dt": args.dt, "seed": args.seed}
        state = mechanics.init_zero_momentum(args.particles, args.seed)
        probe = mechanics.integrate(state, args.dt, args.steps)
        functional = mechanics.total_momentum_constraint()
        mechanics.trajectory_to_csv(probe, args.dt, out / "conserve_particles.csv")
    else:
        grid = cylinder.GridSpec(args.T, args.M, args.N)
        flags = {"system": args.system, "T": grid.T, "M": grid.M, "N": grid.N, "seed": args.seed}
        build = _conserve_wave if args.system == "wave" else _conserve_twopoint
        probe, functional = build(args, grid)
    flags["threshold"] = threshold

    report = constraints.check_conservation(probe, functional, threshold)
    expected = CONSERVE_EXPECTED[args.system]
    _write_json(out / f"conserve_{args.system}.json", "conserve", flags,
                {"expected": expected, "report": report.to_dict()})
    print(f"{args.system}: {report.verdict} (max residual {report.max_residual:.3e}, expected {expected})")
    return 0 if report.verdict == expected else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_grid(p):
    p.add_argument("--T", type=float, default=1.0, help="time circumference (default 1)")
    p.add_argument("--M", type=int, default=4, help="spatial repetition factor, L = M*T (default 4)")
    p.add_argument("--N", type=int, default=256, help="grid points, a power of two (default 256)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wave", help="project bump data onto T-periodic solutions and audit it")
    _add_grid(p)
    p.add_argument("--bump-width", type=float, default=None, help="bump support width (default T/4)")
    p.add_argument("--window", type=float, default=None, help="locality window half-width (default T/4)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_wave)

    p = sub.add_parser("bell", help="exact and Monte Carlo CHSH for a model")
    p.add_argument("--model", default="quantum", help="quantum, sawtooth, toy3 or superdet")
    p.add_argument("--menu", default=",".join(repr(x) for x in bell.CANONICAL_MENU),
                   help="a1,a2,b1,b2 in radians (default 0,pi/2,pi/4,-pi/4)")
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("scan", help="correlation versus angle difference")
    p.add_argument("--model", default="quantum")
    p.add_argument("--step", type=float, default=math.pi / 16, help="angle step dividing pi")
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("bound", help="max |S| over random statistically independent models")
    p.add_argument("--models", type=int, default=10_000)
    p.add_argument("--lambda-count", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("conserve", help="audit a constraint along a trajectory")
    p.add_argument("system", nargs="?", default=None, help="wave, particles or twopoint")
    p.add_argument("--system", dest="system_flag", default=None)
    _add_grid(p)
    p.add_argument("--particles", type=int, default=16)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_conserve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "conserve":
        args.system = args.system_flag or args.system or "particles"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nonlocal-lab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
