"""Command-line interface.

Exit codes: 0 on success, 1 on bad input, 2 when a solve does not reach an
optimal status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, cdf1d, m2ot, motapprox
from .conic import Settings
from .measure import DiscreteMeasure, MeasureError, barycentre, load, recentre

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
DIGITS = 12


class InputError(Exception):
    pass


@dataclass
class CliConfig:
    tol: float | None = None
    max_iter: int | None = None
    fmt: str = "json"
    svg: str | None = None
    gamma_floor: float = m2ot.GAMMA_FLOOR
    merge_radius: float | None = None
    recentre: bool = False
    dump_program: str | None = None
    plan_out: str | None = None

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise InputError("--max-iter must be >= 1")
        if not self.gamma_floor >= 0:
            raise InputError("--gamma-floor must be nonnegative")

    def settings(self) -> Settings:
        kw = {}
        if self.tol is not None:
            kw["tol_feas"] = kw["tol_gap"] = self.tol
        if self.max_iter is not None:
            kw["max_iter"] = self.max_iter
        return Settings(**kw)


def _num(v):
    """Round to DIGITS significant digits for printing."""
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.{DIGITS}g}")
    if isinstance(v, np.integer):
        return int(v)
    return v


def _emit_json(obj):
    print(json.dumps(_num(obj)))


def _measure_obj(m: DiscreteMeasure) -> dict:
    return {"dim": m.dim, "atoms": [{"w": w, "x": list(x)} for w, x in m]}


def _measure_csv(m: DiscreteMeasure) -> str:
    lines = ["weight," + ",".join(f"x{k + 1}" for k in range(m.dim))]
    for w, x in m:
        lines.append(",".join(f"{v:.{DIGITS}g}" for v in (w, *x)))
    return "\n".join(lines) + "\n"


def _emit_measure(m: DiscreteMeasure, cfg: CliConfig, extra: dict | None = None):
    if cfg.fmt == "csv":
        sys.stdout.write(_measure_csv(m))
        for k, v in (extra or {}).items():
            print(f"{k}: {_num(v)}", file=sys.stderr)
    else:
        _emit_json({**(extra or {}), "measure": _measure_obj(m)})


def _load(path: str) -> DiscreteMeasure:
    try:
        return load(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _pair(args, cfg: CliConfig):
    mu = _load(args.mu)
    nu = _load(args.nu)
    if mu.dim != nu.dim:
        raise InputError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if cfg.recentre:
        nu = recentre(nu, barycentre(mu))
    return mu, nu


def _dump(cfg: CliConfig, mu, nu, spec):
    if cfg.dump_program:
        program, _ = m2ot.build(mu, nu, spec)
        program.dump(cfg.dump_program)


def _write_plan(cfg: CliConfig, plan):
    if cfg.plan_out and plan is not None:
        Path(cfg.plan_out).write_text(plan.to_csv())


# ---------------------------------------------------------------------------
# commands


def cmd_z2(args, cfg):
    mu, nu = _pair(args, cfg)
    _dump(cfg, mu, nu, m2ot.Quadratic())
    diag = analysis.z2(mu, nu, cfg.settings(), gamma_floor=cfg.gamma_floor)
    _write_plan(cfg, diag.plan)
    _emit_json(diag.to_dict())


def cmd_index(args, cfg):
    mu, nu = _pair(args, cfg)
    _dump(cfg, mu, nu, m2ot.Quadratic())
    diag = analysis.z2(mu, nu, cfg.settings(), gamma_floor=cfg.gamma_floor)
    _emit_json({"alpha": diag.alpha, "defined": diag.alpha_defined, "z2": diag.z2})


def cmd_dominate(args, cfg):
    mu, nu = _pair(args, cfg)
    spec = m2ot.Dominance(args.p)
    _dump(cfg, mu, nu, spec)
    plan = m2ot.solve_plan(mu, nu, spec, cfg.settings(), gamma_floor=cfg.gamma_floor)
    _write_plan(cfg, plan)
    rho = analysis.pushforward_rho(plan, cfg.merge_radius)
    _emit_measure(rho, cfg, {"p": args.p, "cost": plan.report.objective_value})


def cmd_project(args, cfg):
    mu, nu = _pair(args, cfg)
    _dump(cfg, mu, nu, m2ot.Quadratic())
    diag = analysis.z2(mu, nu, cfg.settings(), gamma_floor=cfg.gamma_floor)
    _write_plan(cfg, diag.plan)
    rho = analysis.pushforward_rho(diag.plan, cfg.merge_radius)
    _emit_measure(rho, cfg, {"c": diag.c_value})


def cmd_w2(args, cfg):
    mu, nu = _pair(args, cfg)
    _emit_json({"w2": analysis.wasserstein2(mu, nu, cfg.settings())})


def cmd_lub1d(args, cfg):
    mu, nu = _pair(args, cfg)
    lub = cdf1d.lub_1d(mu, nu)
    _emit_measure(lub, cfg, {"m2": float(lub.weights @ lub.points[:, 0] ** 2)})


def cmd_strassen(args, cfg):
    mu = _load(args.mu)
    rho = _load(args.rho)
    if mu.dim != rho.dim:
        raise InputError(f"dimension mismatch: {mu.dim} vs {rho.dim}")
    ok = analysis.strassen_feasible(mu, rho, args.strassen_tol, cfg.settings())
    _emit_json({"feasible": ok})


def cmd_demo_instability(args, cfg):
    mu, nu, cost = motapprox.instability_demo(args.n)
    _emit_json({"n": args.n, "mu": _measure_obj(mu), "nu": _measure_obj(nu),
                "cost": cost.tolist()})


def _parse_ns(text: str) -> list[int]:
    try:
        ns = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad n list {text!r}") from None
    if not ns:
        raise InputError("empty n list")
    if any(n < 1 for n in ns):
        raise InputError("n values must be positive")
    return sorted(set(ns))


def _cost_matrix(kind: str, mu, nu) -> np.ndarray:
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    if kind == "l1":
        return np.linalg.norm(diff, axis=2)
    if kind == "l2":
        return np.sum(diff**2, axis=2)
    try:
        cost = np.loadtxt(kind, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read cost matrix {kind}: {exc}") from None
    if cost.shape != (len(mu), len(nu)):
        raise InputError(f"cost matrix has shape {cost.shape}, expected {(len(mu), len(nu))}")
    return cost


def cmd_mot_approx(args, cfg):
    if args.demo is not None:
        ns = _parse_ns(args.demo)
        schedule = motapprox.demo_schedule(ns, args.epsilon_exponent)
        data_fn = motapprox.instability_demo
    else:
        if not (args.mu and args.nu):
            raise InputError("give MU and NU files or --demo")
        mu, nu = _pair(args, cfg)
        cost = _cost_matrix(args.cost, mu, nu)
        ns = _parse_ns(args.ns)
        schedule = motapprox.power_schedule(ns, args.eps0, args.epsilon_exponent)

        def data_fn(n):
            return mu, nu, cost

    report = motapprox.run_sequence(data_fn, ns, schedule, args.warm_start, cfg.settings())
    sys.stdout.write(report.to_csv(DIGITS))
    if cfg.svg and report.records:
        Path(cfg.svg).write_text(report.to_svg())
    if report.last_plan is not None:
        _write_plan(cfg, report.last_plan)
    if not report.ok:
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("solver and output")
    g.add_argument("--tol", type=float, help="feasibility and gap tolerance (default 1e-8)")
    g.add_argument("--max-iter", type=int, help="iteration budget (default 200000)")
    g.add_argument("--recentre", action="store_true",
                   help="translate NU onto the barycentre of MU before solving")
    g.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    g.add_argument("--svg", help="write an SVG plot here (mot-approx)")
    g.add_argument("--gamma-floor", type=float, default=m2ot.GAMMA_FLOOR)
    g.add_argument("--merge-radius", type=float, default=None)
    g.add_argument("--dump-program", metavar="PATH",
                   help="write the conic program in sparse-triplet form")
    g.add_argument("--plan", dest="plan_out", metavar="PATH", help="write the plan as CSV")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bimartingale",
        description="Bi-martingale transport, convex dominance and martingale transport "
                    "approximation for discrete measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    def pair_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("mu", help="measure file (CSV weight,x1..xd or JSON)")
        p.add_argument("nu", help="measure file")
        _common(p)
        p.set_defaults(func=func)
        return p

    pair_cmd("z2", cmd_z2, "quadratic gap, convex-order index and projection distances")
    pair_cmd("index", cmd_index, "convex-order index alpha")
    p = pair_cmd("dominate", cmd_dominate, "optimal convex dominant for |z|^p")
    p.add_argument("--p", type=float, default=2.0)
    pair_cmd("project", cmd_project, "least-second-moment common dominant")
    pair_cmd("w2", cmd_w2, "quadratic Wasserstein distance")
    pair_cmd("lub1d", cmd_lub1d, "closed-form least upper bound on the line")

    p = sub.add_parser("strassen", help="test whether RHO dominates MU in convex order")
    p.add_argument("mu")
    p.add_argument("rho")
    p.add_argument("--strassen-tol", type=float, default=analysis.STRASSEN_TOL)
    _common(p)
    p.set_defaults(func=cmd_strassen)

    p = sub.add_parser("mot-approx", help="penalized martingale transport sequence")
    p.add_argument("mu", nargs="?")
    p.add_argument("nu", nargs="?")
    p.add_argument("--demo", metavar="NS", help="comma-separated n list for the built-in example")
    p.add_argument("--cost", default="l1", help="l1, l2, or a CSV cost-matrix file")
    p.add_argument("--ns", default="1,2,5,10,20,50,100",
                   help="n list for file data (epsilon_n = eps0 n^-exponent)")
    p.add_argument("--eps0", type=float, default=1.0)
    p.add_argument("--epsilon-exponent", type=float, default=0.5)
    p.add_argument("--warm-start", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_mot_approx)

    p = sub.add_parser("demo-instability", help="print the rotated four-point data for one n")
    p.add_argument("n", type=int)
    _common(p)
    p.set_defaults(func=cmd_demo_instability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = CliConfig(tol=args.tol, max_iter=args.max_iter, fmt=args.fmt, svg=args.svg,
                        gamma_floor=args.gamma_floor, merge_radius=args.merge_radius,
                        recentre=args.recentre, dump_program=args.dump_program,
                        plan_out=args.plan_out)
        code = args.func(args, cfg)
    except m2ot.SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, MeasureError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if code is None else code


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
