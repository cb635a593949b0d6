"""Command-line driver.

Subcommands: ``analyze`` (statics of a game file), ``simulate`` (seeded
trajectories or batches), ``verify`` (one named bound check as a Monte Carlo
campaign), ``attrition`` (closed-form equilibria and sweeps) and ``rerun``
(replay a manifest).  Output is machine-first (JSON/CSV files); a short
human-readable summary goes to standard output.

Exit codes: 0 success/consistent, 1 malformed input, 2 a bound check came out
violated, 3 inconclusive, 4 a named hypothesis or input precondition failed.
Seeds are always explicit arguments; nothing is ever seeded from the clock.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, attrition, bounds, engine, ess, fileio, games
from .errors import PreconditionError, SimulationError, ValidationError

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_VIOLATED = 2
EXIT_INCONCLUSIVE = 3
EXIT_PRECONDITION = 4

_VERDICT_EXIT = {"consistent": EXIT_OK, "violated": EXIT_VIOLATED,
                 "inconclusive": EXIT_INCONCLUSIVE}


# ---------------------------------------------------------------------------
# input files


def load_game(path: str):
    """Game file: ``{"n": int, "A": [[...]], "sigma": [...], "labels": [...]?}``."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read game file {path}: {exc}") from exc
    try:
        n = int(raw["n"])
        A = games.as_payoff_matrix(raw["A"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"game file {path} needs integer 'n' and matrix 'A'") from exc
    if A.shape[0] != n:
        raise ValidationError(f"game file {path}: 'A' is {A.shape[0]}x{A.shape[0]}, 'n' is {n}")
    sigma = raw.get("sigma")
    if sigma is not None:
        sigma = games.as_noise_vector(sigma, n)
    labels = raw.get("labels")
    if labels is not None and len(labels) != n:
        raise ValidationError(f"game file {path}: {len(labels)} labels for {n} strategies")
    return A, sigma, labels


def load_attrition_spec(path: str):
    """Attrition file: general ``{"n", "costs", "rewards", "rho"}`` or constant ``{"n", "v", "rho"}``."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read attrition spec {path}: {exc}") from exc
    mode = raw.get("mode")
    if mode == "constant" or ("v" in raw and "costs" not in raw):
        return attrition.ConstantAttritionSpec(
            n=int(raw["n"]), v=float(raw["v"]), rho=float(raw.get("rho", 0.0)))
    try:
        costs = tuple(float(c) for c in raw["costs"])
        rewards = tuple(float(v) for v in raw["rewards"])
        rho = tuple(float(r) for r in raw.get("rho", [0.0] * len(costs)))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"attrition spec {path} needs 'costs', 'rewards', 'rho'") from exc
    spec = attrition.AttritionSpec(costs=costs, rewards=rewards, rho=rho)
    if "n" in raw and int(raw["n"]) != spec.n:
        raise ValidationError(f"attrition spec {path}: 'n' disagrees with the cost vector")
    return spec


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValidationError(f"cannot parse vector {text!r}") from exc


# ---------------------------------------------------------------------------
# analyze


def _strategy_name(j: int, labels) -> str:
    return labels[j] if labels else str(j + 1)   # 1-based in reports


def cmd_analyze(args) -> int:
    A, sigma, labels = load_game(args.game)
    n = A.shape[0]
    lam2 = games.second_eigenvalue(A)
    report: dict = {
        "n": n,
        "labels": labels or [str(j + 1) for j in range(n)],
        "lambda2": lam2,
        "cnd_status": games.cnd_status(A),
        "conditionally_negative_definite": games.is_conditionally_negative_definite(A),
    }

    dominance = []
    for k in range(n):
        found = games.best_dominating_mix(A, k)
        if found is None:
            continue
        p, margin = found
        res = games.verify_dominance(A, k, p)
        dominance.append({
            "strategy": _strategy_name(k, labels),
            "kind": res.kind,
            "margin": margin,
            "dominating_mix": p.tolist(),
        })
    report["dominance"] = dominance

    equilibria = []
    for r in ess.solve_all_equilibria(A):
        entry = {
            "strategy": r.strategy.tolist(),
            "support": [_strategy_name(j, labels) for j in r.support],
            "common_payoff": r.common_payoff,
            "status": r.status,
            "residual": r.residual,
        }
        if sigma is not None:
            kappa = games.aggregate_noise(r.strategy, sigma)
            entry["kappa"] = kappa
            if lam2 < 0.0:
                entry["noise_below_attraction_threshold"] = (
                    games.noise_below_attraction_threshold(r.strategy, sigma, lam2))
        equilibria.append(entry)
    report["equilibria"] = equilibria
    if sigma is not None:
        report["sigma"] = sigma.tolist()
        report["coordination_game"] = games.is_coordination_game(A, sigma)

    manifest = _manifest(args, inputs=[args.game])
    out_json = args.out + ".json"
    fileio.atomic_write_text(out_json, fileio.json_text(report))
    manifest.add_output(out_json)
    manifest.write(args.out + ".manifest.json")

    print(f"lambda2 = {lam2:.6g} ({report['cnd_status']}); "
          f"{len(equilibria)} equilibria, {len(dominance)} dominated strategies")
    for e in equilibria:
        print(f"  support {e['support']}: {e['status']} (payoff {e['common_payoff']:.6g})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _config_from(args) -> engine.SdeConfig:
    return engine.SdeConfig(
        h=args.h, horizon=args.T, seed=args.seed,
        record_stride=args.stride,
    )


def _parse_stat(text: str, n: int) -> engine.Statistic:
    """``final_share:<1-based j>`` or ``max_final_share``."""
    if text == "max_final_share":
        return engine.max_final_share()
    if text.startswith("final_share:"):
        j = int(text.split(":", 1)[1])
        if not 1 <= j <= n:
            raise ValidationError(f"strategy index {j} out of range 1..{n}")
        return engine.final_share(j - 1)
    raise ValidationError(f"unknown statistic {text!r}")


def cmd_simulate(args) -> int:
    A, sigma_file, _labels = load_game(args.game)
    n = A.shape[0]
    sigma = _parse_vector(args.sigma) if args.sigma else sigma_file
    if sigma is None:
        raise ValidationError("no diffusion coefficients: set 'sigma' in the file or pass --sigma")
    sigma = games.as_noise_vector(sigma, n)
    x0 = _parse_vector(args.x0) if args.x0 else games.uniform_point(n)
    x0 = games.as_simplex_point(x0, n, interior=True)
    cfg = _config_from(args)
    manifest = _manifest(args, inputs=[args.game])

    if args.paths == 1:
        traj = engine.simulate_sde(A, sigma, x0, cfg)
        out_csv = args.out + ".csv"
        fileio.atomic_write_text(out_csv, engine.trajectory_csv_text(traj))
        manifest.add_output(out_csv)
        manifest.write(args.out + ".manifest.json")
        print(f"1 path, {traj.times.size} recorded points -> {out_csv}"
              + (" (log-ratio cap reached)" if traj.clamped else ""))
        return EXIT_OK

    stat = _parse_stat(args.stat, n)
    result = engine.batch_run(A, sigma, x0, cfg, args.paths, stat, workers=args.workers)
    out_json = args.out + ".json"
    fileio.atomic_write_text(out_json, fileio.json_text(result.to_json_dict()))
    manifest.add_output(out_json)
    manifest.write(args.out + ".manifest.json")
    print(f"{args.paths} paths: {stat.name} = {result.mean:.6g} "
          f"+- {result.std_error:.2g} (se) -> {out_json}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    tag = args.theorem
    if tag not in bounds.CHECK_TAGS:
        raise ValidationError(f"unknown check {tag!r}; choose from {', '.join(bounds.CHECK_TAGS)}")
    cfg = _config_from(args)
    manifest = _manifest(args, inputs=[args.game])

    if tag == "5.1":
        spec = load_attrition_spec(args.game)
        n = (spec.n if isinstance(spec, attrition.ConstantAttritionSpec) else spec.n) + 1
        sigma = _parse_vector(args.sigma) if args.sigma else np.full(n, 0.05)
        x0 = _parse_vector(args.x0) if args.x0 else games.uniform_point(n)
        report = attrition.persistence_experiment(spec, sigma, x0, cfg, args.paths,
                                                  workers=args.workers)
    else:
        A, sigma_file, _labels = load_game(args.game)
        n = A.shape[0]
        sigma = _parse_vector(args.sigma) if args.sigma else sigma_file
        if sigma is None:
            raise ValidationError("no diffusion coefficients: set 'sigma' or pass --sigma")
        sigma = games.as_noise_vector(sigma, n)
        x0 = _parse_vector(args.x0) if args.x0 else games.uniform_point(n)

        if tag in ("2.3a", "2.3b", "2.4", "2.8"):
            reports = bounds.ess_attraction_reports(
                A, sigma, x0, cfg, args.paths, delta=args.delta,
                burn_in=args.burn_in, which=(tag,), workers=args.workers)
            report = reports[tag]
        elif tag == "3.1":
            if args.k is None:
                raise ValidationError("--k (1-based dominated strategy) is required for 3.1")
            report = bounds.extinction_report(A, args.k - 1, sigma, x0, cfg,
                                              args.paths, eps=args.eps or 0.05,
                                              workers=args.workers)
        elif tag == "4.1":
            if args.k is None:
                raise ValidationError("--k (1-based equilibrium strategy) is required for 4.1")
            report = bounds.stability_basin_probe(A, sigma, args.k - 1,
                                                  args.radius, cfg, args.paths,
                                                  workers=args.workers)
        elif tag == "4.2":
            report = bounds.coordination_absorption(A, sigma, x0, cfg, args.paths,
                                                    eps=args.eps or 0.01,
                                                    workers=args.workers)
        else:  # 4.3
            report = bounds.vertex_hitting_report(A, sigma, x0, cfg, args.paths,
                                                  eps=args.eps or 0.1,
                                                  workers=args.workers)

    out_json = args.out + ".json"
    fileio.atomic_write_text(out_json, fileio.json_text(report.to_json_dict()))
    manifest.add_output(out_json)
    out_csv = args.out + "_paths.csv"
    fileio.atomic_write_text(out_csv, report.per_path_csv_text())
    manifest.add_output(out_csv)
    manifest.write(args.out + ".manifest.json")

    print(f"{report.name}: {report.verdict} "
          f"(analytic {report.analytic_value:.6g}, empirical {report.empirical_value:.6g})")
    return _VERDICT_EXIT[report.verdict]


# ---------------------------------------------------------------------------
# attrition


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the double exactly."""
    v = float(value)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _sweep_csv(specs) -> str:
    n_max = max(s.n for s in specs)
    header = "n,v,rho,s," + ",".join(f"p_{k}" for k in range(n_max + 1)) + ",c"
    lines = [header]
    for spec in specs:
        result = attrition.closed_form_ess(spec)
        cells = [str(spec.n), _fmt(spec.v), _fmt(spec.rho),
                 "" if result.s is None else str(result.s)]
        weights = [_fmt(w) for w in result.strategy]
        weights += [""] * (n_max - spec.n)
        cells += weights
        cells.append("" if result.c is None else _fmt(result.c))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_attrition(args) -> int:
    inputs = []
    if args.spec:
        spec = load_attrition_spec(args.spec)
        inputs.append(args.spec)
    elif args.sweep:
        spec = None
    else:
        if args.n is None or args.v is None:
            raise ValidationError("give --spec FILE or both --n and --v")
        spec = attrition.ConstantAttritionSpec(n=args.n, v=args.v, rho=args.rho)

    manifest = _manifest(args, inputs=inputs)

    if args.sweep:
        n_lo, n_hi = (int(v) for v in args.n_range.split(":"))
        fracs = tuple(float(f) for f in args.rho_fracs.split(","))
        specs = attrition.ess_sweep_rows(range(n_lo, n_hi + 1), fracs, v_step=args.v_step)
        if not args.out:
            raise ValidationError("--out is required in sweep mode")
        out_csv = args.out + ".csv"
        fileio.atomic_write_text(out_csv, _sweep_csv(specs))
        manifest.add_output(out_csv)
        manifest.write(args.out + ".manifest.json")
        print(f"{len(specs)} instances -> {out_csv}")
        return EXIT_OK

    if isinstance(spec, attrition.ConstantAttritionSpec):
        result = attrition.closed_form_ess(spec)
        row = _sweep_csv([spec]).splitlines()[1]
        print(row)
        det = attrition.constant_matrix_det(spec)
        direct = float(np.linalg.det(attrition.perturbed_matrix(spec)))
        print(f"det = {det:.12g} (direct {direct:.12g}, "
              f"relative gap {abs(det - direct) / max(abs(direct), 1e-300):.2e})")
        if result.s is not None:
            print(f"support cutoff s = {result.s}, normalizer c = {result.c:.12g}")
        if args.out:
            out_csv = args.out + ".csv"
            fileio.atomic_write_text(out_csv, _sweep_csv([spec]))
            manifest.add_output(out_csv)
            manifest.write(args.out + ".manifest.json")
    else:
        B = attrition.perturbed_matrix(spec)
        report = ess.unique_ess(B)
        forced = sorted(attrition.forced_zero_indices(spec))
        print(f"strategies 0..{spec.n}; forced zero weights at {forced or 'none'}")
        if report is not None:
            print(f"stable strategy {np.round(report.strategy, 12).tolist()} "
                  f"(payoff {report.common_payoff:.12g}, {report.status})")
        if args.out:
            out_json = args.out + ".json"
            payload = {
                "costs": list(spec.costs), "rewards": list(spec.rewards),
                "rho": list(spec.rho), "forced_zero": forced,
                "strategy": None if report is None else report.strategy.tolist(),
                "common_payoff": None if report is None else report.common_payoff,
                "status": None if report is None else report.status,
            }
            fileio.atomic_write_text(out_json, fileio.json_text(payload))
            manifest.add_output(out_json)
            manifest.write(args.out + ".manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# rerun


def cmd_rerun(args) -> int:
    data = fileio.RunManifest.load(args.manifest)
    command = data["command"]
    print(f"replaying: replab {' '.join(command)}")
    return main(command)


# ---------------------------------------------------------------------------
# parser


def _manifest(args, inputs) -> fileio.RunManifest:
    manifest = fileio.RunManifest(
        command=list(args._argv),
        seed=getattr(args, "seed", None),
        defaults={"version": __version__,
                  "y_cap": 500.0,
                  "record_points_cap": engine.MAX_RECORD_POINTS},
    )
    for path in inputs:
        manifest.add_input(path)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replab",
        description="Analyze, simulate and verify noisy replicator dynamics of symmetric games.",
    )
    parser.add_argument("--version", action="version", version=f"replab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="statics: eigenvalue gap, dominance, equilibria")
    pa.add_argument("game", help="game JSON file")
    pa.add_argument("--out", required=True, help="output prefix (writes <out>.json)")
    pa.set_defaults(func=cmd_analyze)

    def sim_flags(p, default_paths=1):
        p.add_argument("--x0", help="comma-separated initial state (default uniform)")
        p.add_argument("--sigma", help="comma-separated diffusion coefficients")
        p.add_argument("--T", type=float, default=50.0, help="horizon (default 50)")
        p.add_argument("--h", type=float, default=1e-3, help="step size (default 1e-3)")
        p.add_argument("--seed", type=int, required=True, help="master seed (required)")
        p.add_argument("--paths", type=int, default=default_paths)
        p.add_argument("--stride", type=int, default=None, help="record every k-th step")
        p.add_argument("--workers", type=int, default=None,
                       help="concurrent chunks (REPLAB_WORKERS env overrides; output-invariant)")

    ps = sub.add_parser("simulate", help="seeded trajectories or batches")
    ps.add_argument("game", help="game JSON file")
    sim_flags(ps)
    ps.add_argument("--stat", default="final_share:1",
                    help="batch statistic: final_share:<j> or max_final_share")
    ps.add_argument("--out", required=True, help="output prefix")
    ps.set_defaults(func=cmd_simulate)

    pv = sub.add_parser("verify", help="run one bound check as a Monte Carlo campaign")
    pv.add_argument("game", help="game JSON file (attrition spec for 5.1)")
    pv.add_argument("--theorem", required=True, choices=list(bounds.CHECK_TAGS),
                    help="which bound to check")
    sim_flags(pv, default_paths=200)
    pv.add_argument("--k", type=int, help="1-based strategy index (3.1, 4.1)")
    pv.add_argument("--eps", type=float, help="threshold (3.1, 4.2, 4.3)")
    pv.add_argument("--delta", type=float, help="ball radius (2.3a/2.3b; default 2 kappa/sqrt|lam2|)")
    pv.add_argument("--radius", type=float, default=0.05, help="start distance (4.1)")
    pv.add_argument("--burn-in", dest="burn_in", type=float, default=None,
                    help="occupation burn-in (default horizon/5)")
    pv.add_argument("--out", required=True, help="output prefix")
    pv.set_defaults(func=cmd_verify)

    pt = sub.add_parser("attrition", help="war-of-attrition equilibria and sweeps")
    pt.add_argument("--spec", help="attrition spec JSON file")
    pt.add_argument("--n", type=int, help="maximum effort index")
    pt.add_argument("--v", type=float, help="constant reward")
    pt.add_argument("--rho", type=float, default=0.0, help="diagonal perturbation")
    pt.add_argument("--sweep", action="store_true", help="sweep the (n, v, rho) grid")
    pt.add_argument("--n-range", dest="n_range", default="1:8", help="sweep n range lo:hi")
    pt.add_argument("--v-step", dest="v_step", type=float, default=0.25)
    pt.add_argument("--rho-fracs", dest="rho_fracs", default="0,0.1,0.2,0.4",
                    help="rho as fractions of v")
    pt.add_argument("--out", help="output prefix")
    pt.set_defaults(func=cmd_attrition)

    pr = sub.add_parser("rerun", help="replay a manifest byte-identically")
    pr.add_argument("manifest", help="manifest JSON written by a previous run")
    pr.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        if args.command in ("attrition", "verify"):
            # invalid domain inputs are precondition failures for these commands
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PRECONDITION
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except PreconditionError as exc:
        print(f"hypothesis failed [{exc.condition}]: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def entry() -> None:
    sys.exit(main())
