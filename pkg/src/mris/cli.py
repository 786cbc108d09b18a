"""Command line interface.

Every subcommand loads a model file, runs one analysis, prints a PASS/FAIL
line per verdict, optionally writes a JSON report (plus CSV / plot script
where the output is tabular), and exits 0 exactly when all verdicts passed.
Outputs are deterministic: rerunning a command byte-identically reproduces
its files.
"""

import argparse
import json
import sys

import numpy as np

from . import adiabatic, extended, fluctuations, models, output, trajectories
from .chains import classify_chain, stationary_vector
from .modelfile import ModelFileError, load_model
from .quantum import choi_verify
from .tolerances import DEFAULT, FIELD_NAMES


def _parse_tol(pairs):
    overrides = {}
    for item in pairs or []:
        if "=" not in item:
            raise SystemExit(f"--tol expects NAME=VALUE, got {item!r}")
        name, _, value = item.partition("=")
        if name not in FIELD_NAMES:
            raise SystemExit(
                f"--tol: unknown name {name!r} (known: {', '.join(FIELD_NAMES)})")
        try:
            overrides[name] = float(value)
        except ValueError:
            raise SystemExit(f"--tol {name}: {value!r} is not a number")
    return DEFAULT.replace(**overrides)


def _load(args):
    return load_model(args.model, tol=_parse_tol(args.tol))


def _emit(report: output.RunReport, args):
    for name, ok in sorted(report.verdicts.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if getattr(args, "out", None):
        report.write(args.out + ".json")
        print(f"report: {args.out}.json")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args):
    model = _load(args)
    tol = model.tol
    results = {"labels": list(model.labels), "dim_sys": model.dim_sys}
    worst_choi, worst_tp, worst_comp, worst_kms = 0.0, 0.0, 0.0, 0.0
    per_probe = {}
    for l in model.labels:
        cert = choi_verify(model.channels[l])
        comp = model.unravelings[l].completeness_residual(model.channels[l])
        kms = model.unravelings[l].kms_residual
        per_probe[l] = {
            "min_choi_eig": cert["min_choi_eig"],
            "tp_residual": cert["tp_residual"],
            "unraveling_completeness": comp,
            "entropy_observable_residual": kms,
            "n_outcomes": model.unravelings[l].n_outcomes,
        }
        worst_choi = min(worst_choi, cert["min_choi_eig"])
        worst_tp = max(worst_tp, cert["tp_residual"])
        worst_comp = max(worst_comp, comp)
        if kms is not None:
            worst_kms = max(worst_kms, kms)
    results["probes"] = per_probe
    results["chain"] = classify_chain(model.chain, tol).__dict__
    report = output.RunReport(
        command="validate",
        params={"model": args.model},
        results=results,
        verdicts={
            "channels_completely_positive": worst_choi >= -tol.psd,
            "channels_trace_preserving": worst_tp <= tol.tp,
            "unravelings_resum_to_channels": worst_comp <= 1e-12,
            "entropy_observables_thermal": worst_kms <= 1e-10,
        })
    return _emit(report, args)


def cmd_classify(args):
    model = _load(args)
    chain_cls = classify_chain(model.chain, model.tol)
    gen_cls = extended.classify_generator(model.generator, model.tol)
    results = {
        "chain": {
            "irreducible": chain_cls.irreducible,
            "period": chain_cls.period,
            "primitive": chain_cls.primitive,
            "stationary": chain_cls.stationary,
            "detailed_balance": chain_cls.detailed_balance,
        },
        "generator": {
            "kind": gen_cls.kind,
            "period": gen_cls.period,
            "gap": gen_cls.gap,
            "eigenvalue_one_multiplicity": gen_cls.eigenvalue_one_multiplicity,
            "peripheral": gen_cls.peripheral,
        },
    }
    # an irreducible extended generator needs an irreducible driving chain
    consistent = gen_cls.kind == "reducible" or chain_cls.irreducible
    report = output.RunReport(
        command="classify", params={"model": args.model}, results=results,
        verdicts={"chain_consistent_with_generator": consistent})
    return _emit(report, args)


def cmd_ess(args):
    model = _load(args)
    r_plus, residual = model.ess()
    decomp = extended.ess_decompose(model.generator, r_plus, model.tol)
    pi_stat, _ = stationary_vector(model.chain.P)
    marg = r_plus.marginal()
    eq = models.check_equilibrium(model, decomp)
    results = {
        "fixed_point_residual": residual,
        "pi_plus": decomp.pi_plus,
        "rho_plus": {l: decomp.rho_plus[l] for l in model.labels},
        "reconstruction_residual": decomp.reconstruction_residual(
            model.generator, r_plus),
        "steady_fluxes": eq["steady_fluxes"],
        "entropy_production_rate": eq["entropy_production_rate"],
        "equilibrium": eq["is_equilibrium"],
        "equilibrium_residual": eq["max_residual"],
    }
    report = output.RunReport(
        command="ess", params={"model": args.model}, results=results,
        verdicts={
            "fixed_point": residual <= 1e-8,
            "decomposition_reconstructs": results["reconstruction_residual"] <= 1e-8,
            "marginal_is_chain_stationary": float(np.abs(marg - pi_stat).max()) <= 1e-8,
        })
    return _emit(report, args)


def cmd_simulate(args):
    model = _load(args)
    cfg = trajectories.TrajectoryConfig(
        n_steps=args.steps, n_traj=args.traj, seed=args.seed,
        n_threads=args.threads, chunk=args.chunk,
        initial="stationary" if args.stationary else "model")
    sample = trajectories.sample_entropy_process(model, cfg)
    r_plus, _ = model.ess()
    results = {"n_steps": cfg.n_steps, "n_traj": cfg.n_traj, "seed": cfg.seed,
               "floored_outcomes": sample.floored, "per_probe": {}}
    lln_ok = True
    for k, l in enumerate(model.labels):
        target = -model.probes[l].beta * extended.expectation(
            r_plus, models.flux_extended(model, l))
        est = float(sample.svec[:, k].mean()) / cfg.n_steps
        se = float(sample.svec[:, k].std(ddof=1)) / cfg.n_steps / np.sqrt(cfg.n_traj)
        z = (est - target) / se if se > 0 else np.inf
        results["per_probe"][l] = {"mean_rate": est, "stderr": se,
                                   "steady_target": target, "z": z}
        lln_ok &= abs(z) <= 5.0
    report = output.RunReport(
        command="simulate",
        params={"model": args.model, "steps": args.steps, "traj": args.traj,
                "seed": args.seed, "threads": args.threads,
                "stationary": bool(args.stationary)},
        results=results,
        verdicts={"no_numerical_corruption": True,
                  "entropy_rates_within_5_stderr": bool(lln_ok)})
    if args.out:
        header = ["traj"] + [f"s_{l}" for l in model.labels]
        rows = [[t] + list(sample.svec[t]) for t in range(cfg.n_traj)]
        output.write_csv(args.out + ".csv", header, rows)
        print(f"totals: {args.out}.csv")
    return _emit(report, args)


def cmd_cumulant(args):
    model = _load(args)
    gc = fluctuations.gc_symmetry_report(model)
    e0 = fluctuations.e_of_alpha(model, np.zeros(model.chain.n))
    ray = np.linspace(-1.0, 2.0, args.grid_points)
    ray_vals = [fluctuations.e_of_alpha(model, a * np.ones(model.chain.n))
                for a in ray]
    results = {
        "e_at_zero": e0,
        "gc_symmetry": {
            "max_residual": gc.max_residual,
            "holds": gc.holds,
            "entries": [{"alpha": a, "e": va, "e_mirror": vb, "residual": r}
                        for a, va, vb, r in gc.entries],
        },
        "diagonal_ray": {"a": ray, "e": ray_vals},
    }
    report = output.RunReport(
        command="cumulant", params={"model": args.model,
                                    "grid_points": args.grid_points},
        results=results,
        verdicts={"vanishes_at_origin": abs(e0) <= 1e-12})
    print(f"gc symmetry: {'holds' if gc.holds else 'violated'} "
          f"(max residual {gc.max_residual:.3e})")
    if args.out:
        output.write_csv(args.out + ".csv", ["a", "e"],
                         [[a, v] for a, v in zip(ray, ray_vals)])
        output.write_plot_script(args.out + "_plot.py", args.out + ".csv",
                                 x="a", ys=["e"], ylabel="cumulant rate")
        print(f"ray: {args.out}.csv  plot: {args.out}_plot.py")
    return _emit(report, args)


def cmd_ratefn(args):
    model = _load(args)
    ones = np.ones(model.chain.n)
    h = 1e-5
    a_grid = np.linspace(-args.alpha_range, args.alpha_range, args.points)
    s_grid = np.array([
        -(fluctuations.e_of_alpha(model, (-a + h) * ones)
          - fluctuations.e_of_alpha(model, (-a - h) * ones)) / (2 * h)
        for a in a_grid])
    order = np.argsort(s_grid)
    s_grid = s_grid[order]
    res = fluctuations.entropy_rate_function(model, s_grid)
    results = {
        "s": res.s, "rate": res.values, "maximizer": res.maximizers,
        "unbounded": [bool(b) for b in res.unbounded],
    }
    finite = all(np.isfinite(res.values))
    report = output.RunReport(
        command="ratefn",
        params={"model": args.model, "points": args.points,
                "alpha_range": args.alpha_range},
        results=results,
        verdicts={"transform_finite_on_grid": finite,
                  "maximizers_interior": not res.unbounded.any()})
    if args.out:
        output.write_csv(args.out + ".csv", ["s", "rate", "alpha_star"],
                         [[s, v, a] for s, v, a in
                          zip(res.s, res.values, res.maximizers)])
        output.write_plot_script(args.out + "_plot.py", args.out + ".csv",
                                 x="s", ys=["rate"], ylabel="rate function")
        print(f"grid: {args.out}.csv  plot: {args.out}_plot.py")
    return _emit(report, args)


def cmd_linresp(args):
    model = _load(args)
    kin = fluctuations.kinetic_coefficients(model, zeta_step=args.zeta_step)
    cov = fluctuations.clt_covariance(model)
    gk = fluctuations.green_kubo(model)
    fdr = cov / (2 * kin.beta_bar ** 2)
    scale = float(np.abs(kin.matrix).max())
    rel_gk = float(np.abs(gk.matrix - kin.matrix).max()) / scale
    results = {
        "beta_bar": kin.beta_bar,
        "kinetic_matrix": kin.matrix,
        "route_b": kin.route_b,
        "route_discrepancy": kin.discrepancy,
        "covariance": cov,
        "fdr_matrix": fdr,
        "green_kubo": gk.matrix,
        "green_kubo_per_epsilon": {f"{e:g}": m for e, m in gk.per_epsilon.items()},
        "green_kubo_rel_err": rel_gk,
        "row_sums": kin.row_sums,
        "col_sums": kin.col_sums,
    }
    report = output.RunReport(
        command="linresp",
        params={"model": args.model, "zeta_step": args.zeta_step},
        results=results,
        verdicts={
            "onsager_symmetric": float(
                np.abs(kin.matrix - kin.matrix.T).max()) <= 1e-6,
            "fluctuation_dissipation": float(
                np.abs(kin.matrix - fdr).max()) <= 1e-6,
            "routes_agree": kin.discrepancy <= 1e-5,
            "green_kubo_within_1pct": rel_gk <= 1e-2,
            "row_sums_vanish": float(np.abs(kin.row_sums).max()) <= 1e-6,
            "col_sums_vanish": float(np.abs(kin.col_sums).max()) <= 1e-6,
        })
    if args.out:
        rows = []
        for a, la in enumerate(model.labels):
            for b, lb in enumerate(model.labels):
                rows.append([str(la), str(lb), kin.matrix[a, b],
                             kin.route_b[a, b], fdr[a, b], gk.matrix[a, b]])
        output.write_csv(args.out + ".csv",
                         ["omega", "nu", "kinetic", "route_b", "fdr", "green_kubo"],
                         rows)
        print(f"matrices: {args.out}.csv")
    return _emit(report, args)


def cmd_adiabatic(args):
    model = _load(args)
    p_end = _matrix_arg(args.p_end)
    sched = adiabatic.AdiabaticSchedule(p_start=model.chain.P, p_end=p_end,
                                        kind=args.kind)
    steps = sorted(int(s) for s in args.steps.split(","))
    runs = {}
    for n in steps:
        runs[n] = adiabatic.adiabatic_evolve(model, sched, n)
    plateaus = [runs[n].plateau_error for n in steps]
    ratios = [plateaus[i] / plateaus[i + 1] for i in range(len(steps) - 1)]
    results = {
        "kind": args.kind,
        "steps": steps,
        "plateau_errors": plateaus,
        "ratios": ratios,
        "instantaneous_gap_min": runs[steps[0]].instantaneous_gap_min,
    }
    decreasing = all(a > b for a, b in zip(plateaus, plateaus[1:]))
    report = output.RunReport(
        command="adiabatic",
        params={"model": args.model, "kind": args.kind, "steps": steps},
        results=results,
        verdicts={"primitive_along_path": True,
                  "tracking_error_decreases": decreasing})
    if args.out:
        output.write_csv(args.out + ".csv", ["n_steps", "plateau_error"],
                         [[n, p] for n, p in zip(steps, plateaus)])
        output.write_plot_script(args.out + "_plot.py", args.out + ".csv",
                                 x="n_steps", ys=["plateau_error"],
                                 ylabel="plateau tracking error")
        print(f"plateaus: {args.out}.csv  plot: {args.out}_plot.py")
    return _emit(report, args)


def _matrix_arg(text: str) -> np.ndarray:
    """Accept an inline JSON matrix or @path to a JSON file holding one."""
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = json.loads(text)
    return np.asarray(doc, dtype=float)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mris",
        description="Numerical laboratory for Markovian repeated "
                    "interaction systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--out", help="output prefix (writes PREFIX.json etc.)")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help="tolerance override, repeatable")

    p = sub.add_parser("validate", help="certify channels and unravelings")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("classify", help="chain and generator classification")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("ess", help="steady state, fluxes, entropy production")
    common(p)
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("simulate", help="sample the entropy-exchange process")
    common(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--traj", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--chunk", type=int, default=512)
    p.add_argument("--stationary", action="store_true",
                   help="start trajectories in the steady ensemble")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cumulant", help="cumulant function and its symmetry")
    common(p)
    p.add_argument("--grid-points", type=int, default=61)
    p.set_defaults(func=cmd_cumulant)

    p = sub.add_parser("ratefn", help="entropy-exchange rate function")
    common(p)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--alpha-range", type=float, default=0.45,
                   help="half-width of the tilt grid generating the s values")
    p.set_defaults(func=cmd_ratefn)

    p = sub.add_parser("linresp", help="kinetic coefficients at equilibrium")
    common(p)
    p.add_argument("--zeta-step", type=float, default=1e-3)
    p.set_defaults(func=cmd_linresp)

    p = sub.add_parser("adiabatic", help="slow chain driving and tracking error")
    common(p)
    p.add_argument("--p-end", required=True,
                   help="target transition matrix: inline JSON or @file")
    p.add_argument("--kind", choices=("linear", "smoothstep"), default="linear")
    p.add_argument("--steps", default="64,128,256",
                   help="comma-separated step counts")
    p.set_defaults(func=cmd_adiabatic)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (models.ModelError, fluctuations.FluctuationError,
            adiabatic.AdiabaticError, trajectories.TrajectoryError,
            trajectories.NumericalCorruption) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
