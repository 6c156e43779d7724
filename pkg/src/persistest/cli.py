"""Command-line interface: ``persistest <command> [options]``.

Every command writes ``report.json`` (sorted keys, no timestamps) plus CSV
tables and PNG figures into ``--out``, and prints a short summary.
Exit status: 0 on success, 2 for unreadable or invalid input, 3 for
numerical or contract failures.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pio
from .cech import PersistenceDiagram
from .errors import InputError, PersistestError, StageError
from .frechet import estimate_frechet_mean, variance_partial_sum
from .limits import limit_draws, table_from_draws
from .nugrid import NuGrid
from .procgen import ProcessSpec, coupling_distance, generate_process, make_paired_specs
from .selfnorm import (
    DifferencePath,
    TestConfig,
    _jsonable,
    diagrams_of,
    resolve_quantile,
    test_diagrams,
)
from .ustats import inco_partial_sums

log = logging.getLogger("persistest")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
TABLE_ALPHAS = (0.10, 0.05, 0.01)


def _order(text: str) -> float:
    try:
        r = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not r >= 1:
        raise argparse.ArgumentTypeError("the Wasserstein order must be >= 1 (or inf)")
    return r


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", default=[], metavar="PATH",
                        help="input file or directory; repeat for several samples")
    common.add_argument("--format", choices=("auto", "long", "dir", "diagrams"), default="auto")
    common.add_argument("--variant", choices=("frechet", "inco"), default="inco")
    common.add_argument("--r", type=_order, default=2.0, help="Wasserstein order (inf for bottleneck)")
    common.add_argument("--dim", type=int, default=1, help="homological dimension k")
    common.add_argument("--max-radius", type=float, default=None)
    common.add_argument("--delta", type=float, default=0.0)
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--nu-grid", type=int, default=100)
    common.add_argument("--replications", type=int, default=100_000)
    common.add_argument("--steps", type=int, default=1_000)
    common.add_argument("--quantile-table", default=None, metavar="JSON",
                        help="read the critical value from a saved table instead of simulating")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--cache-dir", default=None, help="disk cache for distance matrices")
    common.add_argument("--no-plots", action="store_true")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="persistest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("persistence", parents=[common], help="Čech persistence diagrams of point clouds")
    sub.add_parser("distance", parents=[common], help="pairwise Wasserstein distances between diagrams")
    sub.add_parser("frechet", parents=[common], help="Fréchet mean and variance of a diagram sample")
    sub.add_parser("incovar", parents=[common], help="independent-copy variance and its partial sums")
    sub.add_parser("quantiles", parents=[common], help="simulate limit-law quantiles")
    sub.add_parser("test", parents=[common], help="two-sample test for a relevant variance difference")

    sim = sub.add_parser("simulate", parents=[common], help="generate a synthetic cloud process")
    _process_flags(sim)
    pw = sub.add_parser("power", parents=[common], help="rejection rates over a sweep of effect sizes")
    _process_flags(pw)
    pw.add_argument("--effects", type=_float_list, default=[0.0, 0.05, 0.1, 0.2])
    pw.add_argument("--reps", type=int, default=20)
    return parser


def _process_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("iid", "ma"), default="iid")
    p.add_argument("--ma-order", type=int, default=0)
    p.add_argument("--points", type=int, default=20, help="points per cloud")
    p.add_argument("--ambient-dim", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--topology", choices=("noisy-circle", "uniform-box"), default="noisy-circle")
    p.add_argument("--length", type=int, default=30, help="number of clouds per sample")


# ---------------------------------------------------------------------------
# input handling


def _detect_format(path: Path) -> str:
    if path.is_dir():
        return "dir"
    with open(path) as fh:
        first = fh.readline().strip()
    if first.startswith("#") or first.startswith("index") or first.replace(" ", "") == "birth,death":
        return "diagrams"
    return "long"


def _load(path: str, args) -> tuple[str, list]:
    p = Path(path)
    fmt = args.format if args.format != "auto" else _detect_format(p)
    if fmt == "diagrams":
        return fmt, pio.read_diagrams(p)
    return fmt, pio.ingest_clouds(p, fmt)


def _diagrams(path: str, args) -> list[PersistenceDiagram]:
    fmt, items = _load(path, args)
    if fmt == "diagrams":
        return items
    return diagrams_of(items, args.dim, args.max_radius)


def _require_inputs(args, n: int | None = None, at_least: int = 1) -> None:
    for p in args.input:
        if not Path(p).exists():
            raise InputError(f"input {p} does not exist")
    k = len(args.input)
    if n is not None and k != n:
        raise InputError(f"'{args.command}' needs exactly {n} --input paths, got {k}")
    if k < at_least:
        raise InputError(f"'{args.command}' needs at least {at_least} --input path(s)")


def _config(args) -> TestConfig:
    return TestConfig(
        variant=args.variant, r=args.r, feature_dim=args.dim, delta=args.delta, alpha=args.alpha,
        nu_grid=args.nu_grid, seed=args.seed,
        quantile_source="table" if args.quantile_table else "fresh-simulation",
        quantile_table=args.quantile_table, replications=args.replications, steps=args.steps,
        max_radius=args.max_radius, threads=max(1, args.threads),
    )


def _spec(args, seed: int | None = None) -> ProcessSpec:
    return ProcessSpec(
        kind=args.kind, ma_order=args.ma_order, points_per_cloud=args.points, dim=args.ambient_dim,
        noise_scale=args.noise, topology=args.topology, seed=args.seed if seed is None else seed,
    )


def _parameters(args) -> dict:
    # threads, output location and verbosity do not change any result
    skip = {"threads", "out", "verbose", "no_plots", "cache_dir", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _document(args, results: dict, outputs: dict, summary: str) -> dict:
    return _jsonable({
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "nu": NuGrid(args.nu_grid).to_dict(),
        "parameters": _parameters(args),
        "results": results,
        "outputs": {k: str(v) for k, v in sorted(outputs.items())},
        "summary": summary,
    })


# ---------------------------------------------------------------------------
# commands


def cmd_persistence(args, out: Path):
    _require_inputs(args)
    results, outputs, all_d = [], {}, []
    for i, path in enumerate(args.input):
        D = _diagrams(path, args)
        all_d.extend(D)
        f = pio.write_diagrams(D, out / f"diagrams_{i}.csv")
        outputs[f"diagrams_{i}"] = f.name
        results.append({
            "input": path, "n_diagrams": len(D), "n_pairs": [len(d) for d in D],
            "n_essential": [d.n_essential for d in D],
        })
    if not args.no_plots and all_d:
        outputs["figure"] = plot().plot_diagrams(all_d, out / "diagrams.png").name
    n = sum(r["n_diagrams"] for r in results)
    return {"samples": results}, outputs, f"{n} diagrams in dimension {args.dim}"


def _all_diagrams(args) -> list[PersistenceDiagram]:
    out = []
    for p in args.input:
        out.extend(_diagrams(p, args))
    return out


def cmd_distance(args, out: Path):
    _require_inputs(args)
    D = _all_diagrams(args)
    if len(D) < 2:
        raise InputError("need at least two diagrams to compare")
    M = pio.cached_distance_matrix(D, args.r, args.cache_dir, args.threads)
    f = pio.write_csv(out / "distances.csv", [f"d{j}" for j in range(len(D))], M.tolist())
    results = {"r": args.r, "n": len(D), "matrix": M.tolist()}
    summary = f"{len(D)} x {len(D)} W_{args.r:g} matrix"
    if len(D) == 2:
        results["distance"] = float(M[0, 1])
        summary = f"W_{args.r:g} = {M[0, 1]:.10g}"
    return results, {"distances": f.name}, summary


def cmd_frechet(args, out: Path):
    _require_inputs(args)
    D = _all_diagrams(args)
    M = pio.cached_distance_matrix(D, args.r, args.cache_dir, args.threads) if len(D) > 1 else None
    est = estimate_frechet_mean(D, args.r, distance_matrix=M)
    path = variance_partial_sum(D, est.mean, args.r)
    nu = NuGrid(args.nu_grid)
    outputs = {"mean": pio.write_diagrams(est.mean, out / "mean.csv").name}
    outputs["variance_path"] = pio.write_csv(
        out / "variance_path.csv", ["s", "V"], zip(nu.points.tolist(), path.at_counts(nu.counts(path.m)).tolist())
    ).name
    if not args.no_plots:
        outputs["figure"] = plot().plot_diagrams([*D, est.mean], out / "frechet_mean.png").name
    results = {
        "n": len(D), "variance": est.variance, "mean_size": len(est.mean), "converged": est.converged,
        "iterations": est.n_iter, "heuristic": est.heuristic, "objective_trace": est.objective_trace,
    }
    return results, outputs, f"Fréchet variance {est.variance:.6g} (mean with {len(est.mean)} points)"


def cmd_incovar(args, out: Path):
    _require_inputs(args)
    D = _all_diagrams(args)
    M = pio.cached_distance_matrix(D, args.r, args.cache_dir, args.threads)
    P = inco_partial_sums(D, args.r, distances=M)
    nu = NuGrid(args.nu_grid)
    c = nu.counts(P.n)
    S = P.at_counts(c, c)
    pts = nu.points
    rows = [(s, t, S[i, j]) for i, s in enumerate(pts.tolist()) for j, t in enumerate(pts.tolist())]
    outputs = {"partial_sums": pio.write_csv(out / "partial_sums.csv", ["s", "t", "U"], rows).name}
    if not args.no_plots:
        outputs["figure"] = plot().plot_difference_surface(pts, S, out / "partial_sums.png").name
    return {"n": P.n, "inco_variance": P.total}, outputs, f"inco-variance {P.total:.6g} from {P.n} diagrams"


def cmd_quantiles(args, out: Path):
    nu = NuGrid(args.nu_grid)
    draws = limit_draws(args.variant, args.replications, args.steps, nu, args.seed, args.threads)
    table = table_from_draws(args.variant, {*TABLE_ALPHAS, args.alpha}, draws, args.steps, nu, args.seed)
    outputs = {"table": table.save(out / "quantile_table.json").name}
    if not args.no_plots:
        q, _ = table.lookup(args.alpha)
        outputs["figure"] = plot().plot_limit_draws(draws, out / "limit_draws.png", quantile=q).name
    q, se = table.lookup(args.alpha)
    return table.to_dict(), outputs, f"{args.variant} q_{1 - args.alpha:g} = {q:.6g} (SE {se:.2g})"


def _process_outputs(report, out: Path, no_plots: bool) -> dict:
    proc = report.process
    outputs = {}
    if isinstance(proc, DifferencePath):
        rows = zip(proc.points.tolist(), proc.values.tolist())
        outputs["difference"] = pio.write_csv(out / "difference_path.csv", ["s", "D"], rows).name
        if not no_plots:
            outputs["figure"] = plot().plot_difference_path(
                proc.points, proc.values, out / "difference_path.png", proc.D_hat
            ).name
    elif proc is not None:
        p = proc.points.tolist()
        rows = [(s, t, proc.values[i, j]) for i, s in enumerate(p) for j, t in enumerate(p)]
        outputs["difference"] = pio.write_csv(out / "difference_surface.csv", ["s", "t", "D"], rows).name
        if not no_plots:
            outputs["figure"] = plot().plot_difference_surface(
                proc.points, proc.values, out / "difference_surface.png"
            ).name
    return outputs


def cmd_test(args, out: Path):
    _require_inputs(args, n=2)
    cfg = _config(args)
    dx, dy = _diagrams(args.input[0], args), _diagrams(args.input[1], args)
    mx = _stage_distances(dx, args)
    my = _stage_distances(dy, args)
    report = test_diagrams(dx, dy, cfg, mx, my)
    outputs = _process_outputs(report, out, args.no_plots)
    verdict = "reject" if report.reject else "do not reject"
    summary = (f"{cfg.variant}: D^2 = {report.D_hat_sq:.6g}, W = {report.W_hat:.6g}, "
               f"q = {report.q_alpha:.6g}; {verdict} H0 at delta = {cfg.delta:g}")
    return report.to_dict(), outputs, summary


def _stage_distances(diagrams, args):
    try:
        return pio.cached_distance_matrix(diagrams, args.r, args.cache_dir, args.threads)
    except PersistestError:
        raise
    except Exception as exc:
        raise StageError("distances", exc) from exc


def cmd_simulate(args, out: Path):
    spec = _spec(args)
    clouds = generate_process(spec, args.length)
    outputs = {"clouds": pio.write_clouds(clouds, out / "clouds.csv").name}
    lags = list(range(1, spec.order + 3))
    cd = [coupling_distance(spec, m, T=50, r=args.r if math.isfinite(args.r) else 2.0) for m in lags]
    outputs["coupling"] = pio.write_csv(out / "coupling.csv", ["m", "distance"], zip(lags, cd)).name
    if not args.no_plots:
        D = diagrams_of(clouds[: min(10, len(clouds))], args.dim, args.max_radius)
        outputs["figure"] = plot().plot_diagrams(D, out / "diagrams.png").name
    results = {"spec": spec.to_dict(), "length": args.length, "coupling_lags": lags, "coupling_distance": cd}
    return results, outputs, f"{args.length} clouds of {spec.points_per_cloud} points ({spec.kind}, q = {spec.order})"


def cmd_power(args, out: Path):
    cfg = _config(args)
    q, qmeta = resolve_quantile(cfg)
    seeds = np.random.SeedSequence(args.seed).generate_state(2 * args.reps * len(args.effects))
    rates, k = [], 0
    base = _spec(args)
    for effect in args.effects:
        sx, sy = make_paired_specs(effect, base)
        hits = 0
        for _ in range(args.reps):
            cx = generate_process(ProcessSpec(**{**sx.to_dict(), "seed": int(seeds[k])}), args.length)
            cy = generate_process(ProcessSpec(**{**sy.to_dict(), "seed": int(seeds[k + 1])}), args.length)
            k += 2
            dx = diagrams_of(cx, args.dim, args.max_radius)
            dy = diagrams_of(cy, args.dim, args.max_radius)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                hits += test_diagrams(dx, dy, cfg).W_hat > q
        rates.append(hits / args.reps)
        log.info("effect %g: rejection rate %.3f", effect, rates[-1])
    outputs = {"power": pio.write_csv(out / "power.csv", ["effect", "rate"], zip(args.effects, rates)).name}
    if not args.no_plots:
        outputs["figure"] = plot().plot_power_curve(args.effects, rates, out / "power.png", args.alpha).name
    results = {"effects": args.effects, "rates": rates, "reps": args.reps, "quantile": q, "quantile_meta": qmeta,
               "spec": base.to_dict()}
    return results, outputs, "power " + ", ".join(f"{e:g}:{r:.2f}" for e, r in zip(args.effects, rates))


COMMANDS = {
    "persistence": cmd_persistence,
    "distance": cmd_distance,
    "frechet": cmd_frechet,
    "incovar": cmd_incovar,
    "quantiles": cmd_quantiles,
    "test": cmd_test,
    "simulate": cmd_simulate,
    "power": cmd_power,
}


def plot():
    # matplotlib is imported only when a figure is requested
    from . import plotting

    return plotting


def _exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (InputError, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        results, outputs, summary = COMMANDS[args.command](args, out)
        outputs["report"] = "report.json"
        pio.write_json(_document(args, results, outputs, summary), out / "report.json")
    except (PersistestError, OSError, ValueError) as exc:
        print(f"persistest {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    print(summary)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
