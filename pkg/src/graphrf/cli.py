"""Command-line interface.

Every subcommand writes a JSON result document (inputs echoed, seed,
metrics) into --out-dir, plus CSV files for matrices and sweeps and PNG
figures rendered from the same data. All numerical output is a pure
function of the flags and the seed; wall-clock timings live in a separate
"timing" key so reproducibility checks can ignore them.

Exit codes: 0 success, 1 usage error, 2 numerical error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .applications import (
    angular_error,
    clustering_error,
    kernel_kmeans,
    kernel_regression_predict,
    load_attributes,
    random_mask,
    save_attributes,
)
from .estimator import estimate_gram, kernel_matvec, relative_frobenius_error
from .graphs import (
    Graph,
    GraphFormatError,
    binary_tree,
    bundled_graph,
    erdos_renyi,
    laplacian_graph,
    load_edge_list,
    normalized_adjacency,
    random_regular,
    save_edge_list,
    spectral_radius,
    triangulated_grid,
)
from .modulation import (
    DIFFUSION,
    DREG,
    INVERSE_COSINE,
    PSTEP,
    DivergenceError,
    KernelSpec,
    ModulationFn,
    heat_modulation,
    load_table,
    modulation_for,
    taylor_coeffs,
    walk_plan,
)
from .neural import (
    NeuralModParams,
    TrainConfig,
    TrainingDivergedError,
    neural_modulation,
    train_modulation,
)
from .ode import OdeProblem, simulate_exact, simulate_grf
from .oracle import expm, normalized_exact_kernel
from .seeding import derive_seed
from .walker import feature_pair

_KIND_ALIASES = {
    "d_regularised_laplacian": DREG,
    "dreg": DREG,
    "d-reg": DREG,
    "p_step_random_walk": PSTEP,
    "pstep": PSTEP,
    "p-step": PSTEP,
    "diffusion": DIFFUSION,
    "inverse_cosine": INVERSE_COSINE,
    "invcos": INVERSE_COSINE,
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_walk_list(text: str) -> list[int]:
    try:
        walks = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise UsageError(f"bad --walks value {text!r}; expected comma-separated integers")
    if not walks or any(w < 1 for w in walks):
        raise UsageError("--walks needs positive integers")
    return walks


def _parse_node_range(text: str) -> list[int]:
    """'100..1600' doubles from 100 to 1600; '100,200,500' is explicit."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo < 1 or hi < lo:
            raise UsageError(f"bad --nodes range {text!r}")
        out = []
        n = lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    return [int(p) for p in text.split(",") if p]


def _kernel_spec(args) -> KernelSpec:
    if not getattr(args, "kernel", None):
        raise UsageError("this command needs --kernel (the exact reference is computed from it)")
    kind = _KIND_ALIASES.get(args.kernel.lower())
    if kind is None:
        raise UsageError(f"unknown kernel {args.kernel!r}; choose from {sorted(set(_KIND_ALIASES))}")
    if kind == DREG:
        return KernelSpec.d_regularised(d=args.d, sigma=args.sigma)
    if kind == PSTEP:
        return KernelSpec.p_step(p=args.p, alpha=args.alpha)
    if kind == DIFFUSION:
        return KernelSpec.diffusion(sigma=args.sigma)
    return KernelSpec.inverse_cosine()


def _load_graph(args) -> tuple[Graph, str]:
    if getattr(args, "bundled", None):
        return bundled_graph(args.bundled), f"bundled:{args.bundled}"
    if not args.graph:
        raise UsageError("supply --graph FILE or --bundled NAME")
    path = Path(args.graph)
    if not path.exists():
        raise UsageError(f"graph file not found: {path}")
    return load_edge_list(path, directed=args.directed), str(path)


def _operator(g: Graph, name: str) -> Graph:
    if name == "normalized":
        return normalized_adjacency(g)
    if name == "raw":
        return g
    if name == "laplacian":
        return laplacian_graph(g)
    if name == "neg-laplacian":
        return laplacian_graph(g, negate=True)
    raise UsageError(f"unknown operator {name!r}")


def _default_threads() -> int | None:
    env = os.environ.get("GRAPHRF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"bad GRAPHRF_THREADS value {env!r}")
    return None


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _result_doc(command: str, inputs: dict, metrics: dict, outputs: dict, timing: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "metrics": metrics,
        "outputs": outputs,
        "timing": timing,
    }


def _convergence_check(g: Graph, spec: KernelSpec, k_max: int = 400) -> float:
    """Spectral-radius check: the coefficient series must resolve at rho."""
    rho = spectral_radius(normalized_adjacency(g)).value
    coeffs = taylor_coeffs(spec, k_max)
    terms = np.abs(coeffs.values) * np.power(rho, np.arange(len(coeffs)))
    if terms[-1] > 1e-9 and terms[-1] >= terms[-2]:
        raise DivergenceError(
            f"kernel series diverges at spectral radius {rho:.4f}; reduce sigma"
        )
    return rho


def _modulation_from_args(args, spec: KernelSpec | None) -> tuple[ModulationFn, float, str]:
    """Resolve (modulation, walk scale, label) from the flag combination.

    Kernel specs follow the walked-matrix convention: the parameter-free
    modulation runs on step_scale(spec) * W~. Explicit tables and trained
    parameter files are walked at --walk-sigma as given.
    """
    if getattr(args, "modulation_file", None):
        path = Path(args.modulation_file)
        if not path.exists():
            raise UsageError(f"modulation table not found: {path}")
        return load_table(path), args.walk_sigma, f"table:{path}"
    if getattr(args, "params_file", None):
        path = Path(args.params_file)
        if not path.exists():
            raise UsageError(f"params file not found: {path}")
        return neural_modulation(NeuralModParams.from_json(path)), args.walk_sigma, f"neural:{path}"
    if spec is None:
        raise UsageError("supply a kernel, a --modulation-file, or a --params-file")
    f, scale = walk_plan(spec)
    return f, scale * args.walk_sigma, spec.kind


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _cmd_estimate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, graph_label = _load_graph(args)
    spec = _kernel_spec(args)
    walks = _parse_walk_list(args.walks)
    threads = args.threads or _default_threads()

    if args.operator != "normalized" and not (args.modulation_file or args.params_file):
        raise UsageError(
            "estimate compares against the exact kernel of the normalized adjacency; "
            "--operator only applies with an explicit --modulation-file/--params-file"
        )
    t0 = time.perf_counter()
    rho = _convergence_check(g, spec)
    f, walk_sigma, mod_label = _modulation_from_args(args, spec)
    op = _operator(g, args.operator)
    exact = normalized_exact_kernel(g, spec)
    t_exact = time.perf_counter() - t0

    sweep_rows = []
    series_means, series_stds = [], []
    t_grf = 0.0
    for m in walks:
        errors = []
        for rep in range(args.repeats):
            t1 = time.perf_counter()
            phi1, phi2 = feature_pair(
                op, f, args.p_halt, m, sigma=walk_sigma,
                seed=derive_seed(args.seed, m, rep), threads=threads,
            )
            k_hat = estimate_gram(phi1, phi2, symmetrize=args.symmetrize)
            t_grf += time.perf_counter() - t1
            errors.append(relative_frobenius_error(exact, k_hat))
            if args.save_gram and m == walks[-1] and rep == 0:
                np.savetxt(out_dir / "estimate_gram.csv", k_hat, delimiter=",")
                np.savetxt(out_dir / "exact_gram.csv", exact, delimiter=",")
        mean = float(np.mean(errors))
        std = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
        sweep_rows.append((m, mean, std))
        series_means.append(mean)
        series_stds.append(std)

    outputs = {"json": str(out_dir / "estimate.json")}
    if len(walks) > 1 or args.repeats > 1:
        csv_path = out_dir / "estimate_sweep.csv"
        _write_csv(csv_path, ["walks", "mean_error", "std_error"], sweep_rows)
        outputs["sweep_csv"] = str(csv_path)
        if not args.no_plot:
            from .reporting import plot_error_vs_walks

            fig_path = out_dir / "estimate_error_vs_walks.png"
            plot_error_vs_walks(walks, {spec.kind: (series_means, series_stds)}, fig_path)
            outputs["figure"] = str(fig_path)
    if args.save_gram:
        outputs["gram_csv"] = str(out_dir / "estimate_gram.csv")
        outputs["exact_gram_csv"] = str(out_dir / "exact_gram.csv")

    doc = _result_doc(
        "estimate",
        inputs={
            "graph": graph_label,
            "kernel": spec.kind,
            "sigma": spec.sigma,
            "d": spec.d,
            "p": spec.p,
            "alpha": spec.alpha,
            "modulation": mod_label,
            "operator": args.operator,
            "p_halt": args.p_halt,
            "walk_sigma": args.walk_sigma,
            "walks": walks,
            "repeats": args.repeats,
            "seed": args.seed,
            "symmetrize": args.symmetrize,
            "threads": threads,
        },
        metrics={
            "spectral_radius": rho,
            "relative_frobenius_error": sweep_rows[-1][1],
            "sweep": [
                {"walks": m, "mean_error": mean, "std_error": std}
                for m, mean, std in sweep_rows
            ],
        },
        outputs=outputs,
        timing={"exact_seconds": t_exact, "grf_seconds": t_grf},
    )
    _write_json(doc, out_dir / "estimate.json")
    print(f"estimate: error {sweep_rows[-1][1]:.6f} at m={walks[-1]} -> {out_dir / 'estimate.json'}")
    return 0


# ---------------------------------------------------------------------------
# ode
# ---------------------------------------------------------------------------


def _cmd_ode(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, graph_label = _load_graph(args)
    op = _operator(g, args.operator)
    threads = args.threads or _default_threads()

    if args.drive:
        drive = np.loadtxt(args.drive, dtype=np.float64).reshape(-1)
        if drive.shape[0] != g.n:
            raise UsageError(f"drive has {drive.shape[0]} entries for {g.n} nodes")
    else:
        drive = np.zeros(g.n)
        drive[0] = 1.0

    drive_spec = None
    if args.drive_kernel:
        alias = argparse.Namespace(
            kernel=args.drive_kernel, sigma=args.sigma, d=args.d, p=args.p, alpha=args.alpha
        )
        drive_spec = _kernel_spec(alias)

    problem = OdeProblem(operator=op, drive=drive, horizon=args.t, n_samples=args.samples)
    walks = _parse_walk_list(args.walks)

    t0 = time.perf_counter()
    exact = simulate_exact(problem, n_quad=args.quad, drive_kernel=drive_spec) if g.n <= 4096 else None
    t_exact = time.perf_counter() - t0

    rows = []
    x_hat_last = None
    t_grf = 0.0
    for m in walks:
        t1 = time.perf_counter()
        x_hat = simulate_grf(
            problem, m, seed=derive_seed(args.seed, m), drive_kernel=drive_spec,
            p_halt=args.p_halt, threads=threads,
        )
        t_grf += time.perf_counter() - t1
        err = None
        if exact is not None:
            denom = float(np.linalg.norm(exact))
            err = float(np.linalg.norm(x_hat - exact)) / denom if denom > 0 else float(np.linalg.norm(x_hat))
        rows.append((m, err))
        x_hat_last = x_hat

    outputs = {"json": str(out_dir / "ode.json")}
    if len(walks) > 1:
        csv_path = out_dir / "ode_sweep.csv"
        _write_csv(csv_path, ["walks", "normalized_error"], rows)
        outputs["sweep_csv"] = str(csv_path)
        if not args.no_plot and exact is not None:
            from .reporting import plot_error_vs_walks

            fig_path = out_dir / "ode_error_vs_walks.png"
            plot_error_vs_walks(
                walks, {"ode": ([r[1] for r in rows], None)}, fig_path,
                ylabel="normalized final-state error",
            )
            outputs["figure"] = str(fig_path)

    doc = _result_doc(
        "ode",
        inputs={
            "graph": graph_label,
            "operator": args.operator,
            "t": args.t,
            "samples": args.samples,
            "quad": args.quad,
            "walks": walks,
            "p_halt": args.p_halt,
            "seed": args.seed,
            "drive": args.drive or "e1",
            "drive_kernel": args.drive_kernel,
            "threads": threads,
        },
        metrics={
            "x_hat": [float(v) for v in x_hat_last],
            "x_exact": [float(v) for v in exact] if exact is not None else None,
            "normalized_error": rows[-1][1],
            "sweep": [{"walks": m, "normalized_error": e} for m, e in rows],
        },
        outputs=outputs,
        timing={"exact_seconds": t_exact, "grf_seconds": t_grf},
    )
    _write_json(doc, out_dir / "ode.json")
    print(f"ode: normalized error {rows[-1][1]} at m={walks[-1]} -> {out_dir / 'ode.json'}")
    return 0


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------


def _cmd_cluster(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, graph_label = _load_graph(args)
    threads = args.threads or _default_threads()

    t0 = time.perf_counter()
    k_exact = expm(args.sigma2 * g.to_dense())
    t_exact = time.perf_counter() - t0

    t1 = time.perf_counter()
    f = heat_modulation(args.sigma2)
    phi1, phi2 = feature_pair(
        g, f, args.p_halt, args.walks, sigma=1.0, seed=args.seed, threads=threads
    )
    k_hat = estimate_gram(phi1, phi2, symmetrize=True)
    t_grf = time.perf_counter() - t1

    labels_exact = kernel_kmeans(k_exact, args.k, max_iters=args.max_iters, seed=args.seed)
    labels_grf = kernel_kmeans(k_hat, args.k, max_iters=args.max_iters, seed=args.seed)
    e_c = clustering_error(labels_exact, labels_grf)

    csv_path = out_dir / "cluster_labels.csv"
    _write_csv(
        csv_path,
        ["node", "label_exact", "label_grf"],
        [(i, int(labels_exact[i]), int(labels_grf[i])) for i in range(g.n)],
    )
    doc = _result_doc(
        "cluster",
        inputs={
            "graph": graph_label,
            "k": args.k,
            "sigma2": args.sigma2,
            "walks": args.walks,
            "p_halt": args.p_halt,
            "max_iters": args.max_iters,
            "seed": args.seed,
            "threads": threads,
        },
        metrics={"clustering_error": e_c},
        outputs={"json": str(out_dir / "cluster.json"), "labels_csv": str(csv_path)},
        timing={"exact_seconds": t_exact, "grf_seconds": t_grf},
    )
    _write_json(doc, out_dir / "cluster.json")
    print(f"cluster: E_c = {e_c:.4f} -> {out_dir / 'cluster.json'}")
    return 0


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------


def _cmd_regress(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, graph_label = _load_graph(args)
    threads = args.threads or _default_threads()
    if not args.attrs or not Path(args.attrs).exists():
        raise UsageError("regress needs --attrs FILE with one 'nx ny nz' line per node")
    attrs = load_attributes(args.attrs)
    if attrs.shape[0] != g.n:
        raise UsageError(f"attribute rows ({attrs.shape[0]}) != nodes ({g.n})")

    spec = None
    if args.kernel:
        spec = _kernel_spec(args)
    f, walk_sigma, mod_label = _modulation_from_args(args, spec)
    op = _operator(g, args.operator)
    mask = random_mask(g.n, args.mask_fraction, seed=args.seed)

    t0 = time.perf_counter()
    phi1, phi2 = feature_pair(
        op, f, args.p_halt, args.walks, sigma=walk_sigma, seed=args.seed, threads=threads
    )
    pred = kernel_regression_predict(phi1, phi2, attrs, mask)
    err = angular_error(pred, attrs, mask)
    t_grf = time.perf_counter() - t0

    csv_path = out_dir / "regress_predictions.csv"
    _write_csv(
        csv_path,
        ["node", "masked", "px", "py", "pz"],
        [
            (i, int(mask[i]), float(pred[i, 0]), float(pred[i, 1]), float(pred[i, 2]))
            for i in range(g.n)
        ],
    )
    doc = _result_doc(
        "regress",
        inputs={
            "graph": graph_label,
            "attrs": args.attrs,
            "modulation": mod_label,
            "operator": args.operator,
            "mask_fraction": args.mask_fraction,
            "walks": args.walks,
            "p_halt": args.p_halt,
            "walk_sigma": args.walk_sigma,
            "seed": args.seed,
            "threads": threads,
        },
        metrics={
            "angular_error": err,
            "masked_nodes": [int(i) for i in np.flatnonzero(mask)],
        },
        outputs={"json": str(out_dir / "regress.json"), "predictions_csv": str(csv_path)},
        timing={"grf_seconds": t_grf},
    )
    _write_json(doc, out_dir / "regress.json")
    print(f"regress: angular error {err:.4f} -> {out_dir / 'regress.json'}")
    return 0


# ---------------------------------------------------------------------------
# train-mod
# ---------------------------------------------------------------------------


def _cmd_train_mod(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, graph_label = _load_graph(args)

    target = _kernel_spec(args) if args.loss == "frobenius" else None
    attrs = None
    if args.loss == "angular":
        if not args.attrs or not Path(args.attrs).exists():
            raise UsageError("angular loss needs --attrs FILE")
        attrs = load_attributes(args.attrs)

    cfg = TrainConfig(
        learning_rate=args.lr,
        gamma=args.gamma,
        epochs=args.epochs,
        m=args.walks,
        p_halt=args.p_halt,
        sigma=args.walk_sigma,
        seed=args.seed,
        loss=args.loss,
        target=target,
        asymmetric=args.asymmetric,
        l_max=args.l_max,
        mask_fraction=args.mask_fraction,
    )
    t0 = time.perf_counter()
    params, trace = train_modulation(g, cfg, attrs=attrs)
    t_train = time.perf_counter() - t0

    trace_path = out_dir / "train_mod_trace.csv"
    _write_csv(trace_path, ["epoch", "loss", "learning_rate"], trace)

    if cfg.asymmetric:
        params[0].to_json(out_dir / "train_mod_params_1.json")
        params[1].to_json(out_dir / "train_mod_params_2.json")
        learned = neural_modulation(params[0])
        params_json = [str(out_dir / "train_mod_params_1.json"), str(out_dir / "train_mod_params_2.json")]
        params_doc = [dataclasses.asdict(params[0]), dataclasses.asdict(params[1])]
    else:
        params.to_json(out_dir / "train_mod_params.json")
        learned = neural_modulation(params)
        params_json = [str(out_dir / "train_mod_params.json")]
        params_doc = dataclasses.asdict(params)

    table_len = args.table_length
    table_path = out_dir / "train_mod_modulation.txt"
    learned.save_table(table_path, table_len)

    outputs = {
        "json": str(out_dir / "train_mod.json"),
        "trace_csv": str(trace_path),
        "params_json": params_json,
        "modulation_table": str(table_path),
    }
    if not args.no_plot:
        from .reporting import plot_modulations, plot_training_trace

        trace_fig = out_dir / "train_mod_trace.png"
        plot_training_trace(trace, trace_fig)
        mod_fig = out_dir / "train_mod_modulation.png"
        lengths = list(range(min(table_len, 12)))
        table = {"learned": [learned(i) for i in lengths]}
        if target is not None:
            unbiased = modulation_for(target)
            table["unbiased"] = [unbiased(i) for i in lengths]
        plot_modulations(lengths, table, mod_fig)
        outputs["figures"] = [str(trace_fig), str(mod_fig)]

    doc = _result_doc(
        "train-mod",
        inputs={
            "graph": graph_label,
            "loss": args.loss,
            "kernel": target.kind if target else None,
            "sigma": args.sigma,
            "d": args.d,
            "walks": args.walks,
            "p_halt": args.p_halt,
            "walk_sigma": args.walk_sigma,
            "lr": args.lr,
            "gamma": args.gamma,
            "epochs": args.epochs,
            "seed": args.seed,
            "asymmetric": args.asymmetric,
            "l_max": cfg.l_max,
            "mask_fraction": args.mask_fraction,
        },
        metrics={
            "params": params_doc,
            "initial_loss": trace[0][1] if trace else None,
            "final_loss": trace[-1][1] if trace else None,
        },
        outputs=outputs,
        timing={"train_seconds": t_train},
    )
    _write_json(doc, out_dir / "train_mod.json")
    final = trace[-1][1] if trace else float("nan")
    print(f"train-mod: final loss {final:.6f} after {len(trace)} epochs -> {out_dir / 'train_mod.json'}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _cmd_bench(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.graph_family != "er":
        raise UsageError("bench supports --graph-family er")
    nodes = _parse_node_range(args.nodes)
    spec = _kernel_spec(args)
    f, walk_sigma = walk_plan(spec)
    threads = args.threads or _default_threads()

    rows = []
    for n in nodes:
        p_edge = min(1.0, args.degree / max(1, n - 1))
        g = erdos_renyi(n, p_edge, seed=derive_seed(args.seed, n))
        t0 = time.perf_counter()
        exact = normalized_exact_kernel(g, spec)
        t_exact = time.perf_counter() - t0

        op = normalized_adjacency(g)
        t1 = time.perf_counter()
        phi1, phi2 = feature_pair(
            op, f, args.p_halt, args.walks, sigma=walk_sigma,
            seed=derive_seed(args.seed, n, 1), threads=threads,
        )
        t_grf = time.perf_counter() - t1

        err = relative_frobenius_error(exact, estimate_gram(phi1, phi2))
        rows.append((n, t_exact, t_grf, err))

    csv_path = out_dir / "bench.csv"
    _write_csv(csv_path, ["nodes", "exact_seconds", "grf_seconds", "error"], rows)

    ns = np.array([r[0] for r in rows], dtype=np.float64)
    t_ex = np.array([r[1] for r in rows])
    t_gr = np.array([r[2] for r in rows])
    exp_exact = float(np.polyfit(np.log(ns), np.log(t_ex), 1)[0]) if len(rows) > 1 else None
    exp_grf = float(np.polyfit(np.log(ns), np.log(t_gr), 1)[0]) if len(rows) > 1 else None

    outputs = {"json": str(out_dir / "bench.json"), "csv": str(csv_path)}
    if not args.no_plot:
        from .reporting import plot_bench

        fig_path = out_dir / "bench_timing.png"
        plot_bench(ns, t_ex, t_gr, [r[3] for r in rows], fig_path)
        outputs["figure"] = str(fig_path)

    doc = _result_doc(
        "bench",
        inputs={
            "graph_family": args.graph_family,
            "nodes": nodes,
            "degree": args.degree,
            "kernel": spec.kind,
            "sigma": spec.sigma,
            "walks": args.walks,
            "p_halt": args.p_halt,
            "seed": args.seed,
            "threads": threads,
        },
        metrics={
            "exact_time_exponent": exp_exact,
            "grf_time_exponent": exp_grf,
            "rows": [
                {"nodes": n, "exact_seconds": te, "grf_seconds": tg, "error": e}
                for n, te, tg, e in rows
            ],
        },
        outputs=outputs,
        timing={"total_seconds": float(t_ex.sum() + t_gr.sum())},
    )
    _write_json(doc, out_dir / "bench.json")
    print(
        f"bench: exact exponent {exp_exact and round(exp_exact, 2)}, "
        f"grf exponent {exp_grf and round(exp_grf, 2)} -> {csv_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# gen-graph
# ---------------------------------------------------------------------------


def _cmd_gen_graph(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.family == "er":
        g = erdos_renyi(args.nodes, args.p_edge, seed=args.seed)
    elif args.family == "btree":
        g = binary_tree(args.depth)
    elif args.family == "dreg":
        g = random_regular(args.nodes, args.degree, seed=args.seed)
    elif args.family == "grid":
        g, normals = triangulated_grid(args.nu, args.nv, torus=not args.flat)
        if args.attrs_out:
            save_attributes(normals, args.attrs_out)
    else:
        raise UsageError(f"unknown family {args.family!r}")

    # write each undirected edge once
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"# generated: family={args.family} seed={args.seed}\n")
        for i, j, w in g.edges():
            if i <= j:
                fh.write(f"{i} {j} {w!r}\n")
    print(f"gen-graph: {g.n} nodes, {g.num_edges // 2} undirected edges -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, graph: bool = True) -> None:
    p.add_argument("--out-dir", default="results", help="directory for result files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="walker thread cap (default: GRAPHRF_THREADS or serial)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    if graph:
        p.add_argument("--graph", help="edge-list file")
        p.add_argument("--bundled", help="name of a bundled graph (e.g. karate)")
        p.add_argument("--directed", action="store_true",
                       help="treat the edge list as directed (default: symmetrize)")


def _add_kernel_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--kernel", required=required,
                   help="d_regularised_laplacian | p_step_random_walk | diffusion | inverse_cosine")
    p.add_argument("--sigma", type=float, default=0.25, help="kernel regulariser")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--alpha", type=float, default=20.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphrf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a kernel and compare to the exact oracle")
    _add_common(p)
    _add_kernel_flags(p, required=False)
    p.add_argument("--modulation-file", help="tabulated modulation function (one value per line)")
    p.add_argument("--params-file", help="trained modulation parameters (JSON)")
    p.add_argument("--operator", default="normalized",
                   choices=["normalized", "raw", "laplacian", "neg-laplacian"])
    p.add_argument("--p-halt", type=float, default=0.1)
    p.add_argument("--walk-sigma", type=float, default=1.0,
                   help="extra scale on walked weights (regulariser lives in the modulation)")
    p.add_argument("--walks", default="32", help="walkers per node; comma list sweeps")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--save-gram", action="store_true")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("ode", help="simulate dx/dt = W x + y(t) exactly and by Monte Carlo")
    _add_common(p)
    _add_kernel_flags(p)
    p.add_argument("--operator", default="neg-laplacian",
                   choices=["normalized", "raw", "laplacian", "neg-laplacian"])
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--quad", type=int, default=200)
    p.add_argument("--walks", default="16")
    p.add_argument("--p-halt", type=float, default=0.1)
    p.add_argument("--drive", help="file with one drive value per node (default e1)")
    p.add_argument("--drive-kernel", help="kernel applied to the drive (low-rank decomposed)")
    p.set_defaults(func=_cmd_ode)

    p = sub.add_parser("cluster", help="kernel k-means on exp(sigma2 W), exact vs estimated")
    _add_common(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--sigma2", type=float, default=0.2)
    p.add_argument("--walks", type=int, default=80)
    p.add_argument("--p-halt", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=300)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("regress", help="kernel regression of node attribute vectors")
    _add_common(p)
    _add_kernel_flags(p)
    p.add_argument("--attrs", help="attribute file, one 'nx ny nz' line per node")
    p.add_argument("--modulation-file")
    p.add_argument("--params-file")
    p.add_argument("--operator", default="normalized",
                   choices=["normalized", "raw", "laplacian", "neg-laplacian"])
    p.add_argument("--mask-fraction", type=float, default=0.05)
    p.add_argument("--walks", type=int, default=16)
    p.add_argument("--p-halt", type=float, default=0.5)
    p.add_argument("--walk-sigma", type=float, default=1.0)
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("train-mod", help="train the neural modulation function")
    _add_common(p)
    _add_kernel_flags(p)
    p.add_argument("--loss", default="frobenius", choices=["frobenius", "angular"])
    p.add_argument("--attrs")
    p.add_argument("--walks", type=int, default=16)
    p.add_argument("--p-halt", type=float, default=0.5)
    p.add_argument("--walk-sigma", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=0.975)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--asymmetric", action="store_true")
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--mask-fraction", type=float, default=0.05)
    p.add_argument("--table-length", type=int, default=64)
    p.set_defaults(func=_cmd_train_mod)

    p = sub.add_parser("bench", help="timing sweep: exact oracle vs sampler as N grows")
    _add_common(p, graph=False)
    _add_kernel_flags(p)
    p.add_argument("--graph-family", default="er")
    p.add_argument("--nodes", default="100..1600", help="'lo..hi' doubles; or comma list")
    p.add_argument("--degree", type=float, default=10.0, help="expected degree (fixed as N grows)")
    p.add_argument("--walks", type=int, default=8)
    p.add_argument("--p-halt", type=float, default=0.5)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gen-graph", help="write a generated graph as an edge list")
    p.add_argument("--family", required=True, choices=["er", "btree", "dreg", "grid"])
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--p-edge", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=7)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--nu", type=int, default=10)
    p.add_argument("--nv", type=int, default=10)
    p.add_argument("--flat", action="store_true", help="plane grid instead of a torus")
    p.add_argument("--attrs-out", help="write analytic normals here (grid family)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_graph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (GraphFormatError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, TrainingDivergedError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
