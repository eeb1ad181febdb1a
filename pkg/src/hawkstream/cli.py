"""Command-line surface: dataset generation, fitting, grids, inspection.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .evaluation import (
    AGG_COLUMNS,
    GRID_COLUMNS,
    ExperimentGrid,
    nmi,
    run_grid,
    write_csv,
)
from .hawkes import spectral_radius
from .io import DataFormatError, read_dataset, read_json, write_dataset, write_json
from .priors import PRIOR_KINDS, PriorConfig
from .smc import SMCConfig, SMCEngine
from .synthetic import GenerationError, GenerationSpec, generate_dataset
from .temporal import KernelBasis, kernel_value

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

NETWORK_LAGS_H = [0.0, 2.0, 4.0, 6.0, 8.0]

PRESETS = {
    "synthetic": {
        "prior": "mpdhp",
        "r": 1.0,
        "lambda0": 0.01,
        "alpha_dp": 1.0,
        "theta0": 0.01,
        "n_particles": 10,
        "n_samples": 2000,
        "beta0": 2.0,
        "kernel_means": [3.0, 7.0, 11.0],
        "kernel_sigmas": [0.5, 0.5, 0.5],
    },
    "reddit": {
        "prior": "mpdhp",
        "r": 1.0,
        "lambda0": 0.001,
        "alpha_dp": 1.0,
        "theta0": 0.01,
        "n_particles": 8,
        "n_samples": 100_000,
        "beta0": 2.0,
        "kernel_means": [0.0, 2.0, 4.0, 6.0, 8.0],
        "kernel_sigmas": [1.0, 1.0, 1.0, 1.0, 1.0],
    },
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _csv_floats(text):
    return [float(x) for x in str(text).split(",") if x != ""]


def _build_parser():
    parser = _Parser(
        prog="hawkstream",
        description="Streaming text clustering with interacting topic dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a labelled synthetic dataset")
    gen.add_argument("--out", required=True, help="output JSONL path")
    gen.add_argument("--config", help="key=value defaults file")
    gen.add_argument("--k", type=int, help="number of clusters (default 2)")
    gen.add_argument("--vocab-size", type=int, help="vocabulary size (default 1000)")
    gen.add_argument("--n-words", type=int, help="tokens per document (default 20)")
    gen.add_argument("--n-events", type=int, help="stream length (default 5000)")
    gen.add_argument("--textual-overlap", type=float, help="target in [0,1] (default 0)")
    gen.add_argument("--temporal-overlap", type=float, help="target in [0,1] (default 0)")
    gen.add_argument("--kernel-means", type=_csv_floats, help="comma-separated hours")
    gen.add_argument("--kernel-sigmas", type=_csv_floats, help="comma-separated hours")
    gen.add_argument("--immigrant-rate", type=float, help="events/hour/cluster")
    gen.add_argument("--seed", type=int, help="generation seed (default 0)")

    fit = sub.add_parser("fit", help="run the streaming clustering engine")
    fit.add_argument("--input", required=True, help="JSONL event stream")
    fit.add_argument("--out", required=True, help="output path prefix")
    fit.add_argument("--config", help="key=value defaults file")
    fit.add_argument("--preset", choices=sorted(PRESETS), help="parameter preset")
    fit.add_argument("--prior", choices=PRIOR_KINDS, help="allocation prior kind")
    fit.add_argument("--r", type=float, help="prior exponent")
    fit.add_argument("--lambda0", type=float, help="new-cluster intensity mass")
    fit.add_argument("--alpha-dp", type=float, help="count-prior concentration")
    fit.add_argument("--theta0", type=float, help="per-word pseudo-count")
    fit.add_argument("--n-particles", type=int)
    fit.add_argument("--n-samples", type=int)
    fit.add_argument("--beta0", type=float, help="candidate prior concentration")
    fit.add_argument("--omega-thres", type=float, help="particle replacement threshold")
    fit.add_argument("--kernel-means", type=_csv_floats)
    fit.add_argument("--kernel-sigmas", type=_csv_floats)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--vocab-size", type=int, help="override the header value")
    fit.add_argument("--ts-unit", choices=["hours", "seconds"], default="hours")
    fit.add_argument("--eval", action="store_true", help="print NMI against labels")

    grd = sub.add_parser("grid", help="run a synthetic experiment grid")
    grd.add_argument("--spec", help="grid spec JSON file")
    grd.add_argument("--preset", choices=["fig2-desk"], help="built-in grid")
    grd.add_argument("--out", required=True, help="output directory")
    grd.add_argument("--jobs", type=int, default=1)
    grd.add_argument("--svg", action="store_true", help="also emit line charts")

    ins = sub.add_parser("inspect", help="summarize a dataset or fit artifact")
    ins.add_argument("path")
    return parser


def _read_config_file(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _merged(defaults, config_path, flag_values, float_keys=(), int_keys=(), list_keys=()):
    merged = dict(defaults)
    if config_path:
        raw = _read_config_file(config_path)
        for key, val in raw.items():
            if key in list_keys:
                merged[key] = _csv_floats(val)
            elif key in float_keys:
                merged[key] = float(val)
            elif key in int_keys:
                merged[key] = int(val)
            else:
                merged[key] = val
    for key, val in flag_values.items():
        if val is not None:
            merged[key] = val
    return merged


def cmd_generate(args):
    defaults = {
        "k": 2,
        "vocab_size": 1000,
        "n_words": 20,
        "n_events": 5000,
        "textual_overlap": 0.0,
        "temporal_overlap": 0.0,
        "kernel_means": [3.0, 7.0, 11.0],
        "kernel_sigmas": [0.5, 0.5, 0.5],
        "immigrant_rate": 0.3,
        "seed": 0,
    }
    flags = {
        "k": args.k,
        "vocab_size": args.vocab_size,
        "n_words": args.n_words,
        "n_events": args.n_events,
        "textual_overlap": args.textual_overlap,
        "temporal_overlap": args.temporal_overlap,
        "kernel_means": args.kernel_means,
        "kernel_sigmas": args.kernel_sigmas,
        "immigrant_rate": args.immigrant_rate,
        "seed": args.seed,
    }
    params = _merged(
        defaults,
        args.config,
        flags,
        float_keys=("textual_overlap", "temporal_overlap", "immigrant_rate"),
        int_keys=("k", "vocab_size", "n_words", "n_events", "seed"),
        list_keys=("kernel_means", "kernel_sigmas"),
    )
    spec = GenerationSpec(
        n_clusters=params["k"],
        vocab_size=params["vocab_size"],
        n_words=params["n_words"],
        n_events=params["n_events"],
        textual_overlap=params["textual_overlap"],
        temporal_overlap=params["temporal_overlap"],
        kernel_means=params["kernel_means"],
        kernel_sigmas=params["kernel_sigmas"],
        immigrant_rate=params["immigrant_rate"],
        seed=params["seed"],
    )
    dataset = generate_dataset(spec)
    write_dataset(args.out, dataset.documents, spec.vocab_size)
    manifest_path = _manifest_path(args.out)
    write_json(manifest_path, dataset.manifest())
    print(
        f"wrote {len(dataset.documents)} events to {args.out} "
        f"(K={spec.n_clusters}, V={spec.vocab_size})"
    )
    print(
        f"achieved overlaps: textual={dataset.achieved_textual_overlap:.4f} "
        f"temporal={dataset.achieved_temporal_overlap:.4f}"
    )
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _manifest_path(dataset_path):
    stem, _ = os.path.splitext(dataset_path)
    return stem + ".manifest.json"


def cmd_fit(args):
    defaults = dict(PRESETS["synthetic"])
    defaults.update({"omega_thres": None, "seed": 0})
    if args.preset:
        defaults.update(PRESETS[args.preset])
    flags = {
        "prior": args.prior,
        "r": args.r,
        "lambda0": args.lambda0,
        "alpha_dp": args.alpha_dp,
        "theta0": args.theta0,
        "n_particles": args.n_particles,
        "n_samples": args.n_samples,
        "beta0": args.beta0,
        "omega_thres": args.omega_thres,
        "kernel_means": args.kernel_means,
        "kernel_sigmas": args.kernel_sigmas,
        "seed": args.seed,
    }
    params = _merged(
        defaults,
        args.config,
        flags,
        float_keys=("r", "lambda0", "alpha_dp", "theta0", "beta0", "omega_thres"),
        int_keys=("n_particles", "n_samples", "seed"),
        list_keys=("kernel_means", "kernel_sigmas"),
    )
    documents, vocab_size = read_dataset(
        args.input, vocab_size=args.vocab_size, ts_unit=args.ts_unit
    )
    basis = KernelBasis(params["kernel_means"], params["kernel_sigmas"])
    prior = PriorConfig(
        kind=params["prior"],
        r=params["r"],
        lambda0=params["lambda0"],
        alpha_dp=params["alpha_dp"],
    )
    config = SMCConfig(
        prior=prior,
        basis=basis,
        vocab_size=vocab_size,
        theta_word=params["theta0"],
        n_particles=params["n_particles"],
        n_samples=params["n_samples"],
        beta0=params["beta0"],
        omega_thres=params["omega_thres"],
        seed=params["seed"],
    )
    engine = SMCEngine(config)
    engine.run((d.ts, d.tokens) for d in documents)
    best = engine.best_particle()

    assignments_path = args.out + ".assignments.jsonl"
    with open(assignments_path, "w") as fh:
        for event_id, cluster, entropy in engine.trace:
            fh.write(
                json.dumps(
                    {"event": event_id, "cluster": cluster, "entropy": round(entropy, 12)}
                )
                + "\n"
            )

    result = _fit_result(engine, best, params, vocab_size)
    truth = [d.label for d in documents]
    score = None
    if args.eval:
        if any(lab is None for lab in truth):
            raise DataFormatError("--eval requires ground-truth labels on every event")
        score = nmi(truth, best.labels.view())
        result["nmi"] = score
    result_path = args.out + ".result.json"
    write_json(result_path, result)

    n_active = sum(1 for rec in best.records.values() if rec.alive)
    print(
        f"fit {len(documents)} events: {best.next_cluster_id} clusters opened, "
        f"{n_active} active at end"
    )
    if score is not None:
        print(f"NMI: {score:.4f}")
    print(f"assignments: {assignments_path}")
    print(f"result: {result_path}")
    return EXIT_OK


def _fit_result(engine, best, params, vocab_size):
    basis = engine.config.basis
    tensor = engine.final_tensor(best)
    ids = tensor.cluster_ids
    pos = {c: i for i, c in enumerate(ids)}
    lag_vals = {
        lag: np.array([kernel_value(basis, lag)]).ravel() for lag in NETWORK_LAGS_H
    }
    edges = []
    for target in ids:
        for source in ids:
            row = tensor.weights[pos[target], pos[source]]
            weight = float(row.sum())
            if weight <= 0.0:
                continue
            edges.append(
                {
                    "target": target,
                    "source": source,
                    "weight": weight,
                    "intensity_at_lags": [
                        float(row @ lag_vals[lag]) for lag in NETWORK_LAGS_H
                    ],
                }
            )
    clusters = []
    for cid in ids:
        rec = best.records[cid]
        rows = engine.sampled_rows(best, cid)
        clusters.append(
            {
                "id": cid,
                "n_docs": rec.n_docs,
                "birth_h": rec.birth_t,
                "last_event_h": rec.last_t,
                "active_at_end": rec.alive,
                "top_words": [[int(v), int(n)] for v, n in rec.words.top_words(10)],
                "rows": {str(s): [float(x) for x in r] for s, r in rows.items()},
            }
        )
    return {
        "params": {k: params[k] for k in sorted(params) if params[k] is not None},
        "vocab_size": vocab_size,
        "n_events": len(best.labels.view()),
        "clusters_opened": best.next_cluster_id,
        "clusters": clusters,
        "spectral_radius": spectral_radius(tensor),
        "network": {
            "nodes": ids,
            "lags_h": NETWORK_LAGS_H,
            "edges": edges,
        },
        "timeline": [
            {
                "id": cid,
                "birth_h": best.records[cid].birth_t,
                "last_event_h": best.records[cid].last_t,
                "n_docs": best.records[cid].n_docs,
            }
            for cid in ids
        ],
    }


FIG2_DESK_GRID = {
    "prior_kinds": ["mpdhp", "pdhp", "dp", "up"],
    "textual_overlap": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
    "n_events": 2000,
    "replications": 20,
    "n_particles": [8],
    "n_samples": [500],
}


def cmd_grid(args):
    if bool(args.spec) == bool(args.preset):
        raise _UsageError("grid needs exactly one of --spec or --preset")
    spec_dict = dict(FIG2_DESK_GRID) if args.preset else read_json(args.spec)
    grid = ExperimentGrid.from_dict(spec_dict)
    os.makedirs(args.out, exist_ok=True)
    rows, aggregates, errors = run_grid(grid, jobs=args.jobs)
    runs_path = os.path.join(args.out, "runs.csv")
    agg_path = os.path.join(args.out, "aggregate.csv")
    write_csv(runs_path, rows, GRID_COLUMNS)
    write_csv(agg_path, aggregates, AGG_COLUMNS)
    print(f"{len(rows)} runs -> {runs_path}")
    print(f"{len(aggregates)} cells -> {agg_path}")
    if args.svg and aggregates:
        from .svg import line_chart

        series = {}
        for agg in aggregates:
            series.setdefault(agg["prior_kind"], []).append(
                (agg["textual_overlap"], agg["nmi_mean"])
            )
        svg_path = os.path.join(args.out, "nmi_vs_overlap.svg")
        line_chart(
            series,
            svg_path,
            title="NMI vs textual overlap",
            x_label="textual overlap",
            y_label="NMI",
        )
        print(f"chart -> {svg_path}")
    for cell, rep, message in errors:
        print(f"cell failure (rep {rep}): {cell}: {message}", file=sys.stderr)
    return EXIT_NUMERICAL if errors else EXIT_OK


def cmd_inspect(args):
    path = args.path
    if not os.path.exists(path):
        raise DataFormatError(f"{path}: no such file")
    if os.path.getsize(path) == 0:
        raise DataFormatError(f"{path}: empty file")
    if path.endswith(".jsonl"):
        first = json.loads(open(path).readline())
        if "ts" in first and "cluster" in first and "tokens" not in first:
            return _inspect_assignments(path)
        documents, vocab_size = read_dataset(path)
        labels = [d.label for d in documents if d.label is not None]
        print(f"dataset: {len(documents)} events, V={vocab_size}", end="")
        if labels:
            uniq, counts = np.unique(labels, return_counts=True)
            print(f", K={uniq.size}")
            for u, c in zip(uniq, counts):
                print(f"  cluster {u}: {c} events")
        else:
            print(", unlabelled")
        span = documents[-1].ts - documents[0].ts
        print(f"span: {span:.2f} h")
        return EXIT_OK
    payload = read_json(path)
    if "clusters" in payload and "spectral_radius" in payload:
        print(
            f"fit result: {payload['n_events']} events, "
            f"{payload['clusters_opened']} clusters opened"
        )
        active = [c for c in payload["clusters"] if c.get("active_at_end")]
        print(f"active at end: {len(active)}")
        print(f"spectral radius of final tensor: {payload['spectral_radius']:.4f}")
        for c in sorted(payload["clusters"], key=lambda c: -c["n_docs"])[:10]:
            print(
                f"  cluster {c['id']}: {c['n_docs']} docs, "
                f"alive {c['birth_h']:.1f}-{c['last_event_h']:.1f} h"
            )
        return EXIT_OK
    if "spec" in payload and "tensor" in payload:
        spec = payload["spec"]
        print(
            f"dataset manifest: K={spec['n_clusters']}, V={spec['vocab_size']}, "
            f"{spec['n_events']} events"
        )
        print(
            f"achieved overlaps: textual={payload['achieved_textual_overlap']:.4f} "
            f"temporal={payload['achieved_temporal_overlap']:.4f}"
        )
        return EXIT_OK
    raise DataFormatError(f"{path}: unrecognized artifact type")


def _inspect_assignments(path):
    n = 0
    clusters = set()
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            n += 1
            clusters.add(rec["cluster"])
    print(f"assignments: {n} events, {len(clusters)} distinct clusters")
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=os.environ.get("HAWKSTREAM_LOGLEVEL", "WARNING"))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handlers = {
        "generate": cmd_generate,
        "fit": cmd_fit,
        "grid": cmd_grid,
        "inspect": cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GenerationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
