"""Clustering metrics and the synthetic experiment-grid runner."""

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


def nmi(true_labels, predicted_labels):
    """Normalized mutual information of two partitions, in [0, 1].

    Arithmetic-mean normalizer over the two entropies, natural logs. Two
    single-cluster partitions are identical and score 1; if exactly one
    side is single-cluster the mutual information (and hence the score)
    is 0.
    """
    u = np.asarray(true_labels)
    v = np.asarray(predicted_labels)
    if u.ndim != 1 or u.shape != v.shape:
        raise ValueError("label arrays must be 1-D and of equal length")
    if u.size == 0:
        raise ValueError("label arrays must be non-empty")
    n = u.size
    _, ui = np.unique(u, return_inverse=True)
    _, vi = np.unique(v, return_inverse=True)
    ku = int(ui.max()) + 1
    kv = int(vi.max()) + 1
    table = np.zeros((ku, kv))
    np.add.at(table, (ui, vi), 1.0)
    pu = table.sum(axis=1) / n
    pv = table.sum(axis=0) / n
    # fsum keeps the sums independent of term order, so swapping the two
    # partitions gives bit-identical results
    hu = -math.fsum(p * math.log(p) for p in pu)
    hv = -math.fsum(p * math.log(p) for p in pv)
    if hu == 0.0 and hv == 0.0:
        return 1.0
    p = table / n
    outer = np.outer(pu, pv)
    mi = math.fsum(
        p[i, j] * math.log(p[i, j] / outer[i, j])
        for i in range(ku)
        for j in range(kv)
        if p[i, j] > 0
    )
    val = 2.0 * mi / (hu + hv)
    return min(max(val, 0.0), 1.0)


def overlap(functions, grid=None):
    """Shared-area measure of N non-negative functions on a common grid.

    Sum over each function of the area it shares with the pointwise max of
    the others, divided by the total area: 0 for disjoint supports, 1 for
    identical functions. With a grid, integrals use the trapezoid rule;
    without one the samples are treated as a unit-spaced discrete domain
    and summed.
    """
    funcs = np.asarray(functions, dtype=np.float64)
    if funcs.ndim != 2:
        raise ValueError("functions must be a 2-D array (N, n_grid)")
    if np.any(funcs < 0.0):
        raise ValueError("functions must be non-negative")
    n = funcs.shape[0]
    if grid is not None:
        grid = np.asarray(grid, dtype=np.float64)
        integrate = lambda f: float(np.trapezoid(f, grid))
    else:
        integrate = lambda f: float(np.sum(f))
    total = sum(integrate(f) for f in funcs)
    if total <= 0.0:
        raise ValueError("total area must be positive")
    if n == 1:
        return 0.0
    shared = 0.0
    # max over j != i via global top-2 at each grid point
    order = np.sort(funcs, axis=0)
    top = order[-1]
    second = order[-2]
    argtop = np.argmax(funcs, axis=0)
    for i in range(n):
        others = np.where(argtop == i, second, top)
        shared += integrate(np.minimum(funcs[i], others))
    return shared / total


@dataclass
class ExperimentGrid:
    """Cross-product experiment specification.

    Every list-valued field is one grid axis; a cell is one combination.
    Per cell, ``replications`` datasets are generated (shared across prior
    kinds at equal replication index) and each prior kind is fitted once
    per dataset, scoring the highest-weight particle's assignments.
    """

    prior_kinds: list = field(default_factory=lambda: ["mpdhp", "pdhp", "dp", "up"])
    r: list = field(default_factory=lambda: [1.0])
    lambda0: list = field(default_factory=lambda: [0.01])
    alpha_dp: list = field(default_factory=lambda: [1.0])
    textual_overlap: list = field(default_factory=lambda: [0.0])
    temporal_overlap: list = field(default_factory=lambda: [0.0])
    n_clusters: list = field(default_factory=lambda: [2])
    n_words: list = field(default_factory=lambda: [20])
    n_particles: list = field(default_factory=lambda: [10])
    n_samples: list = field(default_factory=lambda: [2000])
    n_events: int = 5000
    replications: int = 20
    seed: int = 0
    theta_word: float = 0.01
    beta0: float = 2.0

    def generation_cells(self):
        cells = []
        for tex in self.textual_overlap:
            for temp in self.temporal_overlap:
                for k in self.n_clusters:
                    for nw in self.n_words:
                        cells.append(
                            {
                                "textual_overlap": tex,
                                "temporal_overlap": temp,
                                "n_clusters": k,
                                "n_words": nw,
                            }
                        )
        return cells

    def model_cells(self):
        cells = []
        for kind in self.prior_kinds:
            for r in self.r:
                for lam in self.lambda0:
                    for a in self.alpha_dp:
                        for npart in self.n_particles:
                            for nsamp in self.n_samples:
                                cells.append(
                                    {
                                        "prior_kind": kind,
                                        "r": r,
                                        "lambda0": lam,
                                        "alpha_dp": a,
                                        "n_particles": npart,
                                        "n_samples": nsamp,
                                    }
                                )
        return cells

    @classmethod
    def from_dict(cls, d):
        listy = {
            "prior_kinds",
            "r",
            "lambda0",
            "alpha_dp",
            "textual_overlap",
            "temporal_overlap",
            "n_clusters",
            "n_words",
            "n_particles",
            "n_samples",
        }
        kwargs = {}
        for key, val in d.items():
            if key in listy and not isinstance(val, list):
                val = [val]
            kwargs[key] = val
        return cls(**kwargs)


GRID_COLUMNS = [
    "prior_kind",
    "r",
    "lambda0",
    "alpha_dp",
    "textual_overlap",
    "temporal_overlap",
    "n_clusters",
    "n_words",
    "n_particles",
    "n_samples",
    "n_events",
    "replication",
    "achieved_textual_overlap",
    "achieved_temporal_overlap",
    "nmi",
    "wall_time_s",
]

AGG_COLUMNS = [
    "prior_kind",
    "r",
    "lambda0",
    "alpha_dp",
    "textual_overlap",
    "temporal_overlap",
    "n_clusters",
    "n_words",
    "n_particles",
    "n_samples",
    "n_events",
    "n_runs",
    "nmi_mean",
    "nmi_stderr",
]


def _fit_once(dataset, model_cell, grid, fit_seed):
    from .priors import PriorConfig
    from .smc import SMCConfig, SMCEngine

    prior = PriorConfig(
        kind=model_cell["prior_kind"],
        r=model_cell["r"],
        lambda0=model_cell["lambda0"],
        alpha_dp=model_cell["alpha_dp"],
    )
    config = SMCConfig(
        prior=prior,
        basis=dataset.basis,
        vocab_size=dataset.vocab_size,
        theta_word=grid.theta_word,
        n_particles=model_cell["n_particles"],
        n_samples=model_cell["n_samples"],
        beta0=grid.beta0,
        seed=fit_seed,
    )
    engine = SMCEngine(config)
    start = time.perf_counter()
    engine.run((d.ts, d.tokens) for d in dataset.documents)
    elapsed = time.perf_counter() - start
    best = engine.best_particle()
    truth = [d.label for d in dataset.documents]
    score = nmi(truth, best.labels.view())
    return score, elapsed


def run_grid(grid, jobs=1, on_row=None):
    """Run every (generation cell x model cell x replication) combination.

    Returns (rows, aggregates, errors). Failed runs are recorded and the
    grid continues. Deterministic under the grid seed: datasets and fits
    are seeded from the cell and replication indices, and rows are emitted
    in a fixed order.
    """
    from .synthetic import GenerationSpec, generate_dataset

    gen_cells = grid.generation_cells()
    model_cells = grid.model_cells()
    tasks = [
        (gi, rep)
        for gi in range(len(gen_cells))
        for rep in range(grid.replications)
    ]

    def run_task(task):
        gi, rep = task
        gen = gen_cells[gi]
        out = []
        errs = []
        ds_seed = int(
            np.random.SeedSequence([grid.seed, 1000 + gi, rep]).generate_state(1)[0]
        )
        try:
            spec = GenerationSpec(
                n_clusters=gen["n_clusters"],
                n_words=gen["n_words"],
                n_events=grid.n_events,
                textual_overlap=gen["textual_overlap"],
                temporal_overlap=gen["temporal_overlap"],
                seed=ds_seed,
            )
            dataset = generate_dataset(spec)
        except Exception as exc:  # noqa: BLE001 - cell failures are recorded
            errs.append((gen, rep, f"generation failed: {exc}"))
            return out, errs
        for mi, model in enumerate(model_cells):
            fit_seed = int(
                np.random.SeedSequence(
                    [grid.seed, 2_000_000 + gi, rep, mi]
                ).generate_state(1)[0]
            )
            row = dict(gen)
            row.update(model)
            row["n_events"] = grid.n_events
            row["replication"] = rep
            row["achieved_textual_overlap"] = dataset.achieved_textual_overlap
            row["achieved_temporal_overlap"] = dataset.achieved_temporal_overlap
            try:
                score, elapsed = _fit_once(dataset, model, grid, fit_seed)
            except Exception as exc:  # noqa: BLE001
                errs.append((gen | model, rep, f"fit failed: {exc}"))
                continue
            row["nmi"] = score
            row["wall_time_s"] = elapsed
            out.append(row)
        return out, errs

    rows = []
    errors = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = []
        for task in tasks:
            results.append(run_task(task))
            if on_row:
                on_row(results[-1][0])
    for out, errs in results:
        rows.extend(out)
        errors.extend(errs)

    rows.sort(
        key=lambda r: tuple(
            (repr(r.get(c)) for c in GRID_COLUMNS if c not in ("nmi", "wall_time_s"))
        )
    )
    aggregates = aggregate_rows(rows)
    return rows, aggregates, errors


def aggregate_rows(rows):
    """Mean and standard error of NMI per cell, in stable order."""
    keys = [c for c in AGG_COLUMNS if c not in ("n_runs", "nmi_mean", "nmi_stderr")]
    groups = {}
    for row in rows:
        key = tuple(row[k] for k in keys)
        groups.setdefault(key, []).append(row["nmi"])
    out = []
    for key, scores in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        arr = np.asarray(scores)
        agg = dict(zip(keys, key))
        agg["n_runs"] = arr.size
        agg["nmi_mean"] = float(arr.mean())
        agg["nmi_stderr"] = (
            float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        )
        out.append(agg)
    return out


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})
