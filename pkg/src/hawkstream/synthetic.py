"""Ground-truth dataset factory: influence tensors with a target temporal
overlap, shifted-window vocabularies with a target textual overlap, and
labelled document emission over a simulated interacting stream.

The tensor search first tries plain uniform redraws; when the target is
far from what uniform draws reach, it blends a slot-separated construction
(each cluster pair dominated by its own basis component) with a shared one
and bisects the blend, still subject to the final measured-overlap accept
test. Vocabularies are truncated discrete Gaussian windows of width
V/(2K) translated per cluster; the shift solving the target overlap is
found by bisection with fractional shifts realized as convex combinations
of neighboring integer translations.
"""

from dataclasses import dataclass, field

import numpy as np

from .evaluation import overlap
from .hawkes import InfluenceTensor, simulate, spectral_radius
from .io import TimedDocument
from .temporal import KernelBasis, kernel_values

DEFAULT_BASIS = ([3.0, 7.0, 11.0], [0.5, 0.5, 0.5])

TEMPORAL_TOL = 0.05
TEXTUAL_TOL = 0.01
MAX_TENSOR_ATTEMPTS = 10_000


class GenerationError(RuntimeError):
    pass


@dataclass
class GenerationSpec:
    """Synthetic benchmark settings; defaults are the standard benchmark."""

    n_clusters: int = 2
    vocab_size: int = 1000
    n_words: int = 20
    n_events: int = 5000
    textual_overlap: float = 0.0
    temporal_overlap: float = 0.0
    kernel_means: list = field(default_factory=lambda: list(DEFAULT_BASIS[0]))
    kernel_sigmas: list = field(default_factory=lambda: list(DEFAULT_BASIS[1]))
    immigrant_rate: float = 0.1
    seed: int = 0

    def basis(self):
        return KernelBasis(self.kernel_means, self.kernel_sigmas)

    def to_dict(self):
        return {
            "n_clusters": self.n_clusters,
            "vocab_size": self.vocab_size,
            "n_words": self.n_words,
            "n_events": self.n_events,
            "textual_overlap": self.textual_overlap,
            "temporal_overlap": self.temporal_overlap,
            "kernel_means": list(self.kernel_means),
            "kernel_sigmas": list(self.kernel_sigmas),
            "immigrant_rate": self.immigrant_rate,
            "seed": self.seed,
        }


@dataclass
class Dataset:
    documents: list
    tensor: InfluenceTensor
    vocabularies: np.ndarray
    basis: KernelBasis
    spec: GenerationSpec
    achieved_textual_overlap: float
    achieved_temporal_overlap: float

    @property
    def vocab_size(self):
        return self.spec.vocab_size

    def labels(self):
        return [d.label for d in self.documents]

    def manifest(self):
        return {
            "spec": self.spec.to_dict(),
            "achieved_textual_overlap": self.achieved_textual_overlap,
            "achieved_temporal_overlap": self.achieved_temporal_overlap,
            "tensor": self.tensor.to_json_dict(self.basis),
            "vocabularies": self.vocabularies.tolist(),
        }


def tensor_overlap(weights, basis, step=0.01):
    """Measured overlap among the K^2 pairwise triggering functions."""
    K = weights.shape[0]
    if K == 1:
        return 0.0
    grid = np.arange(0.0, basis.horizon + step, step)
    kb = kernel_values(basis, grid)
    funcs = np.einsum("csl,gl->csg", weights, kb).reshape(K * K, grid.size)
    return overlap(funcs, grid)


def _normalized(weights):
    rho = spectral_radius(weights.sum(axis=2))
    if rho <= 0.0:
        raise GenerationError("degenerate tensor draw: zero spectral radius")
    return weights / rho


def _sparse_proposal(rng, K, L):
    """Each cluster pair dominated by its own basis slot; leftover pairs
    beyond the L available slots get near-zero weight."""
    weights = np.full((K, K, L), 1e-6)
    pairs = [(c, s) for c in range(K) for s in range(K)]
    order = rng.permutation(len(pairs))
    for rank, pi in enumerate(order):
        c, s = pairs[pi]
        if rank < L:
            weights[c, s, rank] = rng.uniform(0.5, 1.0)
    return weights


def generate_tensor(
    n_clusters,
    basis,
    temporal_overlap_target,
    seed,
    tol=TEMPORAL_TOL,
    max_attempts=MAX_TENSOR_ATTEMPTS,
):
    """Random tensor with spectral radius 1 and the requested overlap.

    Returns (tensor, achieved_overlap). Raises GenerationError naming the
    nearest achieved overlap when the target is unreachable.
    """
    if not (0.0 <= temporal_overlap_target <= 1.0):
        raise ValueError("temporal overlap target must be in [0, 1]")
    K = int(n_clusters)
    L = basis.L
    rng = np.random.default_rng(seed)

    if K == 1:
        if temporal_overlap_target > tol:
            raise GenerationError(
                f"could not reach temporal overlap {temporal_overlap_target} "
                f"within +/-{tol}: a single triggering function has overlap 0; "
                f"nearest achieved 0.0000"
            )
        weights = _normalized(rng.uniform(0.0, 1.0, size=(1, 1, L)))
        return InfluenceTensor(weights), 0.0

    best_gap = np.inf
    best = None
    attempts = 0

    uniform_budget = min(200, max_attempts)
    while attempts < uniform_budget:
        attempts += 1
        weights = _normalized(rng.uniform(0.0, 1.0, size=(K, K, L)))
        achieved = tensor_overlap(weights, basis)
        gap = abs(achieved - temporal_overlap_target)
        if gap < best_gap:
            best_gap, best = gap, (weights, achieved)
        if gap <= tol:
            return InfluenceTensor(weights), achieved

    while attempts < max_attempts:
        sparse = _sparse_proposal(rng, K, L)
        common = np.broadcast_to(
            rng.uniform(0.3, 1.0, size=L), (K, K, L)
        ).copy()
        lo_g, hi_g = 0.0, 1.0
        for _ in range(30):
            if attempts >= max_attempts:
                break
            attempts += 1
            gamma = 0.5 * (lo_g + hi_g)
            weights = _normalized((1.0 - gamma) * sparse + gamma * common)
            achieved = tensor_overlap(weights, basis)
            gap = abs(achieved - temporal_overlap_target)
            if gap < best_gap:
                best_gap, best = gap, (weights, achieved)
            if gap <= tol:
                return InfluenceTensor(weights), achieved
            if achieved < temporal_overlap_target:
                lo_g = gamma
            else:
                hi_g = gamma

    raise GenerationError(
        f"could not reach temporal overlap {temporal_overlap_target} "
        f"within +/-{tol} after {max_attempts} attempts; "
        f"nearest achieved {best[1]:.4f}"
    )


def generate_vocabularies(n_clusters, vocab_size, textual_overlap_target, tol=TEXTUAL_TOL):
    """K shifted truncated-Gaussian token distributions with the target
    overlap, solved by bisection on the shift. Returns (dists, achieved)."""
    if not (0.0 <= textual_overlap_target <= 1.0):
        raise ValueError("textual overlap target must be in [0, 1]")
    K = int(n_clusters)
    V = int(vocab_size)
    width = V // (2 * K)
    if width < 2:
        raise ValueError("vocabulary too small for this many clusters")
    sigma = width / 6.0
    center = (width - 1) / 2.0
    base = np.exp(-0.5 * ((np.arange(width) - center) / sigma) ** 2)
    base /= base.sum()

    def shifted(dist_shift):
        dists = np.zeros((K, V))
        for k in range(K):
            s = k * dist_shift
            lo = int(np.floor(s))
            frac = s - lo
            dists[k, lo : lo + width] += (1.0 - frac) * base
            if frac > 0.0:
                dists[k, lo + 1 : lo + 1 + width] += frac * base
        return dists

    if K == 1:
        return shifted(0.0), 1.0

    lo_s, hi_s = 0.0, float(width)
    dists = None
    achieved = None
    for _ in range(80):
        s = 0.5 * (lo_s + hi_s)
        dists = shifted(s)
        achieved = overlap(dists)
        if abs(achieved - textual_overlap_target) <= tol * 0.5:
            break
        if achieved > textual_overlap_target:
            lo_s = s
        else:
            hi_s = s
    if textual_overlap_target >= 1.0:
        dists, achieved = shifted(0.0), 1.0
    elif textual_overlap_target <= 0.0:
        dists, achieved = shifted(float(width)), overlap(shifted(float(width)))
    return dists, float(achieved)


def generate_dataset(spec, max_retries=100, tensor=None):
    """Simulate the labelled stream and emit documents.

    Every cluster must produce at least one event; otherwise the
    simulation reruns with a fresh sub-seed (up to ``max_retries``).
    A ``tensor`` override skips the random tensor search (its overlap is
    then reported as measured, not targeted).
    """
    basis = spec.basis()
    root = np.random.SeedSequence(spec.seed)
    tensor_seed, sim_seed, token_seed = root.spawn(3)
    if tensor is None:
        tensor, achieved_temporal = generate_tensor(
            spec.n_clusters, basis, spec.temporal_overlap, tensor_seed
        )
    else:
        achieved_temporal = (
            tensor_overlap(tensor.weights, basis)
            if float(tensor.weights.sum()) > 0.0
            else 0.0
        )
    vocab, achieved_textual = generate_vocabularies(
        spec.n_clusters, spec.vocab_size, spec.textual_overlap
    )
    rates = np.full(spec.n_clusters, float(spec.immigrant_rate))

    history = None
    for _ in range(max_retries):
        history = simulate(tensor, basis, rates, spec.n_events, sim_seed)
        if len(history) == spec.n_events and (
            np.unique(history.clusters).size == spec.n_clusters
        ):
            break
        sim_seed = sim_seed.spawn(1)[0]
    else:
        raise GenerationError(
            f"simulation failed to cover all {spec.n_clusters} clusters "
            f"within {max_retries} retries"
        )

    token_rng = np.random.default_rng(token_seed)
    documents = []
    for t, label in zip(history.times, history.clusters):
        tokens = token_rng.choice(
            spec.vocab_size, size=spec.n_words, p=vocab[label]
        )
        documents.append(
            TimedDocument(ts=float(t), tokens=[int(x) for x in tokens], label=int(label))
        )
    return Dataset(
        documents=documents,
        tensor=tensor,
        vocabularies=vocab,
        basis=basis,
        spec=spec,
        achieved_textual_overlap=achieved_textual,
        achieved_temporal_overlap=achieved_temporal,
    )
