import numpy as np
import pytest
from scipy.stats import chisquare

from hawkstream.evaluation import overlap
from hawkstream.hawkes import InfluenceTensor, spectral_radius
from hawkstream.synthetic import (
    GenerationError,
    GenerationSpec,
    generate_dataset,
    generate_tensor,
    generate_vocabularies,
    tensor_overlap,
)
from hawkstream.temporal import KernelBasis

BASIS = KernelBasis([3.0, 7.0, 11.0], [0.5, 0.5, 0.5])


def overlap_oracle(dists):
    """Direct loop evaluation of the shared-area measure on histograms."""
    n = len(dists)
    shared = 0.0
    total = 0.0
    for i in range(n):
        others = np.max(np.delete(dists, i, axis=0), axis=0)
        shared += np.minimum(dists[i], others).sum()
        total += dists[i].sum()
    return shared / total


class TestGenerateTensor:
    def test_single_cluster_normalization(self):
        tensor, achieved = generate_tensor(1, BASIS, 0.0, seed=0)
        np.testing.assert_allclose(tensor.weights.sum(), 1.0, atol=1e-9)
        assert achieved == 0.0

    def test_spectral_radius_one(self):
        for target in (0.0, 0.5, 0.8):
            tensor, _ = generate_tensor(2, BASIS, target, seed=1)
            np.testing.assert_allclose(
                spectral_radius(tensor), 1.0, atol=1e-9
            )

    def test_low_target_with_separated_slots(self):
        tensor, achieved = generate_tensor(2, BASIS, 0.0, seed=2)
        assert achieved <= 0.05
        measured = tensor_overlap(tensor.weights, BASIS)
        assert measured <= 0.051

    def test_targets_across_range(self):
        for target in (0.2, 0.5, 0.9):
            _, achieved = generate_tensor(2, BASIS, target, seed=3)
            assert abs(achieved - target) <= 0.05

    def test_many_clusters_reach_zero_via_sparse_pairs(self):
        # 16 pairwise functions fit a 3-bump basis only by zeroing most
        # pairs; the contract is the measured overlap, which this satisfies
        _, achieved = generate_tensor(4, BASIS, 0.0, seed=4)
        assert achieved <= 0.05

    def test_unreachable_target_reports_nearest(self):
        # a single triggering function has overlap 0 by definition
        with pytest.raises(GenerationError, match="nearest achieved"):
            generate_tensor(1, BASIS, 0.9, seed=4)


class TestGenerateVocabularies:
    def test_identical_at_full_overlap(self):
        dists, achieved = generate_vocabularies(3, 999, 1.0)
        assert achieved == 1.0
        for k in range(1, 3):
            np.testing.assert_array_equal(dists[0], dists[k])

    def test_disjoint_at_zero(self):
        dists, achieved = generate_vocabularies(2, 1000, 0.0)
        assert achieved <= 0.01
        assert overlap_oracle(dists) <= 0.01

    def test_half_overlap_bisection(self):
        dists, achieved = generate_vocabularies(2, 1000, 0.5)
        assert abs(achieved - 0.5) <= 0.01
        assert abs(overlap_oracle(dists) - 0.5) <= 0.011

    def test_normalized_distributions(self):
        for K in (2, 3, 5):
            dists, _ = generate_vocabularies(K, 1000, 0.3)
            np.testing.assert_allclose(dists.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(dists >= 0)

    def test_matches_library_overlap(self):
        dists, achieved = generate_vocabularies(2, 500, 0.4)
        np.testing.assert_allclose(overlap(dists), achieved, atol=1e-9)


class TestGenerateDataset:
    @pytest.fixture(scope="class")
    def default_dataset(self):
        return generate_dataset(GenerationSpec(seed=11))

    def test_default_shape(self, default_dataset):
        ds = default_dataset
        assert len(ds.documents) == 5000
        assert all(len(d.tokens) == 20 for d in ds.documents)
        assert all(0 <= t < 1000 for d in ds.documents for t in d.tokens)

    def test_labels_cover_clusters(self, default_dataset):
        labels = np.array(default_dataset.labels())
        assert set(np.unique(labels)) == {0, 1}

    def test_times_strictly_increasing(self, default_dataset):
        times = np.array([d.ts for d in default_dataset.documents])
        assert np.all(np.diff(times) > 0)

    def test_achieved_overlaps_within_tolerance(self, default_dataset):
        ds = default_dataset
        assert abs(ds.achieved_textual_overlap - ds.spec.textual_overlap) <= 0.05
        assert abs(ds.achieved_temporal_overlap - ds.spec.temporal_overlap) <= 0.05

    def test_empirical_histogram_overlap(self, default_dataset):
        ds = default_dataset
        K = ds.spec.n_clusters
        emp = np.zeros((K, ds.spec.vocab_size))
        for d in ds.documents:
            for tok in d.tokens:
                emp[d.label, tok] += 1
        emp /= emp.sum(axis=1, keepdims=True)
        assert abs(overlap(emp) - ds.spec.textual_overlap) <= 0.05

    def test_determinism(self):
        spec = GenerationSpec(n_events=300, seed=21)
        a = generate_dataset(spec)
        b = generate_dataset(spec)
        assert [(d.ts, d.tokens, d.label) for d in a.documents] == [
            (d.ts, d.tokens, d.label) for d in b.documents
        ]

    def test_zero_tensor_immigrant_marginals(self):
        spec = GenerationSpec(n_events=5000, textual_overlap=0.0, seed=31)
        zero = InfluenceTensor(np.zeros((2, 2, 3)))
        ds = generate_dataset(spec, tensor=zero)
        labels = np.array(ds.labels())
        # immigrant channels have equal rates: labels split evenly
        counts = np.bincount(labels, minlength=2)
        assert chisquare(counts).pvalue > 0.01
        # token marginals per cluster follow the emitting distribution
        for k in range(2):
            emp = np.zeros(ds.spec.vocab_size)
            for d in ds.documents:
                if d.label == k:
                    for tok in d.tokens:
                        emp[tok] += 1
            expected = ds.vocabularies[k] * emp.sum()
            mask = expected >= 5
            scale = emp[mask].sum() / expected[mask].sum()
            assert chisquare(emp[mask], expected[mask] * scale).pvalue > 0.01

    def test_manifest_roundtrip(self, default_dataset):
        manifest = default_dataset.manifest()
        assert manifest["spec"]["n_clusters"] == 2
        assert manifest["spec"]["vocab_size"] == 1000
        tensor, basis = InfluenceTensor.from_json_dict(manifest["tensor"])
        np.testing.assert_allclose(spectral_radius(tensor), 1.0, atol=1e-9)
        assert basis == default_dataset.basis
