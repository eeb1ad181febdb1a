"""Sequential Monte Carlo engine: online joint inference of cluster
assignments and their triggering weights.

Each particle carries one assignment hypothesis: per-cluster word counts,
the labelled event history, and a bank of candidate weight matrices per
live cluster whose running log-likelihoods are updated incrementally at
every event (compensator increments for every live cluster, an event term
for the assigned one). Cluster allocation scores multiply the temporal
allocation prior with the collapsed text likelihood; particles are
reweighted by their per-document marginal evidence and low-weight ones are
replaced by copies of plausible ones.

Clusters whose last event has aged past the kernel horizon can never again
be selected by the intensity-based priors: their candidate rows are frozen
at the posterior mean and dropped from the active computation, which keeps
the per-event cost bounded by the number of *coexisting* clusters rather
than the stream length. Under the count-based priors a silent cluster can
be revisited; it is then re-opened with a fresh candidate bank.
"""

import logging
import math

import numpy as np

from . import kernels
from .hawkes import RATE_FLOOR, InfluenceTensor, windowed_channel_loglik
from .language import ClusterWordCounts, DocumentCounts, doc_log_likelihood
from .priors import PriorConfig, allocation_prior

logger = logging.getLogger(__name__)

_BETA_CLIP = 1e-12


class SMCConfig:
    """Engine settings; defaults are the synthetic-benchmark values."""

    def __init__(
        self,
        prior=None,
        basis=None,
        vocab_size=1000,
        theta_word=0.01,
        n_particles=10,
        n_samples=2000,
        beta0=2.0,
        omega_thres=None,
        seed=0,
        rate_floor=RATE_FLOOR,
        mask_cross_excitation=False,
        track_dynamics=True,
        validate_every=0,
    ):
        from .temporal import KernelBasis

        self.prior = prior if prior is not None else PriorConfig()
        self.basis = (
            basis
            if basis is not None
            else KernelBasis([3.0, 7.0, 11.0], [0.5, 0.5, 0.5])
        )
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if n_particles < 1 or n_samples < 1:
            raise ValueError("n_particles and n_samples must be >= 1")
        if beta0 <= 0.0:
            raise ValueError("beta0 must be positive")
        self.vocab_size = int(vocab_size)
        self.theta_word = float(theta_word)
        self.n_particles = int(n_particles)
        self.n_samples = int(n_samples)
        self.beta0 = float(beta0)
        self.omega_thres = (
            float(omega_thres)
            if omega_thres is not None
            else 1.0 / (2.0 * self.n_particles)
        )
        self.seed = seed
        self.rate_floor = float(rate_floor)
        # the univariate prior kind is exactly the masked engine
        self.mask_cross_excitation = bool(
            mask_cross_excitation or self.prior.kind == "pdhp"
        )
        # candidate banks never influence count-based allocation; they may
        # be switched off when the fitted tensors are not needed
        self.track_dynamics = bool(track_dynamics) or self.prior.uses_intensity
        self.validate_every = int(validate_every)


class _GrowArray:
    """Append-only float64/int64 buffer with amortized growth."""

    def __init__(self, dtype):
        self._buf = np.empty(1024, dtype=dtype)
        self._n = 0

    def append(self, value):
        if self._n == self._buf.size:
            grown = np.empty(self._buf.size * 2, dtype=self._buf.dtype)
            grown[: self._n] = self._buf
            self._buf = grown
        self._buf[self._n] = value
        self._n += 1

    def view(self):
        return self._buf[: self._n]

    def __len__(self):
        return self._n

    def copy(self):
        dup = _GrowArray(self._buf.dtype)
        dup._buf = self._buf.copy()
        dup._n = self._n
        return dup


class CandidateBank:
    """Candidate weight matrices and their running log-likelihoods.

    ``cands`` has shape (S, n_slots, L); slot order is the particle-wide
    ordering of live clusters. ``frozen`` maps the ids of dead source
    clusters to the L-vector their row was frozen at.
    """

    __slots__ = (
        "cands",
        "acc",
        "logprior",
        "frozen",
        "birth_time",
        "version",
        "_sample",
        "_sample_version",
    )

    def __init__(self, cands, logprior, birth_time):
        self.cands = cands
        self.acc = np.zeros(cands.shape[0])
        self.logprior = logprior
        self.frozen = {}
        self.birth_time = birth_time
        self.version = 0
        self._sample = None
        self._sample_version = -1

    def copy(self):
        dup = CandidateBank.__new__(CandidateBank)
        dup.cands = self.cands.copy()
        dup.acc = self.acc.copy()
        dup.logprior = self.logprior.copy()
        dup.frozen = dict(self.frozen)
        dup.birth_time = self.birth_time
        dup.version = self.version
        dup._sample = None if self._sample is None else self._sample.copy()
        dup._sample_version = self._sample_version
        return dup


def sample_tensor(bank):
    """Posterior-mean candidate matrix of one bank, shape (n_slots, L).

    Candidates are averaged with weights proportional to
    exp(accumulator) * prior density, log-sum-exp normalized; if every
    weight underflows the average falls back to uniform with a warning.
    Frozen rows are not part of the slot axis and pass through unchanged
    on the bank itself.
    """
    if bank.version != bank._sample_version:
        w, degenerate = kernels.posterior_weights(bank.acc, bank.logprior)
        if degenerate:
            logger.warning(
                "all candidate weights underflowed; using uniform average"
            )
        bank._sample = kernels.weighted_rows(bank.cands, w)
        bank._sample_version = bank.version
    return bank._sample


class _ClusterRecord:
    __slots__ = ("words", "birth_t", "last_t", "n_docs", "alive")

    def __init__(self, vocab_size, t):
        self.words = ClusterWordCounts(vocab_size)
        self.birth_t = t
        self.last_t = t
        self.n_docs = 0
        self.alive = True

    def copy(self):
        dup = _ClusterRecord.__new__(_ClusterRecord)
        words = ClusterWordCounts(self.words.vocab_size)
        words.counts = dict(self.words.counts)
        words.total = self.words.total
        dup.words = words
        dup.birth_t = self.birth_t
        dup.last_t = self.last_t
        dup.n_docs = self.n_docs
        dup.alive = self.alive
        return dup


class Particle:
    """One SMC hypothesis: assignments, cluster states, candidate banks."""

    def __init__(self, rng, engine):
        self.rng = rng
        self.engine = engine
        self.labels = _GrowArray(np.int64)
        self.slot_ids = []
        self.id2slot = np.full(16, -1, dtype=np.int64)
        self.records = {}
        self.banks = {}
        self.final_rows = {}
        self.next_cluster_id = 0
        self.log_weight = 0.0

    # -- bookkeeping -------------------------------------------------------

    def _ensure_id_capacity(self, cid):
        if cid >= self.id2slot.size:
            grown = np.full(max(self.id2slot.size * 2, cid + 1), -1, dtype=np.int64)
            grown[: self.id2slot.size] = self.id2slot
            self.id2slot = grown

    def _row_logprior(self, rows):
        cfg = self.engine.config
        b0 = cfg.beta0
        lnbeta = 2.0 * math.lgamma(b0) - math.lgamma(2.0 * b0)
        per_entry = (b0 - 1.0) * (np.log(rows) + np.log1p(-rows))
        n_entries = rows.shape[1] * rows.shape[2]
        return per_entry.sum(axis=(1, 2)) - n_entries * lnbeta

    def _draw_rows(self, n_rows):
        cfg = self.engine.config
        rows = self.rng.beta(cfg.beta0, cfg.beta0, size=(cfg.n_samples, n_rows, cfg.basis.L))
        np.clip(rows, _BETA_CLIP, 1.0 - _BETA_CLIP, out=rows)
        return np.ascontiguousarray(rows)

    def open_cluster(self, t):
        """Allocate the next id and create its state; ids are never reused."""
        cid = self.next_cluster_id
        self.next_cluster_id += 1
        self._ensure_id_capacity(cid)
        self.records[cid] = _ClusterRecord(self.engine.config.vocab_size, t)
        self._activate(cid, t)
        return cid

    def reopen_cluster(self, cid, t):
        """Re-activate a silent cluster chosen by a count-based prior."""
        rec = self.records[cid]
        rec.alive = True
        rec.birth_t = t
        self.final_rows.pop(cid, None)
        self._activate(cid, t)

    def _activate(self, cid, t):
        if not self.engine.config.track_dynamics:
            return
        # existing banks get a fresh prior row for the new source
        for bank in self.banks.values():
            new_rows = self._draw_rows(1)
            bank.cands = np.ascontiguousarray(
                np.concatenate([bank.cands, new_rows], axis=1)
            )
            bank.logprior = bank.logprior + self._row_logprior(new_rows)
            bank.version += 1
        self.slot_ids.append(cid)
        self.id2slot[cid] = len(self.slot_ids) - 1
        cands = self._draw_rows(len(self.slot_ids))
        self.banks[cid] = CandidateBank(cands, self._row_logprior(cands), t)

    def freeze_cluster(self, cid):
        """Freeze cid's rows everywhere and drop it from active computation."""
        slot = int(self.id2slot[cid])
        rows = {}
        live_sample = sample_tensor(self.banks[cid])
        for j, sid in enumerate(self.slot_ids):
            rows[sid] = np.array(live_sample[j])
        rows.update(
            {sid: np.array(v) for sid, v in self.banks[cid].frozen.items()}
        )
        self.final_rows[cid] = rows

        for tid, bank in self.banks.items():
            if tid == cid:
                continue
            sampled = sample_tensor(bank)
            bank.frozen[cid] = np.array(sampled[slot])
            bank.logprior = bank.logprior - self._row_logprior(
                bank.cands[:, slot : slot + 1, :]
            )
            bank.cands = np.ascontiguousarray(np.delete(bank.cands, slot, axis=1))
            bank.version += 1
        del self.banks[cid]
        self.slot_ids.pop(slot)
        self.id2slot[cid] = -1
        for j in range(slot, len(self.slot_ids)):
            self.id2slot[self.slot_ids[j]] = j
        self.records[cid].alive = False

    # -- statistics --------------------------------------------------------

    def live_intensities(self, kappa_by_slot, univariate):
        """Sampled-tensor intensity of each live cluster, slot order."""
        out = np.zeros(len(self.slot_ids))
        for j, cid in enumerate(self.slot_ids):
            sampled = sample_tensor(self.banks[cid])
            if univariate:
                out[j] = float(sampled[j] @ kappa_by_slot[j])
            else:
                out[j] = float(np.sum(sampled * kappa_by_slot))
        return out

    def cluster_intensities(self, t, univariate=False):
        """(ids, intensities) computed from scratch at time t."""
        times = self.engine._times.view()
        labels = self.labels.view()
        horizon = self.engine.config.basis.horizon
        lo = int(np.searchsorted(times, t - horizon, side="left"))
        hi = int(np.searchsorted(times, t, side="left"))
        kappa = self._kappa_by_slot(times[lo:hi], labels[lo:hi], t)
        return list(self.slot_ids), self.live_intensities(kappa, univariate)

    def cluster_populations(self):
        """(ids, document counts) over every cluster ever opened."""
        ids = sorted(self.records)
        return ids, np.array(
            [self.records[c].n_docs for c in ids], dtype=np.float64
        )

    def _kappa_by_slot(self, times, labels, t):
        basis = self.engine.config.basis
        if times.size == 0:
            return np.zeros((len(self.slot_ids), basis.L))
        vals = kernels.kernel_values(t - times, basis.means, basis.sigmas, basis.horizon)
        slots = self.id2slot[labels]
        return kernels.label_sums(vals, slots, len(self.slot_ids))

    # -- copying -----------------------------------------------------------

    def copy(self, rng):
        dup = Particle.__new__(Particle)
        dup.rng = rng
        dup.engine = self.engine
        dup.labels = self.labels.copy()
        dup.slot_ids = list(self.slot_ids)
        dup.id2slot = self.id2slot.copy()
        dup.records = {cid: rec.copy() for cid, rec in self.records.items()}
        dup.banks = {cid: bank.copy() for cid, bank in self.banks.items()}
        dup.final_rows = {
            cid: {sid: np.array(v) for sid, v in rows.items()}
            for cid, rows in self.final_rows.items()
        }
        dup.next_cluster_id = self.next_cluster_id
        dup.log_weight = self.log_weight
        return dup


class SMCEngine:
    """Streaming driver: feed events in time order, read back the result."""

    def __init__(self, config):
        self.config = config
        self._seed_seq = np.random.SeedSequence(config.seed)
        children = self._seed_seq.spawn(config.n_particles + 1)
        self._master_rng = np.random.default_rng(children[0])
        self.particles = [
            Particle(np.random.default_rng(children[i + 1]), self)
            for i in range(config.n_particles)
        ]
        for p in self.particles:
            p.log_weight = -math.log(config.n_particles)
        self._times = _GrowArray(np.float64)
        self._lo = 0
        self._n_events = 0
        self.trace = []

    # -- helpers -----------------------------------------------------------

    def best_particle(self):
        weights = [p.log_weight for p in self.particles]
        return self.particles[int(np.argmax(weights))]

    def _freeze_dead(self, particle, now):
        horizon = self.config.basis.horizon
        for cid in [c for c in particle.slot_ids]:
            if now - particle.records[cid].last_t > horizon:
                particle.freeze_cluster(cid)

    def freeze_and_prune(self, particle, now):
        """Freeze every cluster silent for longer than the horizon.

        Also invoked internally at every event; calling it twice with no
        intervening events is a no-op.
        """
        self._freeze_dead(particle, now)
        return particle

    # -- main step ---------------------------------------------------------

    def process_event(self, t, tokens):
        """Advance every particle by one document; returns assignments."""
        cfg = self.config
        basis = cfg.basis
        times = self._times.view()
        n = self._n_events
        if n > 0:
            prev_t = float(times[n - 1])
            if t < prev_t:
                raise ValueError(f"event time {t} precedes previous {prev_t}")
            if t <= prev_t:
                t = prev_t + 1e-6
        else:
            prev_t = 0.0
        t = float(t)
        doc = DocumentCounts(tokens)

        lo_prev = self._lo
        window_t = times[lo_prev:n]
        if window_t.size:
            d_hi = kernels.kernel_cdf(t - window_t, basis.means, basis.sigmas, basis.horizon)
            d_lo = kernels.kernel_cdf(
                prev_t - window_t, basis.means, basis.sigmas, basis.horizon
            )
            delta_shared = d_hi - d_lo
        else:
            delta_shared = None

        lo = lo_prev
        while lo < n and t - float(times[lo]) > basis.horizon:
            lo += 1
        self._lo = lo
        kappa_t = times[lo:n]
        kappa_shared = (
            kernels.kernel_values(t - kappa_t, basis.means, basis.sigmas, basis.horizon)
            if kappa_t.size
            else None
        )

        assignments = []
        evidences = np.empty(cfg.n_particles)
        entropies = np.empty(cfg.n_particles)
        empty = ClusterWordCounts(cfg.vocab_size)
        empty_ll = doc_log_likelihood(empty, doc, cfg.theta_word)
        for pi, particle in enumerate(self.particles):
            scores, cand_ids, kappa_by_slot = self._score_event(
                particle, t, doc, empty_ll, delta_shared, kappa_shared, lo_prev, lo, n
            )
            m = float(np.max(scores))
            probs = np.exp(scores - m)
            z = float(probs.sum())
            probs /= z
            evidences[pi] = m + math.log(z)
            entropies[pi] = float(-np.sum(probs * np.log(probs)))
            u = particle.rng.random()
            idx = int(np.searchsorted(np.cumsum(probs), u, side="left"))
            idx = min(idx, len(cand_ids))
            if idx == len(cand_ids):
                chosen = particle.open_cluster(t)
                born = True
            else:
                chosen = cand_ids[idx]
                if not particle.records[chosen].alive:
                    particle.reopen_cluster(chosen, t)
                    born = True
                else:
                    born = False
            self._apply_assignment(
                particle, chosen, born, t, doc, kappa_by_slot
            )
            assignments.append(chosen)

        self._times.append(t)
        self._n_events += 1
        parents = self._reweight_and_resample(evidences)
        entropies = entropies[parents]

        best = int(np.argmax([p.log_weight for p in self.particles]))
        best_label = int(self.particles[best].labels.view()[-1])
        self.trace.append((self._n_events - 1, best_label, float(entropies[best])))

        if cfg.validate_every and self._n_events % cfg.validate_every == 0:
            self._validate_banks()
        return assignments

    def _score_event(
        self, particle, t, doc, empty_ll, delta_shared, kappa_shared, lo_prev, lo, n
    ):
        cfg = self.config
        labels = particle.labels.view()

        if delta_shared is not None and particle.banks:
            slots_prev = particle.id2slot[labels[lo_prev:n]]
            delta = kernels.label_sums(
                delta_shared, slots_prev, len(particle.slot_ids)
            )
            for cid, bank in particle.banks.items():
                d = delta
                if cfg.mask_cross_excitation:
                    d = np.zeros_like(delta)
                    j = int(particle.id2slot[cid])
                    d[j] = delta[j]
                kernels.bank_compensator(bank.cands, bank.acc, d)
                bank.version += 1

        self._freeze_dead(particle, t)

        if kappa_shared is not None and len(particle.slot_ids):
            slots_now = particle.id2slot[labels[lo:n]]
            kappa_by_slot = kernels.label_sums(
                kappa_shared, slots_now, len(particle.slot_ids)
            )
        else:
            kappa_by_slot = np.zeros((len(particle.slot_ids), cfg.basis.L))

        if cfg.prior.uses_intensity:
            cand_ids = list(particle.slot_ids)
            stats = particle.live_intensities(
                kappa_by_slot, cfg.mask_cross_excitation
            )
        else:
            cand_ids, stats = particle.cluster_populations()

        prior = allocation_prior(cfg.prior, stats)
        keep = prior[:-1] > 0.0
        cand_ids = [cid for cid, k in zip(cand_ids, keep) if k]

        scores = np.empty(len(cand_ids) + 1)
        for i, cid in enumerate(cand_ids):
            scores[i] = doc_log_likelihood(
                particle.records[cid].words, doc, cfg.theta_word
            )
        scores[-1] = empty_ll
        with np.errstate(divide="ignore"):
            scores[:-1] += np.log(prior[:-1][keep])
            scores[-1] += math.log(prior[-1])
        return scores, cand_ids, kappa_by_slot

    def _apply_assignment(self, particle, cid, born, t, doc, kappa_by_slot):
        cfg = self.config
        rec = particle.records[cid]
        rec.words.add_document(doc)
        rec.n_docs += 1
        rec.last_t = t
        if not born and cfg.track_dynamics:
            bank = particle.banks[cid]
            kappa = kappa_by_slot
            if cfg.mask_cross_excitation:
                kappa = np.zeros_like(kappa_by_slot)
                j = int(particle.id2slot[cid])
                kappa[j] = kappa_by_slot[j]
            kernels.bank_event_term(bank.cands, bank.acc, kappa, cfg.rate_floor)
            bank.version += 1
        particle.labels.append(cid)

    def _reweight_and_resample(self, evidences):
        """Multiply weights by per-document evidence, replace weak particles.

        Returns the parent index of each post-step particle (identity for
        survivors), so per-particle diagnostics can follow the genealogy.
        """
        cfg = self.config
        logw = np.array([p.log_weight for p in self.particles]) + evidences
        logw -= _logsumexp(logw)
        parents = np.arange(cfg.n_particles)
        cutoff = float(np.max(logw)) + math.log(cfg.omega_thres)
        discard = np.nonzero(logw < cutoff)[0]
        if discard.size:
            probs = np.exp(logw)
            cum = np.cumsum(probs)
            for i in discard:
                parent = int(
                    np.searchsorted(cum, self._master_rng.random() * cum[-1])
                )
                parent = min(parent, len(self.particles) - 1)
                child_rng = np.random.default_rng(self._seed_seq.spawn(1)[0])
                self.particles[i] = self.particles[parent].copy(child_rng)
                parents[i] = parent
            logw = np.full(cfg.n_particles, -math.log(cfg.n_particles))
        for p, lw in zip(self.particles, logw):
            p.log_weight = float(lw)
        return parents

    # -- validation & results ----------------------------------------------

    def _validate_banks(self, atol=1e-8):
        """Cross-check accumulators against a direct windowed recompute.

        Only banks whose target never saw a source freeze can be rebuilt
        from their current candidate matrices; others are skipped.
        """
        times = self._times.view()
        cfg = self.config
        for particle in self.particles:
            labels = particle.labels.view()
            for cid, bank in particle.banks.items():
                if bank.frozen:
                    continue
                idx = self._n_events % bank.cands.shape[0]
                row = bank.cands[idx]
                if cfg.mask_cross_excitation:
                    keep = int(particle.id2slot[cid])
                    row = np.zeros_like(row)
                    row[keep] = bank.cands[idx][keep]
                expect = windowed_channel_loglik(
                    row,
                    list(particle.slot_ids),
                    cfg.basis,
                    times,
                    labels,
                    cid,
                    bank.birth_time,
                    float(times[-1]),
                    floor=cfg.rate_floor,
                )
                got = float(bank.acc[idx])
                if abs(got - expect) > atol * max(1.0, abs(expect)):
                    raise AssertionError(
                        f"bank accumulator drift for cluster {cid}: "
                        f"incremental {got} vs batch {expect}"
                    )

    def sampled_rows(self, particle, cid):
        """Current tensor rows of one cluster: {source id: L-vector}."""
        if cid in particle.banks:
            sampled = sample_tensor(particle.banks[cid])
            rows = {
                sid: np.array(sampled[j])
                for j, sid in enumerate(particle.slot_ids)
            }
            rows.update(
                {s: np.array(v) for s, v in particle.banks[cid].frozen.items()}
            )
            return rows
        return particle.final_rows.get(cid, {})

    def final_tensor(self, particle=None):
        """Assembled influence tensor over every cluster the particle opened."""
        particle = particle if particle is not None else self.best_particle()
        ids = sorted(particle.records)
        K = len(ids)
        pos = {cid: i for i, cid in enumerate(ids)}
        weights = np.zeros((K, K, self.config.basis.L))
        for cid in ids:
            for sid, row in self.sampled_rows(particle, cid).items():
                weights[pos[cid], pos[sid]] = row
        return InfluenceTensor(weights, ids)

    def run(self, events, progress=None):
        """Process an iterable of (timestamp, tokens) pairs."""
        for i, (t, tokens) in enumerate(events):
            self.process_event(t, tokens)
            if progress and (i + 1) % progress == 0:
                logger.info("processed %d events", i + 1)
        return self


def _logsumexp(x):
    m = float(np.max(x))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(x - m))))
