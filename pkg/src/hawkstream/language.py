"""Collapsed Dirichlet-Multinomial document likelihood with count upkeep.

Each cluster keeps sparse token counts; the marginal likelihood of a new
bag of words given those counts is a ratio of gamma functions evaluated
entirely in log space (raw gamma ratios overflow past ~170 counts). The
pseudo-count prior is symmetric: one scalar per-word value, summing to
``V * theta`` across the vocabulary.
"""

import math


class DocumentCounts:
    """Sparse bag-of-words for one document."""

    __slots__ = ("counts", "total")

    def __init__(self, tokens=None, counts=None):
        if counts is not None:
            self.counts = {int(v): int(n) for v, n in counts.items()}
        else:
            self.counts = {}
            for tok in tokens or ():
                tok = int(tok)
                self.counts[tok] = self.counts.get(tok, 0) + 1
        if any(n <= 0 for n in self.counts.values()):
            raise ValueError("document token counts must be positive")
        self.total = sum(self.counts.values())
        if self.total < 1:
            raise ValueError("document must contain at least one token")


class ClusterWordCounts:
    """Sparse accumulated token counts of one cluster."""

    __slots__ = ("counts", "total", "vocab_size")

    def __init__(self, vocab_size):
        if vocab_size < 1:
            raise ValueError("vocabulary size must be >= 1")
        self.counts = {}
        self.total = 0
        self.vocab_size = int(vocab_size)

    def add_document(self, doc):
        for v, n in doc.counts.items():
            if not (0 <= v < self.vocab_size):
                raise ValueError(f"token id {v} outside vocabulary")
            self.counts[v] = self.counts.get(v, 0) + n
        self.total += doc.total
        return self

    def remove_document(self, doc):
        for v, n in doc.counts.items():
            cur = self.counts.get(v, 0) - n
            if cur < 0:
                raise ValueError(
                    f"removing document would drive count of token {v} negative"
                )
            if cur == 0:
                del self.counts[v]
            else:
                self.counts[v] = cur
        self.total -= doc.total
        return self

    def top_words(self, k=10):
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def doc_log_likelihood(cluster, doc, theta_word):
    """Log marginal of the document's tokens given the cluster's counts.

    theta_word is the symmetric per-word pseudo-count; the aggregate prior
    mass is vocab_size * theta_word. An empty cluster scores with all
    counts at zero.
    """
    if theta_word <= 0.0:
        raise ValueError("theta_word must be positive")
    theta_total = cluster.vocab_size * theta_word
    out = math.lgamma(cluster.total + theta_total)
    out -= math.lgamma(cluster.total + doc.total + theta_total)
    get = cluster.counts.get
    for v, n in doc.counts.items():
        base = get(v, 0) + theta_word
        out += math.lgamma(base + n) - math.lgamma(base)
    return out
