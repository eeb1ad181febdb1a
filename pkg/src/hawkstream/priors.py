"""Sequential cluster-allocation priors.

One family covers all four configurations: probability of joining an
existing cluster is its statistic raised to the power r, normalized
together with a constant concentration mass for opening a new cluster.
The statistic is a per-cluster population for the count-based kinds
(``dp``, ``up``) and a triggering intensity at the event time for the
dynamic kinds (``mpdhp``, ``pdhp``; the latter masks cross-cluster
excitation so clusters only self-stimulate).
"""

import numpy as np

PRIOR_KINDS = ("mpdhp", "pdhp", "dp", "up")

_STAT_EPS = 1e-12


class PriorConfig:
    """Validated allocation-prior settings.

    ``lambda0`` is the new-cluster intensity mass used by the dynamic
    kinds; ``alpha_dp`` the concentration for the count-based kinds. The
    exponent r is forced to 1 for ``dp`` and 0 for ``up``.
    """

    def __init__(self, kind="mpdhp", r=1.0, lambda0=0.01, alpha_dp=1.0):
        kind = str(kind).lower()
        if kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {kind!r}; one of {PRIOR_KINDS}")
        if kind == "dp":
            r = 1.0
        elif kind == "up":
            r = 0.0
        r = float(r)
        if r < 0.0:
            raise ValueError("exponent r must be >= 0")
        if lambda0 <= 0.0:
            raise ValueError("lambda0 must be positive")
        if alpha_dp <= 0.0:
            raise ValueError("alpha_dp must be positive")
        self.kind = kind
        self.r = r
        self.lambda0 = float(lambda0)
        self.alpha_dp = float(alpha_dp)

    @property
    def uses_intensity(self):
        return self.kind in ("mpdhp", "pdhp")

    @property
    def concentration(self):
        return self.lambda0 if self.uses_intensity else self.alpha_dp

    def to_config(self):
        return {
            "prior_kind": self.kind,
            "r": self.r,
            "lambda0": self.lambda0,
            "alpha_dp": self.alpha_dp,
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(
            kind=cfg.get("prior_kind", "mpdhp"),
            r=cfg.get("r", 1.0),
            lambda0=cfg.get("lambda0", 0.01),
            alpha_dp=cfg.get("alpha_dp", 1.0),
        )


def powered_statistics(config, statistics):
    """stat^r with 0^0 := 0, so vacated clusters stay dead under r = 0.

    Statistics below 1e-12 are treated as exactly zero before powering to
    avoid overflow of eps^r for r > 1.
    """
    stats = np.asarray(statistics, dtype=np.float64)
    if np.any(stats < 0.0):
        raise ValueError("cluster statistics must be non-negative")
    safe = np.where(stats < _STAT_EPS, 0.0, stats)
    if config.r == 0.0:
        return np.where(safe > 0.0, 1.0, 0.0)
    return safe**config.r


def allocation_prior(config, statistics):
    """K+1 allocation probabilities: existing clusters, then a new one.

    Entry c is stat_c^r over the normalizer; the last entry carries the
    concentration mass. Always sums to 1.
    """
    powered = powered_statistics(config, statistics)
    conc = config.concentration
    denom = conc + float(powered.sum())
    out = np.empty(powered.size + 1)
    out[:-1] = powered / denom
    out[-1] = conc / denom
    return out


def stat_source(config, t, particle):
    """(cluster ids, statistics) feeding `allocation_prior` for one event.

    Dynamic kinds ask the particle for sampled-tensor intensities at t
    (cross-cluster weights masked for ``pdhp``); count kinds report the
    per-cluster document populations.
    """
    if config.uses_intensity:
        return particle.cluster_intensities(t, univariate=config.kind == "pdhp")
    return particle.cluster_populations()
