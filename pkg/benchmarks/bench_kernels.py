"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py``. Shapes mirror one
inference step at benchmark scale: 2000 candidate matrices over 4 live
clusters and a 3-component basis, with a ~150-event lookback window.
"""

import time

import numpy as np

from hawkstream import kernels

S, N_SLOTS, L, WINDOW = 2000, 4, 3, 150
REPEATS = 2000


def setup():
    rng = np.random.default_rng(0)
    return {
        "means": np.array([3.0, 7.0, 11.0]),
        "sigmas": np.array([0.5, 0.5, 0.5]),
        "horizon": 12.5,
        "dts": rng.uniform(0, 13, WINDOW),
        "slots": rng.integers(0, N_SLOTS, WINDOW).astype(np.int64),
        "vals": rng.uniform(0, 1, (WINDOW, L)),
        "cands": np.ascontiguousarray(rng.beta(2, 2, (S, N_SLOTS, L))),
        "acc": rng.normal(size=S),
        "logprior": rng.normal(size=S),
        "delta": rng.uniform(0, 0.2, (N_SLOTS, L)),
        "kappa": rng.uniform(0, 1, (N_SLOTS, L)),
        "mat": np.ascontiguousarray(rng.uniform(0, 1, (6, 6))),
    }


CALLS = {
    "kernel_values": lambda f, d: f(d["dts"], d["means"], d["sigmas"], d["horizon"]),
    "kernel_cdf": lambda f, d: f(d["dts"], d["means"], d["sigmas"], d["horizon"]),
    "label_sums": lambda f, d: f(d["vals"], d["slots"], N_SLOTS),
    "bank_compensator": lambda f, d: f(d["cands"], d["acc"].copy(), d["delta"]),
    "bank_event_term": lambda f, d: f(d["cands"], d["acc"].copy(), d["kappa"], 1e-10),
    "posterior_weights": lambda f, d: f(d["acc"], d["logprior"]),
    "weighted_rows": lambda f, d: f(
        d["cands"], np.full(S, 1.0 / S)
    ),
    "power_radius": lambda f, d: f(d["mat"], 1e-10, 100_000),
}


def bench(impls, data):
    out = {}
    for name, call in CALLS.items():
        fn = impls[name]
        call(fn, data)  # warmup / JIT
        start = time.perf_counter()
        for _ in range(REPEATS):
            call(fn, data)
        out[name] = (time.perf_counter() - start) / REPEATS
    return out


def main():
    data = setup()
    numpy_times = bench(kernels.numpy_impls(), data)
    numba = kernels.numba_impls()
    if numba is None:
        print("numba unavailable; numpy timings only")
        for name, t in numpy_times.items():
            print(f"{name:20s} numpy {t*1e6:9.1f} us")
        return
    numba_times = bench(numba, data)
    print(f"{'kernel':20s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name in CALLS:
        tn = numpy_times[name]
        tb = numba_times[name]
        print(f"{name:20s} {tn*1e6:10.1f} us {tb*1e6:10.1f} us {tn/tb:8.1f}x")


if __name__ == "__main__":
    main()
