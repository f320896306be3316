"""Random problem families used by the benchmarks.

Both generators are deterministic for a given seed and put their ground truth and raw data in
``Opr.info`` so tests and the CLI can inspect them.
"""

from __future__ import annotations

import numpy as np

from ..expr.expression import (
    constant,
    conv,
    matmul,
    matrix_product,
    sub,
    sum_squares,
    variable,
    vec,
)
from ..expr.problem import Opr, geq, leq, minimize

PROBLEMS: tuple[str, ...] = ("deconv", "sylvester")

KERNEL_FLOOR = 1e-6
SPIKES = 5
TARGET_SNR = 20.0
SYLVESTER_ASPECT = 5


def gaussian_kernel(n: int) -> np.ndarray:
    """Unit-sum Gaussian of length n and standard deviation n/10, floored at 1e-6.

    The tails fall below the floor only from n = 33 on; shorter kernels are returned unfloored.
    """
    grid = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    kernel = np.exp(-0.5 * (grid / (n / 10.0)) ** 2)
    kernel /= kernel.sum()
    return np.maximum(kernel, KERNEL_FLOOR)


def gen_deconv(n: int, seed: int) -> Opr:
    """Nonnegative deconvolution: minimize ||c * x - b||^2 subject to x >= 0.

    The signal has five spikes with heights uniform on [0, n/10]; b is the column convolution
    of the kernel with the signal plus Gaussian noise scaled to a signal-to-noise ratio near 20.
    """
    if n < 10:
        raise ValueError(f"deconvolution needs n >= 10, got {n}")
    rng = np.random.default_rng(seed)
    kernel = gaussian_kernel(n)
    x_true = np.zeros(n)
    support = rng.choice(n, size=SPIKES, replace=False)
    x_true[support] = rng.uniform(0.0, n / 10.0, size=SPIKES)

    # column convolution of a spike train: one shifted kernel per spike
    clean = np.zeros(2 * n - 1)
    for index in support:
        clean[index : index + n] += x_true[index] * kernel
    sigma = np.linalg.norm(clean) / (TARGET_SNR * np.sqrt(2 * n - 1))
    noise = sigma * rng.standard_normal(2 * n - 1)
    b = clean + noise

    x = variable("x", n)
    return minimize(
        sum_squares(sub(conv(kernel, x), constant(b))),
        [geq(x, 0.0)],
        info={
            "problem": "deconv",
            "seed": seed,
            "kernel": kernel,
            "x_true": x_true,
            "b": b,
            "snr": float(np.linalg.norm(clean) / max(np.linalg.norm(noise), 1e-300)),
        },
    )


def gen_sylvester(q: int, seed: int) -> Opr:
    """Sylvester LP: minimize Tr(D^T X) subject to A X B <= 1 1^T and X >= 0.

    X is p by q with p = 5q; A and B are folded standard normal plus 1e-6 so every entry is
    positive, D is standard normal.
    """
    if q < 2:
        raise ValueError(f"sylvester needs q >= 2, got {q}")
    rng = np.random.default_rng(seed)
    p = SYLVESTER_ASPECT * q
    left = np.abs(rng.standard_normal((p, p))) + 1e-6
    right = np.abs(rng.standard_normal((q, q))) + 1e-6
    weights = rng.standard_normal((p, q))
    bound = np.ones((p, q))

    X = variable("X", (p, q))
    trace = matmul(weights.reshape(1, -1, order="F"), vec(X))
    return minimize(
        trace,
        [leq(matrix_product(left, X, right), bound), geq(X, 0.0)],
        info={
            "problem": "sylvester",
            "seed": seed,
            "q": q,
            "A": left,
            "B": right,
            "D": weights,
        },
    )


def generate(problem: str, size: int, seed: int) -> Opr:
    if problem == "deconv":
        return gen_deconv(size, seed)
    if problem == "sylvester":
        return gen_sylvester(size, seed)
    raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")


def spike_clusters(x: np.ndarray, threshold: float) -> list[tuple[int, float]]:
    """Collapse runs of adjacent entries above ``threshold`` into single spikes.

    Each run is reported at the index of its largest entry, with the run's sum as the height.
    """
    values = np.asarray(x, dtype=np.float64).ravel()
    above = values > threshold
    spikes: list[tuple[int, float]] = []
    start = None
    for index, flag in enumerate([*above, False]):
        if flag and start is None:
            start = index
        elif not flag and start is not None:
            run = values[start:index]
            spikes.append((start + int(np.argmax(run)), float(run.sum())))
            start = None
    return spikes
