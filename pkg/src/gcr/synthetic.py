"""Planted-subspace test functions with their samplers and noise model.

Each example is a multi-index model ``f(x) = g(Phi^T x)``. Responses get
Gaussian noise whose standard deviation is ``p%`` of the root mean square
of the noiseless values on the drawn sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .dataset import Dataset, Truth
from .geometry import check_basis

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ExampleSpec:
    id: str
    D: int
    d: int
    phi: np.ndarray
    g: Callable[[np.ndarray], np.ndarray]  # (m, d) -> (m,)
    f: Callable[[np.ndarray], np.ndarray]  # (m, D) -> (m,)
    sampler: str  # "uniform_cube" or "nonelliptical_quadrant"
    bounds: Tuple[float, float] = (-1.0, 1.0)


@dataclass(frozen=True)
class NoiseSpec:
    percent: float = 0.0
    seed: Optional[int] = None  # None draws noise from the sampling stream

    def __post_init__(self):
        if self.percent < 0:
            raise ValueError("noise percent must be nonnegative")


def _e(D, *idx):
    v = np.zeros(D)
    v[list(idx)] = 1.0
    return v


def _phi_v1_v23(D=10):
    return np.column_stack([_e(D, 0), _e(D, 1, 2) / SQRT2])


def _build_examples():
    ex = {}
    ex["1"] = ExampleSpec(
        "1", 2, 1, _e(2, 0)[:, None],
        g=lambda z: z[:, 0] ** 2,
        f=lambda x: x[:, 0] ** 2,
        sampler="nonelliptical_quadrant",
        bounds=(-0.5, 0.5),
    )
    phi2 = (_e(10, 0, 1) / SQRT2)[:, None]
    ex["2a"] = ExampleSpec(
        "2a", 10, 1, phi2,
        g=lambda z: (z[:, 0] / SQRT2) ** 3,
        f=lambda x: ((x[:, 0] + x[:, 1]) / 2) ** 3,
        sampler="uniform_cube",
    )
    ex["2b"] = ExampleSpec(
        "2b", 10, 1, phi2,
        g=lambda z: np.exp(z[:, 0] / SQRT2),
        f=lambda x: np.exp((x[:, 0] + x[:, 1]) / 2),
        sampler="uniform_cube",
    )
    v1 = np.zeros(10)
    v1[:9] = 1.0 / 3.0
    ex["3"] = ExampleSpec(
        "3", 10, 2, np.column_stack([v1, _e(10, 9)]),
        g=lambda z: np.sin(-np.pi / 2 + np.pi / 2 * z[:, 0]) + z[:, 1],
        f=lambda x: np.sin(-np.pi / 2 + np.pi / 6 * x[:, :9].sum(axis=1)) + x[:, 9],
        sampler="uniform_cube",
    )
    ex["4"] = ExampleSpec(
        "4", 10, 2, _phi_v1_v23(),
        g=lambda z: z[:, 0] ** 2 + 2 * z[:, 1] ** 2,
        f=lambda x: x[:, 0] ** 2 + (x[:, 1] + x[:, 2]) ** 2,
        sampler="uniform_cube",
    )
    # with z2 = (x2 + x3)/sqrt(2), 2 (x2 + x3)^2 = 4 z2^2
    ex["5"] = ExampleSpec(
        "5", 10, 2, _phi_v1_v23(),
        g=lambda z: 10 * np.sin(np.pi / 5 * (z[:, 0] + 4 * z[:, 1] ** 2)),
        f=lambda x: 10 * np.sin(np.pi / 5 * (x[:, 0] + 2 * (x[:, 1] + x[:, 2]) ** 2)),
        sampler="uniform_cube",
    )
    ex["6"] = ExampleSpec(
        "6", 10, 2, _phi_v1_v23(),
        g=lambda z: 4 * z[:, 0] ** 2 * z[:, 1] ** 2,
        f=lambda x: 2 * x[:, 0] ** 2 * (x[:, 1] + x[:, 2]) ** 2,
        sampler="uniform_cube",
    )
    for spec in ex.values():
        check_basis(spec.phi)
    return ex


EXAMPLES = _build_examples()
EXAMPLE_IDS = tuple(EXAMPLES)


def get_example(example_id) -> ExampleSpec:
    key = str(example_id).lower()
    if key not in EXAMPLES:
        raise KeyError(f"unknown example id {example_id!r}; valid ids: {', '.join(EXAMPLE_IDS)}")
    return EXAMPLES[key]


def sample_nonelliptical(n: int, rng) -> np.ndarray:
    """Uniform points on ``[-0.5, 0.5]^2`` with the quadrant ``x1 > 0, x2 < 0`` removed."""
    rng = np.random.default_rng(rng)
    out = np.empty((0, 2))
    while out.shape[0] < n:
        need = n - out.shape[0]
        cand = rng.uniform(-0.5, 0.5, size=(int(need * 4 / 3) + 16, 2))
        keep = ~((cand[:, 0] > 0) & (cand[:, 1] < 0))
        out = np.vstack([out, cand[keep]])
    return out[:n]


def noise_sigma(f_values, percent: float) -> float:
    f_values = np.asarray(f_values, dtype=float)
    return percent / 100.0 * float(np.sqrt(np.mean(f_values ** 2)))


def sample_inputs(spec: ExampleSpec, n: int, rng) -> np.ndarray:
    if spec.sampler == "nonelliptical_quadrant":
        return sample_nonelliptical(n, rng)
    lo, hi = spec.bounds
    return rng.uniform(lo, hi, size=(n, spec.D))


def make_example(example_id, n: int, noise=0.0, seed: int = 0) -> Dataset:
    """Draw ``n`` samples of an example with planted truth attached.

    ``noise`` is a percent or a :class:`NoiseSpec`. Inputs and noise come
    from one ``numpy`` PCG64 stream seeded by ``seed`` unless the NoiseSpec
    carries its own seed.
    """
    spec = get_example(example_id)
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(float(noise))
    rng = np.random.default_rng(seed)
    X = sample_inputs(spec, n, rng)
    f_values = spec.f(X)
    y = f_values.copy()
    if noise.percent > 0:
        sigma = noise_sigma(f_values, noise.percent)
        noise_rng = rng if noise.seed is None else np.random.default_rng(noise.seed)
        y = f_values + sigma * noise_rng.standard_normal(n)
    truth = Truth(spec.phi, spec.d, f_values, example_id=spec.id, seed=seed, g=spec.g)
    return Dataset(X, y, truth)
