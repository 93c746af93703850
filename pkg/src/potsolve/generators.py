"""Synthetic instance generators for the experiment harness.

Both generators draw from numpy's seeded PCG64 stream, so a fixed seed
reproduces instances bit for bit across platforms.  The squared-distance
cost on the bin line is divided by its maximum entry, giving max(C) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PotProblem, validate_problem

__all__ = ["GeneratorSpec", "gen_gaussian_mixture", "gen_random_histogram", "generate"]


@dataclass
class GeneratorSpec:
    kind: str  # gaussian_mixture | random_histogram
    n: int
    mass_r: float = 5.0
    mass_c: float = 3.0
    s_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.mass_r <= 0 or self.mass_c <= 0:
            raise ValueError("marginal masses must be positive")
        if not 0.0 <= self.s_fraction <= 1.0:
            raise ValueError("s_fraction must lie in [0, 1]")
        if self.kind not in ("gaussian_mixture", "random_histogram"):
            raise ValueError(f"unknown generator kind {self.kind!r}")


def _squared_distance_cost(n: int) -> np.ndarray:
    i = np.arange(n, dtype=np.float64)
    C = (i[:, None] - i[None, :]) ** 2
    return C / C.max()


def _mixture_histogram(rng: np.random.Generator, n: int, components: int = 2):
    x = np.arange(n, dtype=np.float64)
    h = np.zeros(n)
    for _ in range(components):
        mean = rng.uniform(0.0, n - 1.0)
        width = rng.uniform(n / 20.0, n / 5.0)
        weight = rng.uniform(0.3, 1.0)
        h += weight * np.exp(-0.5 * ((x - mean) / width) ** 2)
    return h + 1e-6  # keep every bin strictly positive


def gen_gaussian_mixture(spec: GeneratorSpec) -> PotProblem:
    """Two-component mixture histograms on n bins with squared-distance cost."""
    rng = np.random.default_rng(spec.seed)
    r = _mixture_histogram(rng, spec.n)
    r *= spec.mass_r / r.sum()
    c = _mixture_histogram(rng, spec.n)
    c *= spec.mass_c / c.sum()
    s = spec.s_fraction * min(r.sum(), c.sum())
    return validate_problem(r, c, s, _squared_distance_cost(spec.n))


def gen_random_histogram(spec: GeneratorSpec) -> PotProblem:
    """Uniform random histograms; a stand-in for image-derived marginals."""
    rng = np.random.default_rng(spec.seed)
    r = rng.uniform(0.0, 1.0, spec.n) + 1e-6
    r *= spec.mass_r / r.sum()
    c = rng.uniform(0.0, 1.0, spec.n) + 1e-6
    c *= spec.mass_c / c.sum()
    s = spec.s_fraction * min(r.sum(), c.sum())
    return validate_problem(r, c, s, _squared_distance_cost(spec.n))


def generate(spec: GeneratorSpec) -> PotProblem:
    if spec.kind == "gaussian_mixture":
        return gen_gaussian_mixture(spec)
    return gen_random_histogram(spec)
