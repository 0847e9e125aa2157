"""Monte Carlo estimates of coverage and scaled expected volume.

These are deliberately naive: simulate X (and S), evaluate the set
membership or the volume statistic, average.  They share nothing with the
quadrature code except the center and radius function objects.

Draws come from a Philox counter-based generator.  The sample is split into
fixed-size chunks, each with its own substream spawned from the seed, so an
estimate depends only on (seed, n_draws, chunk size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import scaled_chi_moment

CHUNK = 1 << 17


@dataclass(frozen=True)
class McConfig:
    n_draws: int = 1_000_000
    seed: int = 20240601
    antithetic: bool = False

    def __post_init__(self):
        if self.n_draws < 1000:
            raise ValueError("n_draws must be at least 1000")
        if self.antithetic and self.n_draws % 2:
            raise ValueError("antithetic sampling needs an even number of draws")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    standard_error: float
    n_draws: int
    seed: int

    def z_score(self, value: float) -> float:
        if self.standard_error == 0.0:
            return 0.0 if value == self.mean else math.copysign(math.inf, value - self.mean)
        return (value - self.mean) / self.standard_error


def _chunks(cfg: McConfig):
    """Yield (generator, size) pairs covering n_draws (sizes count draws, not pairs)."""
    n_chunks = -(-cfg.n_draws // CHUNK)
    children = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    left = cfg.n_draws
    for ss in children:
        size = min(CHUNK, left)
        left -= size
        yield np.random.Generator(np.random.Philox(ss)), size


def _normals(rng, size, p, gamma, antithetic):
    if antithetic:
        z = rng.standard_normal((size // 2, p))
        z = np.concatenate([z, -z])
    else:
        z = rng.standard_normal((size, p))
    x = z
    x[:, 0] += gamma
    return x


def _estimate(stat_fn, cfg: McConfig) -> McEstimate:
    # Running sums per chunk; with antithetics the unit is the pair mean.
    s1 = s2 = 0.0
    units = 0
    for rng, size in _chunks(cfg):
        vals = stat_fn(rng, size)
        if cfg.antithetic:
            half = vals.size // 2
            vals = 0.5 * (vals[:half] + vals[half:])
        s1 += float(vals.sum())
        s2 += float((vals * vals).sum())
        units += vals.size
    mean = s1 / units
    var = max(s2 / units - mean * mean, 0.0) * units / max(units - 1, 1)
    return McEstimate(mean, math.sqrt(var / units), cfg.n_draws, cfg.seed)


def _theta(p, gamma):
    th = np.zeros(p)
    th[0] = gamma
    return th


def mc_coverage_known(gamma: float, rcs, cfg: McConfig = McConfig()) -> McEstimate:
    """Fraction of draws X ~ N(theta, I) with ||a(T) X - theta|| <= b(T)."""
    p = rcs.p
    th = _theta(p, gamma)

    def stat(rng, size):
        x = _normals(rng, size, p, gamma, cfg.antithetic)
        t = np.linalg.norm(x, axis=1) / math.sqrt(p)
        centre = np.asarray(rcs.a(t))[:, None] * x
        return (np.linalg.norm(centre - th, axis=1) <= rcs.b(t)).astype(float)

    return _estimate(stat, cfg)


def mc_sev_known(gamma: float, rcs, cfg: McConfig = McConfig()) -> McEstimate:
    """Sample mean of (b(T) / d)^p."""
    p = rcs.p

    def stat(rng, size):
        x = _normals(rng, size, p, gamma, cfg.antithetic)
        t = np.linalg.norm(x, axis=1) / math.sqrt(p)
        return (np.asarray(rcs.b(t), dtype=float) / rcs.d) ** p

    return _estimate(stat, cfg)


def _draw_unknown(rng, size, p, m, gamma, antithetic):
    x = _normals(rng, size, p, gamma, antithetic)
    s = np.sqrt(rng.chisquare(m, size) / m)
    return x, s


def mc_coverage_unknown(gamma: float, rcs, cfg: McConfig = McConfig()) -> McEstimate:
    """Fraction of draws with ||a(T) X - theta|| <= S b(T), T = ||X|| / (sqrt(p) S), sigma = 1."""
    p, m = rcs.p, rcs.m
    th = _theta(p, gamma)

    def stat(rng, size):
        x, s = _draw_unknown(rng, size, p, m, gamma, cfg.antithetic)
        t = np.linalg.norm(x, axis=1) / (math.sqrt(p) * s)
        centre = np.asarray(rcs.a(t))[:, None] * x
        return (np.linalg.norm(centre - th, axis=1) <= s * rcs.b(t)).astype(float)

    return _estimate(stat, cfg)


def mc_sev_unknown(gamma: float, rcs, cfg: McConfig = McConfig()) -> McEstimate:
    """Sample mean of S^p b(T)^p divided by d^p E(S^p), the last term exact."""
    p, m = rcs.p, rcs.m
    mu = scaled_chi_moment(p, m)

    def stat(rng, size):
        x, s = _draw_unknown(rng, size, p, m, gamma, cfg.antithetic)
        t = np.linalg.norm(x, axis=1) / (math.sqrt(p) * s)
        return (s * np.asarray(rcs.b(t), dtype=float) / rcs.d) ** p / mu

    return _estimate(stat, cfg)
