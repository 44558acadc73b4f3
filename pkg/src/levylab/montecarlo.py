"""Monte Carlo oracle for exponents, prices and martingale identities.

Paths are drawn in fixed-size blocks; block ``b`` uses a Philox stream keyed by
``SeedSequence(seed, spawn_key=(b,))``.  Workers only change which thread
computes a block, and block statistics are combined in block order, so every
estimate is bit-identical across thread counts.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import DomainError, ParameterError
from .exponents import Exponent
from .market import MarketModel, dividend_asset_price_at, power_price_domain, pricing_kernel_at

BLOCK = 1 << 14
THREADS_ENV = "LEVYLAB_THREADS"


@dataclass(frozen=True)
class SimConfig:
    process: Exponent | None
    horizon: float
    n_paths: int
    seed: int = 0
    n_steps: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise ParameterError("horizon must be positive")
        if int(self.n_paths) < 1 or int(self.n_steps) < 1:
            raise ParameterError("n_paths and n_steps must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "seed", int(self.seed))

    def with_process(self, process: Exponent, horizon: float | None = None) -> "SimConfig":
        return SimConfig(process, self.horizon if horizon is None else horizon, self.n_paths, self.seed,
                         self.n_steps)


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    n: int

    def log_estimate(self) -> tuple[float, float]:
        """``log mean`` with its delta-method standard error ``se / mean``."""
        return math.log(self.mean), self.std_error / abs(self.mean)

    def within(self, target: float, k: float = 3.0, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error + extra

    def to_dict(self, seed: int | None = None) -> dict:
        d = {"mean": self.mean, "se": self.std_error, "n_paths": self.n}
        if seed is not None:
            d["seed"] = seed
        return d


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads < 1:
        raise ParameterError("thread count must be at least 1")
    return threads


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    nb = (n_paths + BLOCK - 1) // BLOCK
    return [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range(nb)]


def _map_blocks(fn: Callable[[np.random.Generator, int], np.ndarray], config: SimConfig, threads: int | None):
    """Run ``fn(rng, size)`` over every block; results in block order."""
    blocks = _blocks(config.n_paths)
    work = [(block_rng(config.seed, b), size) for b, size in blocks]
    nt = min(resolve_threads(threads), len(work))
    if nt == 1:
        return [fn(rng, size) for rng, size in work]
    with ThreadPoolExecutor(max_workers=nt) as pool:
        return list(pool.map(lambda w: fn(*w), work))


def _moments(values: np.ndarray) -> np.ndarray:
    """Per-block (count, mean, M2) columns for each statistic (last axis = path)."""
    v = np.atleast_2d(values)
    n = v.shape[-1]
    mean = v.mean(axis=-1)
    m2 = ((v - mean[:, None]) ** 2).sum(axis=-1)
    return np.stack([np.full(mean.shape, float(n)), mean, m2])


def _combine(parts: list[np.ndarray]) -> list[EstimateWithError]:
    """Chan et al. pairwise update applied in fixed block order."""
    n, mean, m2 = parts[0]
    n, mean, m2 = n.copy(), mean.copy(), m2.copy()
    for nb, mb, m2b in parts[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    out = []
    for k in range(mean.size):
        var = m2[k] / (n[k] - 1.0) if n[k] > 1 else 0.0
        out.append(EstimateWithError(float(mean[k]), math.sqrt(max(var, 0.0) / n[k]), int(n[k])))
    return out


def _estimate(stat: Callable[[np.random.Generator, int], np.ndarray], config: SimConfig, threads):
    return _combine(_map_blocks(lambda rng, size: _moments(stat(rng, size)), config, threads))


def _process(config: SimConfig) -> Exponent:
    if config.process is None:
        raise ParameterError("SimConfig has no process")
    return config.process


# --------------------------------------------------------------------------- #
# Sampling
# --------------------------------------------------------------------------- #


def simulate_terminal(config: SimConfig, threads: int | None = None) -> np.ndarray:
    """``n_paths`` exact draws of ``xi_T``."""
    proc = _process(config)
    T = config.horizon
    return np.concatenate(_map_blocks(lambda rng, size: proc.sample(rng, T, size), config, threads))


def simulate_path_block(process: Exponent, rng: np.random.Generator, size: int, T: float, n_steps: int) -> np.ndarray:
    """Paths ``xi`` at ``t_k = k T / n`` as an array ``(size, n + 1)`` starting at 0."""
    inc = process.sample(rng, T / n_steps, (size, n_steps))
    out = np.zeros((size, n_steps + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def mc_exponent(config: SimConfig, alpha, threads: int | None = None):
    """Sample mean of ``e^{alpha xi_T}``; one shared sample serves every ``alpha``."""
    proc = _process(config)
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    proc.domain.check(a)
    T = config.horizon

    def stat(rng, size):
        xi = proc.sample(rng, T, size)
        return np.exp(a[:, None] * xi[None, :])

    est = _estimate(stat, config, threads)
    return est[0] if np.ndim(alpha) == 0 else est


def mc_exponent_check(config: SimConfig, alpha, k: float = 3.0, threads: int | None = None):
    """Per ``alpha``: ``(T^-1 log mean, delta-method SE, |diff| < k SE)`` against the closed form."""
    proc = _process(config)
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    ests = mc_exponent(config, a, threads)
    T = config.horizon
    out = []
    for ai, e in zip(a, ests):
        lm, se = e.log_estimate()
        diff = abs(lm / T - proc(ai))
        out.append((lm / T, se / T, bool(diff <= k * se / T)))
    return out


def _check_q(model: MarketModel, q: float):
    lo, hi = power_price_domain(model)
    if not lo < q < hi:
        raise DomainError(f"q={q} outside the finite-price interval ({lo}, {hi})", q, lo if q <= lo else hi)


def mc_payoff_price(model: MarketModel, payoff: Callable, T: float, config: SimConfig,
                    threads: int | None = None) -> EstimateWithError:
    """Mean of ``pi_T f(log S_T)`` with ``xi`` simulated under the model's exponent."""
    proc = model.exponent

    def stat(rng, size):
        xi = proc.sample(rng, T, size)
        kern = pricing_kernel_at(model, xi, T)
        s = dividend_asset_price_at(model, xi, T)
        return kern * payoff(np.log(s))

    return _estimate(stat, config.with_process(proc, T), threads)[0]


def mc_power_price(model: MarketModel, q: float, T: float, config: SimConfig,
                   threads: int | None = None) -> EstimateWithError:
    """Mean of ``pi_T S_T^q``."""
    _check_q(model, q)
    return mc_payoff_price(model, lambda x: np.exp(q * x), T, config, threads)


def mc_rn_expectation(model: MarketModel, fn: Callable, T: float, config: SimConfig,
                      threads: int | None = None) -> EstimateWithError:
    """Risk-neutral expectation ``E~[fn(S_T)] = E[Lambda_T fn(S_T)]``, ``Lambda_T = e^{-lambda xi - psi(-lambda) T}``."""
    proc = model.exponent
    shift = proc(-model.lam)

    def stat(rng, size):
        xi = proc.sample(rng, T, size)
        lam_t = np.exp(-model.lam * xi - shift * T)
        return lam_t * fn(dividend_asset_price_at(model, xi, T))

    return _estimate(stat, config.with_process(proc, T), threads)[0]


# --------------------------------------------------------------------------- #
# Martingale tests
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class GainTestResult:
    residual: EstimateWithError
    bias_bound: float

    @property
    def passed(self) -> bool:
        return self.residual.within(0.0, 3.0, self.bias_bound)


def mc_deflated_gain_test(model: MarketModel, s: float, t: float, config: SimConfig,
                          threads: int | None = None) -> GainTestResult:
    """Residual ``E[Sbar_t - Sbar_s]`` of the deflated gain ``Sbar = pi S + delta ∫ pi S du``.

    Paths use ``config.n_steps`` steps on ``[0, t]``; ``s`` must be a grid time.
    The trapezoid rule on ``E[pi_u S_u] = S0 e^{-delta u}`` carries bias at most
    ``delta^3 S0 (t - s) h^2 / 12``.
    """
    if not 0.0 <= s <= t:
        raise ParameterError("need 0 <= s <= t")
    if t == s:
        return GainTestResult(EstimateWithError(0.0, 0.0, config.n_paths), 0.0)
    n = config.n_steps
    h = t / n
    ks = s / h
    if abs(ks - round(ks)) > 1e-9:
        raise ParameterError(f"s={s} is not on the simulation grid of step {h}")
    ks = int(round(ks))
    proc = model.exponent
    times = np.linspace(0.0, t, n + 1)
    delta = model.dividend

    def stat(rng, size):
        xi = simulate_path_block(proc, rng, size, t, n)
        deflated = pricing_kernel_at(model, xi, times) * dividend_asset_price_at(model, xi, times)
        seg = deflated[:, ks:]
        integral = h * (seg.sum(axis=1) - 0.5 * (seg[:, 0] + seg[:, -1]))
        return deflated[:, -1] - deflated[:, ks] + delta * integral

    est = _estimate(stat, config.with_process(proc, t), threads)[0]
    bias = delta**3 * model.s0 * (t - s) * h * h / 12.0
    return GainTestResult(est, bias)


def ks_increment_stationarity(config: SimConfig, significance: float = 1e-3, threads: int | None = None):
    """Two-sample KS test: ``xi_{2T} - xi_T`` (from half-steps) against one-shot ``xi_T``.

    Returns ``(statistic, p_value, passed)``.
    """
    proc = _process(config)
    T = config.horizon

    def later(rng, size):
        path = simulate_path_block(proc, rng, size, 2.0 * T, 4)
        return path[:, 4] - path[:, 2]

    a = np.concatenate(_map_blocks(later, config, threads))
    other = SimConfig(proc, T, config.n_paths, (config.seed + 0x9E3779B97F4A7C15) % 2**64)
    b = simulate_terminal(other, threads)
    res = stats.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue), bool(res.pvalue > significance)
