"""Call-option route: risk-neutral law of ``S_T``, call prices, and the inverse step.

``RNDistribution`` stores a right-continuous cdf on a price grid plus point
masses.  Between grid points the continuous part is spread uniformly, tails
beyond the grid are lumped at representative locations; every integral
(calls, power payoffs, general payoffs) is computed exactly on that
representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, NumericalError, ParameterError
from .exponents import Exponent, esscher
from .market import MarketModel, PriceCurve, excess_return

CDF_TOL = 1e-8
ATOM_FACTOR = 1e-6
ATOM_RELATIVE = 0.05
CONVEX_SLACK = 1e-9


def rn_exponent(model: MarketModel) -> Exponent:
    """Exponent of ``xi`` under the risk-neutral measure, ``psi(a - lambda) - psi(-lambda)``."""
    return esscher(model.exponent, -model.lam)


def rn_log_drift(model: MarketModel, T: float) -> float:
    """``log S_T - sigma xi_T``, deterministic: ``log S0 + (r - delta + R - psi(sigma)) T``."""
    growth = model.r - model.dividend + excess_return(model) - model.exponent(model.sigma)
    return math.log(model.s0) + growth * T


# --------------------------------------------------------------------------- #
# Distribution object
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class RNDistribution:
    """Right-continuous distribution of ``S_T`` on an increasing grid of prices.

    ``atoms`` are point masses (anywhere on ``(0, inf)``) already included in
    ``cdf``.  Continuous mass below ``grid[0]`` sits at ``lower_location``, above
    ``grid[-1]`` at ``upper_location``.  ``error_bound`` is the cdf accuracy
    reported by the constructing routine.
    """

    grid: np.ndarray
    cdf: np.ndarray
    atoms: tuple[tuple[float, float], ...] = ()
    lower_location: float | None = None
    upper_location: float | None = None
    error_bound: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        F = np.asarray(self.cdf, dtype=float)
        if x.ndim != 1 or x.shape != F.shape or x.size < 2:
            raise ParameterError("grid and cdf must be 1-d arrays of equal length >= 2")
        if not (x[0] > 0 and np.all(np.diff(x) > 0)):
            raise ParameterError("grid must be positive and increasing")
        atoms = tuple(sorted((float(a), float(m)) for a, m in self.atoms if m > 0))
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "cdf", F)
        object.__setattr__(self, "atoms", atoms)
        lo = x[0] if self.lower_location is None else min(float(self.lower_location), x[0])
        hi = x[-1] if self.upper_location is None else max(float(self.upper_location), x[-1])
        object.__setattr__(self, "lower_location", float(lo))
        object.__setattr__(self, "upper_location", float(hi))
        object.__setattr__(self, "_parts", self._decompose())

    def _decompose(self):
        x, F = self.grid, self.cdf
        locs = np.array([a for a, _ in self.atoms])
        mass = np.array([m for _, m in self.atoms])
        cum = np.concatenate([[0.0], np.cumsum(mass)])

        def atoms_upto(v):
            return cum[np.searchsorted(locs, v, side="right")] if locs.size else np.zeros_like(v)

        below = atoms_upto(x)
        cont_cdf = F - below
        lower = max(cont_cdf[0], 0.0)
        inner = np.clip(np.diff(cont_cdf), 0.0, None)
        upper = max(1.0 - F[-1] - (mass.sum() - below[-1] if locs.size else 0.0), 0.0)
        return lower, inner, upper

    @property
    def lower_tail(self) -> float:
        return self._parts[0]

    @property
    def upper_tail(self) -> float:
        return self._parts[2]

    @property
    def interval_masses(self) -> np.ndarray:
        return self._parts[1]

    def point_masses(self) -> tuple[np.ndarray, np.ndarray]:
        """Atoms together with the lumped tails."""
        locs = [a for a, _ in self.atoms] + [self.lower_location, self.upper_location]
        mass = [m for _, m in self.atoms] + [self.lower_tail, self.upper_tail]
        return np.asarray(locs), np.asarray(mass)

    def __call__(self, x):
        """``F(x)``: exact for the stored representation (linear between nodes, atoms as jumps)."""
        x = np.asarray(x, dtype=float)
        locs, mass = self.point_masses()
        out = np.sum(mass[None, :] * (locs[None, :] <= x.reshape(-1, 1)), axis=1)
        a, b, w = self.grid[:-1], self.grid[1:], self.interval_masses
        frac = np.clip((x.reshape(-1, 1) - a) / (b - a), 0.0, 1.0)
        out = out + frac @ w
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def expectation(self, fn) -> float:
        """``∫ fn dF`` with the continuous part integrated by 4-point Gauss-Legendre per interval."""
        locs, mass = self.point_masses()
        total = float(np.sum(mass * fn(locs)))
        nodes, weights = np.polynomial.legendre.leggauss(4)
        a, b, w = self.grid[:-1], self.grid[1:], self.interval_masses
        pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes[None, :]
        return total + float(np.sum(w * (fn(pts) @ weights) * 0.5))

    def mean(self) -> float:
        return self.partial_moment(1.0)

    def partial_moment(self, q: float) -> float:
        """``∫ x^q dF`` exactly on the representation."""
        locs, mass = self.point_masses()
        total = float(np.sum(mass * locs**q))
        return total + float(np.sum(self.interval_masses * _uniform_power_mean(self.grid[:-1], self.grid[1:], q)))


def _uniform_power_mean(a: np.ndarray, b: np.ndarray, q: float) -> np.ndarray:
    """Mean of ``x^q`` for ``x`` uniform on ``[a, b]``."""
    ratio = np.log(b / a)
    p = q + 1.0
    if p == 0.0:
        return ratio / (b - a)
    return a**p * np.expm1(p * ratio) / (p * (b - a))


# --------------------------------------------------------------------------- #
# Characteristic-function inversion
# --------------------------------------------------------------------------- #


def _moments(expo: Exponent, sigma: float, T: float) -> tuple[float, float]:
    h = 1e-4 * min(1.0, expo.domain.gamma, -expo.domain.beta)
    f = expo(np.array([-h, 0.0, h]))
    d1 = (f[2] - f[0]) / (2.0 * h)
    d2 = (f[2] - 2.0 * f[1] + f[0]) / (h * h)
    return sigma * T * d1, math.sqrt(max(sigma * sigma * T * d2, 0.0))


def _chernoff_reach(expo: Exponent, sigma: float, T: float, drift: float, sd: float, eps: float, side: int) -> float:
    """Distance ``L`` beyond the mean with tail mass on ``side`` below ``eps`` (Chernoff bound)."""
    edge = expo.domain.gamma if side > 0 else -expo.domain.beta
    tmax = 0.95 * edge / sigma if math.isfinite(edge) else 60.0 / max(sd, 1e-12)
    tmax = min(tmax, 60.0 / max(sd, 1e-12))
    thetas = tmax * np.linspace(0.02, 1.0, 60)
    with np.errstate(over="ignore", invalid="ignore"):
        logm = T * expo(side * thetas * sigma) - side * thetas * drift
    reach = np.where(np.isfinite(logm), (logm - math.log(eps)) / thetas, np.inf)
    return float(np.min(reach))


def _lattice_law(zj, sigma: float, T: float, y0: float):
    mean = zj.rate * T
    k = np.arange(int(mean + 40.0 * math.sqrt(mean) + 40.0) + 1)
    return y0 + sigma * (zj.drift * T + zj.lattice * k), stats.poisson.pmf(k, mean)


def _log_cdf(expo: Exponent, sigma: float, T: float, y0: float, y: np.ndarray, tol: float,
             max_nodes: int = 1 << 18):
    """cdf of ``Y = y0 + sigma xi_T`` at ``y``; returns ``(cdf, atoms_in_y, bound)``.

    Lattice laws are enumerated.  Otherwise the zero-jump atom (if any) is
    removed and the rest inverted by the midpoint-rule Gil-Pelaez formula; the
    step keeps the period ``2 pi / du`` beyond the reach of the tails, so the
    aliasing error is below ``tol / 10``.
    """
    zj = expo.zero_jump
    if zj is not None and zj.lattice is not None:
        locs, pmf = _lattice_law(zj, sigma, T, y0)
        order = np.argsort(locs)
        locs, pmf = locs[order], pmf[order]
        cdf = np.concatenate([[0.0], np.cumsum(pmf)])[np.searchsorted(locs, y, side="right")]
        return np.minimum(cdf, 1.0), list(zip(locs, pmf)), 1e-16

    atom_loc, atom_mass = None, 0.0
    if zj is not None:
        atom_loc, atom_mass = y0 + sigma * zj.drift * T, math.exp(-zj.rate * T)
    d1, sd = _moments(expo, sigma, T)
    centre = y0 + d1
    eps = 0.1 * tol
    reach_up = _chernoff_reach(expo, sigma, T, d1, sd, eps, +1)
    reach_dn = _chernoff_reach(expo, sigma, T, d1, sd, eps, -1)
    period = 1.05 * max(np.max(y) - (centre - reach_dn), (centre + reach_up) - np.min(y), 1e-3)
    du = 2.0 * math.pi / period

    def phi_c(u):
        z = 1j * u * sigma
        val = np.exp(1j * u * y0 + T * expo._psi(z))
        if atom_loc is not None:
            val = val - atom_mass * np.exp(1j * u * atom_loc)
        return val

    # march out in blocks until |phi_c(u)|/u is negligible
    block = 1024
    us, vals = [], []
    n = 0
    bound = math.inf
    while n < max_nodes:
        u = (np.arange(n, n + block) + 0.5) * du
        v = phi_c(u)
        us.append(u)
        vals.append(v)
        n += block
        env = np.abs(v) / u
        if env.max() < 1e-3 * eps:
            bound = float(np.sum(env) * du / math.pi)
            break
    u = np.concatenate(us)
    v = np.concatenate(vals)
    if not math.isfinite(bound):
        env = np.abs(v[-block:]) / u[-block:]
        # power-law tail extrapolation of the envelope
        slope = -np.polyfit(np.log(u[-block:][env > 0]), np.log(env[env > 0]), 1)[0] if np.any(env > 0) else 2.0
        tail = env[-1] * u[-1] / (slope - 1.0) if slope > 1.0 else math.inf
        bound = float(tail / math.pi)
        if bound > tol:
            raise NumericalError(f"characteristic-function inversion truncated with error bound {bound:.3g}",
                                 bound=bound)
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    w = v / u
    chunk = max(1, 4_000_000 // u.size)
    for s in range(0, y.size, chunk):
        ys = y[s:s + chunk]
        out[s:s + chunk] = np.imag(np.exp(-1j * np.outer(ys, u)) @ w)
    cdf = 0.5 * (1.0 - atom_mass) - du / math.pi * out
    atoms = []
    if atom_loc is not None:
        cdf = cdf + atom_mass * (y >= atom_loc)
        atoms.append((atom_loc, atom_mass))
    total_bound = bound + eps
    # monotone clean-up within the error budget
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    return cdf, atoms, total_bound


def default_price_grid(model: MarketModel, T: float, n: int = 4001, tol: float = 1e-10) -> np.ndarray:
    """Geometric grid covering the risk-neutral law of ``S_T`` out to tail mass ``tol``."""
    expo = rn_exponent(model)
    y0 = rn_log_drift(model, T)
    d1, sd = _moments(expo, model.sigma, T)
    up = _chernoff_reach(expo, model.sigma, T, d1, sd, tol, +1)
    dn = _chernoff_reach(expo, model.sigma, T, d1, sd, tol, -1)
    return np.exp(np.linspace(y0 + d1 - dn, y0 + d1 + up, n))


def rn_distribution(model: MarketModel, T: float, x_grid=None, tol: float = CDF_TOL) -> RNDistribution:
    """``P~(S_T <= x)`` on ``x_grid`` by inversion of the risk-neutral characteristic function."""
    if not T > 0:
        raise ParameterError("maturity must be positive")
    x = default_price_grid(model, T) if x_grid is None else np.asarray(x_grid, dtype=float)
    if not (x.ndim == 1 and x.size >= 2 and x[0] > 0 and np.all(np.diff(x) > 0)):
        raise ParameterError("x_grid must be positive and increasing")
    expo = rn_exponent(model)
    y0 = rn_log_drift(model, T)
    y = np.log(x)
    cdf, atoms_y, bound = _log_cdf(expo, model.sigma, T, y0, y, tol)
    atoms = [(math.exp(a), m) for a, m in atoms_y]

    # share-measure inversion gives the tails' partial first moments
    forward = model.s0 * math.exp((model.r - model.dividend) * T)
    share = esscher(expo, model.sigma)
    ends, _, _ = _log_cdf(share, model.sigma, T, y0, y[[0, -1]], tol)
    dist = RNDistribution(x, cdf, tuple(atoms), error_bound=bound)
    lower_loc, upper_loc = None, None
    atom_lo = sum(m * a for a, m in atoms if a <= x[0])
    atom_hi = sum(m * a for a, m in atoms if a > x[-1])
    if dist.lower_tail > 1e3 * tol:
        lower_loc = (forward * ends[0] - atom_lo) / dist.lower_tail
    if dist.upper_tail > 1e3 * tol:
        upper_loc = (forward * (1.0 - ends[1]) - atom_hi) / dist.upper_tail
    if lower_loc is None and upper_loc is None:
        return dist
    return RNDistribution(x, cdf, tuple(atoms), lower_loc if lower_loc and lower_loc > 0 else None, upper_loc, bound)


# --------------------------------------------------------------------------- #
# Calls
# --------------------------------------------------------------------------- #


def _undiscounted_calls(dist: RNDistribution, strikes: np.ndarray) -> np.ndarray:
    k = strikes.reshape(-1, 1)
    locs, mass = dist.point_masses()
    out = np.maximum(locs[None, :] - k, 0.0) @ mass
    a, b, w = dist.grid[:-1], dist.grid[1:], dist.interval_masses
    full = w * (0.5 * (a + b) - k)
    part = w * (b - k) ** 2 / (2.0 * (b - a))
    contrib = np.where(k <= a, full, np.where(k >= b, 0.0, part))
    return out + contrib.sum(axis=1)


def call_prices(dist: RNDistribution, strikes, r: float, T: float) -> np.ndarray:
    """``e^{-rT} ∫ (y - x)^+ dF(y)`` for each strike ``x``."""
    k = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(k < 0):
        raise ParameterError("strikes must be non-negative")
    return math.exp(-r * T) * _undiscounted_calls(dist, k)


def call_price(dist: RNDistribution, strike: float, r: float, T: float) -> float:
    return float(call_prices(dist, [strike], r, T)[0])


@dataclass(frozen=True, eq=False)
class CallCurve:
    """Call prices ``C0T(x)`` on increasing strikes; convex and nonincreasing within slack."""

    maturity: float
    strikes: np.ndarray
    prices: np.ndarray
    slack: float = field(default=CONVEX_SLACK)

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float)
        c = np.asarray(self.prices, dtype=float)
        if k.ndim != 1 or k.shape != c.shape or k.size < 3:
            raise DataError("a call curve needs at least 3 strikes")
        if not np.all(np.diff(k) > 0):
            raise DataError("strikes must be increasing")
        if np.any(c < -self.slack):
            raise DataError("call prices must be non-negative")
        slopes = np.diff(c) / np.diff(k)
        if np.any(slopes > self.slack):
            raise DataError("call prices increase with strike")
        if np.any(np.diff(slopes) < -self.slack):
            i = int(np.argmin(np.diff(slopes)))
            raise DataError(f"call prices are not convex near strike {k[i + 1]}")
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "prices", c)


def model_call_curve(model: MarketModel, T: float, strikes, n_grid: int = 4001, tol: float = CDF_TOL) -> CallCurve:
    dist = rn_distribution(model, T, default_price_grid(model, T, n_grid), tol)
    k = np.asarray(strikes, dtype=float)
    return CallCurve(T, k, call_prices(dist, k, model.r, T))


def distribution_from_calls(curve: CallCurve, r: float, atom_threshold: float | None = None) -> RNDistribution:
    """Invert call prices: ``F(x) = 1 + e^{rT} dC/dx``.

    Chord slopes give ``F`` at strike midpoints.  A slope jump exceeding the
    local (median) slope-jump level by more than ``atom_threshold`` (default
    ``1e-6 e^{-rT}``) plus 5% of that level marks a point mass of size
    ``e^{rT}`` times the excess; adjacent flagged strikes merge into one atom
    at their weighted mean.  The relative part keeps curvature at density
    peaks from posing as mass: an atom below a twentieth of one cell's
    continuous mass is not resolvable on the strike grid.
    """
    T = curve.maturity
    k, c = curve.strikes, curve.prices
    disc = math.exp(r * T)
    thr = ATOM_FACTOR * math.exp(-r * T) if atom_threshold is None else atom_threshold
    slopes = np.diff(c) / np.diff(k)
    mids = 0.5 * (k[1:] + k[:-1])
    F = np.clip(1.0 + disc * slopes, 0.0, 1.0)
    jumps = np.diff(slopes)                        # located at interior strikes k[1:-1]
    n = jumps.size
    if n >= 3:
        pad = np.pad(jumps, 3, mode="edge")
        win = np.lib.stride_tricks.sliding_window_view(pad, 7)
        level = np.median(win, axis=1)
        excess = jumps - level
    else:
        level = excess = np.zeros(n)
    flagged = excess > thr + ATOM_RELATIVE * np.abs(level)
    atoms = []
    i = 0
    while i < n:
        if flagged[i]:
            j = i
            while j + 1 < n and flagged[j + 1]:
                j += 1
            e = excess[i:j + 1]
            loc = float(np.sum(e * k[1 + i:2 + j]) / e.sum())
            atoms.append((loc, float(disc * e.sum())))
            i = j + 1
        else:
            i += 1
    F = np.maximum.accumulate(F)
    dist = RNDistribution(mids, F, tuple(atoms))
    upper = None
    if dist.upper_tail > 0:
        upper = k[-1] + disc * max(c[-1], 0.0) / dist.upper_tail
    return RNDistribution(mids, F, tuple(atoms), None, upper)


def density_from_calls(curve: CallCurve, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Second-difference density ``e^{rT} C''(x)`` at the interior strikes."""
    k, c = curve.strikes, curve.prices
    h = np.diff(k)
    slopes = np.diff(c) / h
    second = 2.0 * np.diff(slopes) / (h[1:] + h[:-1])
    return k[1:-1], math.exp(r * curve.maturity) * second


def power_prices_from_distribution(dist: RNDistribution, q_grid, r: float, T: float,
                                   tail_tol: float = 1e-8) -> PriceCurve:
    """``H0(q) = e^{-rT} ∫ x^q dF(x)``; ``q`` whose tail share exceeds ``tail_tol`` is flagged infinite."""
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    a, b, w = dist.grid[:-1], dist.grid[1:], dist.interval_masses
    atom_locs = np.array([x for x, _ in dist.atoms])
    atom_mass = np.array([m for _, m in dist.atoms])
    lp = np.empty_like(q)
    finite = np.ones(q.size, dtype=bool)
    for i, qi in enumerate(q):
        body = float(np.sum(w * _uniform_power_mean(a, b, qi))) + float(np.sum(atom_mass * atom_locs**qi))
        tails = dist.lower_tail * dist.lower_location**qi + dist.upper_tail * dist.upper_location**qi
        total = body + tails
        if not (total > 0 and math.isfinite(total)) or tails > tail_tol * total:
            finite[i] = False
            lp[i] = math.inf
        else:
            lp[i] = math.log(total) - r * T
    return PriceCurve(T, q, lp, "from_calls", finite)
