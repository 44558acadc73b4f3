"""Recovering a Lévy exponent, up to gauge, from power-payoff price data.

The normalised log-price data ``D0(q) = T^-1 log[H0(q) / (S0^q e^{(q-1)rT})]``
determines ``psi`` only up to ``psi(a) -> psi(a + mu) - psi(mu) + c a``.
``recover_exponent`` picks a representative for a chosen ``(lambda_hat, b)``
and ``fit_gauge`` finds the ``(c, mu)`` relating two exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .errors import DataError, DomainError, InsufficientDataError, NumericalError, ParameterError
from .exponents import REAL_LINE, Exponent, ExponentDomain, drift_shift, esscher, rescale
from .market import ImaginaryPriceCurve, MarketModel, PriceCurve

NODE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DataFunction:
    """Samples of ``D0`` on a uniform grid with a C² cubic-spline interpolant.

    Evaluation outside ``[q[0], q[-1]]`` raises; there is no extrapolation.
    Values may be complex (imaginary-power data).
    """

    q: np.ndarray
    values: np.ndarray
    maturity: float | None = None
    r: float | None = None
    s0: float | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        v = np.asarray(self.values)
        v = v.astype(complex) if np.iscomplexobj(v) else v.astype(float)
        if q.ndim != 1 or q.shape != v.shape or q.size < 4:
            raise DataError("a data function needs at least 4 samples on a 1-d grid")
        steps = np.diff(q)
        h = (q[-1] - q[0]) / (q.size - 1)
        if not np.all(steps > 0) or np.max(np.abs(steps - h)) > 1e-9 * abs(h):
            raise DataError("data-function samples must lie on an increasing uniform grid")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_spline", CubicSpline(q, v))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.q[0]), float(self.q[-1])

    @property
    def step(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        slack = NODE_TOL * max(1.0, abs(lo), abs(hi))
        if x.size and (np.min(x) < lo - slack or np.max(x) > hi + slack):
            bad = np.min(x) if np.min(x) < lo - slack else np.max(x)
            raise DomainError(f"D0 evaluated at {bad} outside its sampled range [{lo}, {hi}]", bad,
                              lo if bad < lo else hi)
        out = self._spline(np.clip(x, lo, hi))
        return out.item() if np.ndim(out) == 0 else out

    def value_at_node(self, q0: float):
        idx = np.flatnonzero(np.abs(self.q - q0) <= NODE_TOL * max(1.0, abs(q0)))
        if idx.size == 0:
            raise InsufficientDataError(f"no sample at q={q0}")
        return self.values[idx[0]]

    def is_convex(self, tol: float = 1e-9) -> bool:
        v = np.real(self.values)
        return bool(np.all(v[:-2] - 2.0 * v[1:-1] + v[2:] >= -tol))


# --------------------------------------------------------------------------- #
# Data function from prices
# --------------------------------------------------------------------------- #


def _node_index(q: np.ndarray, q0: float) -> int | None:
    idx = np.flatnonzero(np.abs(q - q0) <= NODE_TOL * max(1.0, abs(q0)))
    return int(idx[0]) if idx.size else None


def _finite_block(curve: PriceCurve) -> tuple[np.ndarray, np.ndarray]:
    i0, i1 = _node_index(curve.q, 0.0), _node_index(curve.q, 1.0)
    if i0 is None or i1 is None:
        raise InsufficientDataError("the price curve needs samples at q=0 and q=1")
    if not (curve.finite[i0] and curve.finite[i1]):
        raise InsufficientDataError("prices at q=0 and q=1 must be finite")
    lp = curve.log_price
    if np.any(np.isnan(lp[curve.finite])):
        raise DataError("price curve contains non-positive prices")
    fin = curve.finite
    lo, hi = min(i0, i1), max(i0, i1)
    while lo > 0 and fin[lo - 1]:
        lo -= 1
    while hi < len(fin) - 1 and fin[hi + 1]:
        hi += 1
    if not fin[lo:hi + 1].all():
        raise DataError("finite samples between q=0 and q=1 are interrupted")
    return curve.q[lo:hi + 1], lp[lo:hi + 1]


def infer_rate_and_spot(curve: PriceCurve) -> tuple[float, float]:
    """``r`` and ``S0`` implied by ``H0(0) = e^{-rT}`` and ``H0(1) = S0``."""
    q, lp = _finite_block(curve)
    i0, i1 = _node_index(q, 0.0), _node_index(q, 1.0)
    return -lp[i0] / curve.maturity, math.exp(lp[i1])


def compute_D0(curve: PriceCurve, r: float | None = None, s0: float | None = None) -> DataFunction:
    """Normalised log-price data on the finite region of ``curve``.

    ``r`` and ``s0`` default to the values implied by the curve itself.
    """
    q, lp = _finite_block(curve)
    if r is None or s0 is None:
        r_hat, s_hat = infer_rate_and_spot(curve)
        r = r_hat if r is None else r
        s0 = s_hat if s0 is None else s0
    if not s0 > 0:
        raise DataError("s0 must be positive")
    T = curve.maturity
    d0 = (lp - q * math.log(s0) - (q - 1.0) * r * T) / T
    return DataFunction(q, d0, T, r, s0)


# --------------------------------------------------------------------------- #
# Recovered exponent
# --------------------------------------------------------------------------- #


class RecoveredExponent(Exponent):
    """``psi_hat(a) = D0(a + lambda_hat) - D0(lambda_hat) + b a`` built from sampled data."""

    kind = "recovered"

    def __init__(self, base: DataFunction, lambda_hat: float, b: float = 0.0):
        if base.is_complex:
            raise ParameterError("use recover_imaginary for complex data")
        lo, hi = base.domain
        if not lo < lambda_hat < hi:
            raise DomainError(f"lambda_hat={lambda_hat} outside the data range ({lo}, {hi})", lambda_hat,
                              lo if lambda_hat <= lo else hi)
        self.base = base
        self.lambda_hat = float(lambda_hat)
        self.b = float(b)
        self._anchor = float(base(self.lambda_hat))
        self.domain = ExponentDomain(lo - self.lambda_hat, hi - self.lambda_hat)

    def _psi_real(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.base(x + self.lambda_hat)) - self._anchor + self.b * x

    def _psi(self, z):
        z = np.asarray(z)
        if np.any(np.imag(z) != 0):
            raise DomainError("recovered exponents are sampled on the real axis only")
        return self._psi_real(np.real(z)).astype(complex)

    def to_dict(self):
        return {"kind": "recovered", "params": {"q": self.base.q.tolist(), "d0": self.base.values.tolist(),
                                                 "lambda_hat": self.lambda_hat, "b": self.b}}

    @classmethod
    def from_params(cls, p) -> "RecoveredExponent":
        return cls(DataFunction(np.asarray(p["q"], float), np.asarray(p["d0"], float)), float(p["lambda_hat"]),
                   float(p.get("b", 0.0)))

    def __repr__(self):
        return f"RecoveredExponent(lambda_hat={self.lambda_hat}, b={self.b}, n={self.base.q.size})"


def recover_exponent(d0: DataFunction, lambda_hat: float, b: float = 0.0) -> RecoveredExponent:
    return RecoveredExponent(d0, lambda_hat, b)


def recover_numeraire(d0: DataFunction, b: float = 0.0) -> RecoveredExponent:
    """Natural-numeraire data (``sigma = lambda``, normalised to 1): ``psi(a) = D0(a + 1) + b a``."""
    return RecoveredExponent(d0, 1.0, b)


def unit_volatility_exponent(model: MarketModel) -> Exponent:
    """``a -> psi(sigma a)``: the exponent that data from ``model`` determines (sigma normalised to 1)."""
    return rescale(model.exponent, model.sigma)


def node_aligned_grid(d0: DataFunction, lambda_hat: float, margin: int = 1) -> np.ndarray:
    """Points ``q_k - lambda_hat`` for interior nodes, where ``psi_hat`` equals sampled data exactly."""
    return d0.q[margin:d0.q.size - margin] - lambda_hat


def verify_recovery(d0: DataFunction, rec: RecoveredExponent) -> float:
    """Max deviation between ``d0`` and the data function rebuilt from ``rec``."""
    lo, hi = rec.base.domain
    qlo, qhi = d0.domain
    slack = NODE_TOL * max(1.0, abs(lo), abs(hi))
    if qlo < lo - slack or qhi > hi + slack:
        raise DomainError(f"data range [{qlo}, {qhi}] exceeds the recovered range [{lo}, {hi}]")
    lam = rec.lambda_hat
    q = d0.q
    psi = rec._psi_real
    rebuilt = psi(q - lam) + (q - 1.0) * psi(np.asarray(-lam)) - q * psi(np.asarray(1.0 - lam))
    return float(np.max(np.abs(rebuilt - d0.values)))


# --------------------------------------------------------------------------- #
# Gauge fitting
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class GaugePair:
    """``psi_b(a) ≈ psi_a(a + mu) - psi_a(mu) + c a`` with max grid deviation ``residual``."""

    c: float
    mu: float
    residual: float


def gauge_transform(psi: Exponent, mu: float, c: float) -> Exponent:
    return drift_shift(esscher(psi, mu), c)


def _second_differences(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    slopes = np.diff(f) / h
    return 2.0 * np.diff(slopes) / (h[1:] + h[:-1])


def _mu_bounds(psi_a, grid: np.ndarray, window: float) -> tuple[float, float]:
    dom = getattr(psi_a, "domain", REAL_LINE)
    lo = max(dom.beta - grid.min(), dom.beta, -window)
    hi = min(dom.gamma - grid.max(), dom.gamma, window)
    if not lo < hi:
        raise DomainError("no shift keeps the grid inside the domain of psi_a")
    pad = 1e-9 * (hi - lo)
    return lo + pad, hi - pad


def fit_gauge(psi_a: Callable, psi_b: Callable, grid, tol: float | None = None, fix_mu: float | None = None,
              window: float = 10.0, scan: int = 201) -> GaugePair | None:
    """Find ``(c, mu)`` with ``psi_b(a) = psi_a(a + mu) - psi_a(mu) + c a`` on ``grid``.

    ``mu`` comes from matching second differences (which the linear term does
    not affect), ``c`` from the first-difference offset at the grid centre; a
    least-squares polish follows.  Where ``mu`` is not identified (quadratic
    exponents) the smallest ``|mu|`` is returned.  ``fix_mu`` pins ``mu``.
    Returns ``None`` if the residual exceeds ``tol``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 5:
        raise ParameterError("fit_gauge needs a grid of at least 5 points")
    grid = np.sort(grid)
    fb = np.asarray(psi_b(grid), dtype=float)
    d2b = _second_differences(fb, grid)

    def d2_mismatch(mu):
        return d2b - _second_differences(np.asarray(psi_a(grid + mu), dtype=float), grid)

    flat = False
    if fix_mu is None:
        lo, hi = _mu_bounds(psi_a, grid, window)
        cands = np.unique(np.append(np.linspace(lo, hi, scan), np.clip(0.0, lo, hi)))
        norms = np.array([np.linalg.norm(d2_mismatch(m)) for m in cands])
        best = norms.min()
        flat = norms.max() - best <= 1e-9 * (1.0 + norms.max())
        near = cands[norms <= best + 1e-9 * (1.0 + best)]
        mu0 = near[np.argmin(np.abs(near))]
        if not flat:
            mu0 = float(cands[np.argmin(norms)])
            sol = least_squares(lambda p: d2_mismatch(p[0]), [mu0], bounds=([lo], [hi]), xtol=1e-15, ftol=1e-15,
                                gtol=1e-15, method="trf")
            mu0 = float(sol.x[0])
        mu = float(mu0)
    else:
        mu = float(fix_mu)

    fa = np.asarray(psi_a(grid + mu), dtype=float)
    j = grid.size // 2
    h = grid[j + 1] - grid[j]
    c = (fb[j + 1] - fb[j]) / h - (fa[j + 1] - fa[j]) / h

    def residual(mu_, c_):
        return fb - np.asarray(psi_a(grid + mu_), dtype=float) + float(psi_a(mu_)) - c_ * grid

    res0 = np.max(np.abs(residual(mu, c)))
    if fix_mu is not None or flat:
        sol = least_squares(lambda p: residual(mu, p[0]), [c], xtol=1e-15, ftol=1e-15, gtol=1e-15)
        c1, mu1 = float(sol.x[0]), mu
    else:
        lo, hi = _mu_bounds(psi_a, grid, window)
        sol = least_squares(lambda p: residual(p[0], p[1]), [mu, c], bounds=([lo, -np.inf], [hi, np.inf]),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        mu1, c1 = float(sol.x[0]), float(sol.x[1])
    res1 = np.max(np.abs(residual(mu1, c1)))
    if res1 < res0:
        mu, c, res0 = mu1, c1, res1
    pair = GaugePair(float(c), float(mu), float(res0))
    if tol is not None and pair.residual > tol:
        return None
    return pair


# --------------------------------------------------------------------------- #
# Imaginary power payoffs
# --------------------------------------------------------------------------- #


def compute_D0_imaginary(curve: ImaginaryPriceCurve, r: float | None, s0: float) -> DataFunction:
    """``D0(q) = T^-1 log[F0(q) / (S0^{iq} e^{r(iq-1)T})]`` with the phase unwrapped from q=0.

    ``r`` defaults to the rate implied by ``F0(0) = e^{-rT}``; ``s0`` cannot be
    read off imaginary-power data and must be supplied.
    """
    q, F = curve.q, curve.price
    order = np.argsort(q)
    q, F = q[order], F[order]
    i0 = _node_index(q, 0.0)
    if i0 is None:
        raise InsufficientDataError("imaginary curve needs a sample at q=0")
    if np.any(F == 0):
        raise DataError("imaginary power prices must be non-zero")
    T = curve.maturity
    if r is None:
        r = -math.log(abs(F[i0])) / T
    ratio = F * np.exp(-1j * q * math.log(s0) - r * (1j * q - 1.0) * T)
    phase = np.angle(ratio)
    unwrapped = np.empty_like(phase)
    unwrapped[i0:] = np.unwrap(phase[i0:])
    unwrapped[:i0 + 1] = np.unwrap(phase[:i0 + 1][::-1])[::-1]
    logs = np.log(np.abs(ratio)) + 1j * unwrapped
    return DataFunction(q, logs / T, T, r, s0)


@dataclass(frozen=True, eq=False)
class ImaginaryRecovery:
    """Exponent on the imaginary axis, ``q -> psi_hat(iq)``, via polynomial continuation of D0.

    The data function ``D(alpha) = psi~(alpha) - alpha psi~(1)`` is known on the
    imaginary axis; real coefficients enforce ``D(conj a) = conj D(a)``.
    """

    coeffs: np.ndarray
    scale: float
    lambda_hat: float
    b: float
    condition: float
    q_range: tuple[float, float]

    def continued(self, alpha):
        t = np.asarray(alpha, dtype=complex) / self.scale
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        lo, hi = self.q_range
        if q.size and (q.min() < lo - NODE_TOL or q.max() > hi + NODE_TOL):
            raise DomainError(f"q outside the fitted range [{lo}, {hi}]")
        out = self.continued(1j * q + self.lambda_hat) - self.continued(self.lambda_hat) + 1j * self.b * q
        return complex(out) if out.ndim == 0 else out


def recover_imaginary(d0c: DataFunction, lambda_hat: float, b: float = 0.0, degree: int = 10,
                      max_condition: float = 1e12) -> ImaginaryRecovery:
    """``psi(iq) = D(iq + lambda_hat) - D(lambda_hat) + i b q`` from imaginary-axis samples."""
    q = d0c.q
    vals = np.asarray(d0c.values, dtype=complex)
    degree = int(min(degree, q.size - 1))
    scale = float(max(np.max(np.abs(q)), abs(lambda_hat), 1e-300))
    t = q / scale
    even = np.arange(0, degree + 1, 2)
    odd = np.arange(1, degree + 1, 2)
    # P(i s t) with real c_k: Re collects even k with sign (-1)^{k/2}, Im odd k with (-1)^{(k-1)/2}
    ve = (t[:, None] ** even) * ((-1.0) ** (even // 2))
    vo = (t[:, None] ** odd) * ((-1.0) ** ((odd - 1) // 2))
    cond = max(np.linalg.cond(ve), np.linalg.cond(vo) if odd.size else 1.0)
    if not cond <= max_condition:
        raise NumericalError(f"continuation ill-conditioned (condition number {cond:.3g})", bound=cond)
    ce = np.linalg.lstsq(ve, vals.real, rcond=None)[0]
    co = np.linalg.lstsq(vo, vals.imag, rcond=None)[0] if odd.size else np.zeros(0)
    coeffs = np.zeros(degree + 1)
    coeffs[even] = ce
    coeffs[odd] = co
    return ImaginaryRecovery(coeffs, scale, float(lambda_hat), float(b), float(cond),
                             (float(q.min()), float(q.max())))
