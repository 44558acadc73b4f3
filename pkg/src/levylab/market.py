"""Geometric Lévy market: pricing kernel, natural numeraire, risky asset, power payoffs.

Prices are computed in log space.  ``power_price`` returns ``math.inf`` exactly
when ``q*sigma - lambda`` leaves the open moment domain, never by overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedError
from .exponents import Exponent, exponent_from_dict


@dataclass(frozen=True)
class MarketModel:
    """Geometric Lévy market driven by ``exponent``.

    ``lam`` is the risk-aversion parameter (``lambda`` in JSON), ``sigma`` the
    volatility relative to the driving process and ``dividend`` a proportional
    dividend rate.
    """

    exponent: Exponent
    r: float = 0.0
    lam: float = 0.5
    sigma: float = 1.0
    s0: float = 1.0
    dividend: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError("sigma must be positive")
        if self.lam < 0.0:
            raise ParameterError("lambda must be non-negative")
        if not self.s0 > 0.0:
            raise ParameterError("s0 must be positive")
        if self.dividend < 0.0:
            raise ParameterError("dividend rate must be non-negative")
        dom = self.exponent.domain
        dom.check(-self.lam, "-lambda")
        dom.check(self.sigma, "sigma")
        dom.check(self.sigma - self.lam, "sigma - lambda")

    @property
    def martingale_exponent(self) -> float:
        """Volatility of the deflated price ``pi_t S_t``, i.e. ``sigma - lambda``."""
        return self.sigma - self.lam

    def to_dict(self) -> dict:
        return {"exponent": self.exponent.to_dict(), "r": self.r, "lambda": self.lam, "sigma": self.sigma,
                "s0": self.s0, "dividend": self.dividend}

    @classmethod
    def from_dict(cls, d) -> "MarketModel":
        try:
            return cls(exponent=exponent_from_dict(d["exponent"]), r=float(d.get("r", 0.0)),
                       lam=float(d["lambda"]), sigma=float(d.get("sigma", 1.0)), s0=float(d.get("s0", 1.0)),
                       dividend=float(d.get("dividend", 0.0)))
        except KeyError as exc:
            raise ParameterError(f"model JSON is missing {exc}") from None


def excess_return(model: MarketModel) -> float:
    """``R(lambda, sigma) = psi(sigma) + psi(-lambda) - psi(sigma - lambda)``."""
    psi = model.exponent
    return psi(model.sigma) + psi(-model.lam) - psi(model.sigma - model.lam)


def excess_return_integral(model: MarketModel) -> float:
    """Excess return from the Lévy measure, ``∫(e^{sx}-1)(1-e^{-lx}) nu(dx) + l s v``.

    ``v`` is the Gaussian coefficient; the measure integral alone is the jump part.
    """
    meas = model.exponent.measure
    if meas is None:
        raise UnsupportedError(f"{model.exponent.kind} exponent exposes no Lévy measure")
    s, lam = model.sigma, model.lam

    def kernel(x):
        return np.expm1(s * x) * -np.expm1(-lam * x)

    jumps = meas.atom_sum(kernel) + meas.integrate(kernel)
    return jumps + lam * s * (model.exponent.gaussian_var or 0.0)


def pricing_kernel_at(model: MarketModel, xi, t):
    """``pi_t = exp(-r t - lambda xi_t - psi(-lambda) t)``."""
    xi = np.asarray(xi, dtype=float)
    out = np.exp(-model.r * t - model.lam * xi - model.exponent(-model.lam) * t)
    return float(out) if out.ndim == 0 else out


def asset_price_at(model: MarketModel, xi, t):
    """Non-dividend asset ``S_t = S_0 exp(r t + R t + sigma xi_t - psi(sigma) t)``."""
    if model.dividend != 0.0:
        raise ParameterError("asset_price_at is for non-dividend assets; use dividend_asset_price_at")
    return dividend_asset_price_at(model, xi, t)


def dividend_asset_price_at(model: MarketModel, xi, t):
    """``S_t = S_0 exp((r - delta) t + R t + sigma xi_t - psi(sigma) t)``."""
    xi = np.asarray(xi, dtype=float)
    growth = (model.r - model.dividend + excess_return(model) - model.exponent(model.sigma)) * t
    out = model.s0 * np.exp(growth + model.sigma * xi)
    return float(out) if out.ndim == 0 else out


def natural_numeraire_at(model: MarketModel, xi, t):
    """Growth-optimal portfolio ``zeta_t = 1 / pi_t`` (with ``zeta_0 = 1``)."""
    k = pricing_kernel_at(model, xi, t)
    return 1.0 / k


def log_power_price(model: MarketModel, q, T: float):
    """Log of the power-payoff price; ``inf`` where the price is infinite."""
    q = np.asarray(q, dtype=float)
    arg = q * model.sigma - model.lam
    finite = model.exponent.domain.contains(arg)
    qs = np.where(finite, q, 0.0)
    d0 = np.real(model.exponent._d0(qs, model.sigma, model.lam))
    out = qs * math.log(model.s0) + (qs - 1.0) * model.r * T + d0 * T
    out = np.where(finite, out, np.inf)
    return float(out) if out.ndim == 0 else out


def power_price(model: MarketModel, q, T: float):
    """``H_0(q) = E[pi_T S_T^q]``; ``math.inf`` outside the finiteness interval."""
    if not T > 0.0:
        raise ParameterError("maturity must be positive")
    lp = log_power_price(model, q, T)
    out = np.exp(lp)
    return float(out) if np.ndim(out) == 0 else out


def power_price_domain(model: MarketModel) -> tuple[float, float]:
    """Open interval ``((beta + lambda)/sigma, (gamma + lambda)/sigma)`` of finite prices."""
    dom = model.exponent.domain
    return (dom.beta + model.lam) / model.sigma, (dom.gamma + model.lam) / model.sigma


def log_imaginary_power_price(model: MarketModel, q, T: float):
    q = np.asarray(q, dtype=float)
    iq = 1j * q
    d0 = model.exponent._d0(iq, model.sigma, model.lam)
    return iq * math.log(model.s0) + model.r * (iq - 1.0) * T + d0 * T


def imaginary_power_price(model: MarketModel, q, T: float):
    """``F_0(q) = E[pi_T S_T^{iq}]``; real and imaginary parts price the cos/sin payoffs."""
    if not T > 0.0:
        raise ParameterError("maturity must be positive")
    if model.dividend != 0.0:
        raise ParameterError("imaginary power prices are defined for the non-dividend asset")
    out = np.exp(log_imaginary_power_price(model, q, T))
    return complex(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------- #
# Sampled curves
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class PriceCurve:
    """Sampled power-payoff prices ``{(q, H_0(q))}``; infinite prices carry ``finite=False``."""

    maturity: float
    q: np.ndarray
    log_price: np.ndarray
    provenance: str = "closed_form"
    finite: np.ndarray = field(default=None)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        lp = np.asarray(self.log_price, dtype=float)
        if q.shape != lp.shape or q.ndim != 1:
            raise ParameterError("q and log_price must be 1-d arrays of equal length")
        # NaN marks an unusable (e.g. non-positive) finite price and is left for consumers to reject
        finite = ~np.isposinf(lp) if self.finite is None else np.asarray(self.finite, dtype=bool) & ~np.isposinf(lp)
        if self.provenance not in ("closed_form", "from_calls", "external"):
            raise ParameterError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "log_price", np.where(finite, lp, np.inf))
        object.__setattr__(self, "finite", finite)

    @property
    def price(self) -> np.ndarray:
        return np.exp(self.log_price)

    @classmethod
    def from_prices(cls, maturity, q, price, provenance="external", finite=None) -> "PriceCurve":
        price = np.asarray(price, dtype=float)
        fin = np.isfinite(price) if finite is None else np.asarray(finite, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = np.where(fin & (price > 0), np.log(np.where(price > 0, price, 1.0)), np.nan)
        lp = np.where(fin & ~(price > 0), np.nan, lp)
        lp = np.where(fin, lp, np.inf)
        return cls(maturity, np.asarray(q, dtype=float), lp, provenance, fin)


@dataclass(frozen=True, eq=False)
class ImaginaryPriceCurve:
    maturity: float
    q: np.ndarray
    price: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "price", np.asarray(self.price, dtype=complex))


def sample_power_curve(model: MarketModel, q_grid, T: float) -> PriceCurve:
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    if q.size == 0:
        raise ParameterError("q grid is empty")
    if not T > 0.0:
        raise ParameterError("maturity must be positive")
    return PriceCurve(T, q, np.atleast_1d(log_power_price(model, q, T)), "closed_form")


def sample_imaginary_curve(model: MarketModel, q_grid, T: float) -> ImaginaryPriceCurve:
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    if q.size == 0:
        raise ParameterError("q grid is empty")
    return ImaginaryPriceCurve(T, q, np.atleast_1d(imaginary_power_price(model, q, T)))


def default_q_grid(model: MarketModel, n: int = 201, cap: tuple[float, float] = (-3.0, 4.0),
                   fraction: float = 0.9) -> np.ndarray:
    """Uniform grid of ``n`` points with step ``1/k`` covering the middle ``fraction`` of B.

    Infinite endpoints of B are replaced by ``cap``.  Both 0 and 1 are grid
    nodes, as the normalisation of the data function needs them.
    """
    lo, hi = power_price_domain(model)
    lo_c, hi_c = max(lo, cap[0]), min(hi, cap[1])
    mid, half = 0.5 * (lo_c + hi_c), 0.5 * (hi_c - lo_c) * fraction
    w_lo, w_hi = min(mid - half, 0.0), max(mid + half, 1.0)
    k = max(1, int(math.floor((n - 1) / (w_hi - w_lo))))
    start = int(round(0.5 * (w_lo + w_hi) * k - 0.5 * (n - 1)))
    start = min(start, 0)
    start = max(start, k - (n - 1))
    grid = (start + np.arange(n)) / k
    inside = (grid > lo) & (grid < hi)
    if not inside.all():
        raise DomainError(f"cannot fit {n} nodes of step 1/{k} inside B=({lo}, {hi})")
    return grid
