"""Fourier replication of log-price payoffs by imaginary power payoffs.

A payoff ``f(log S_T)`` with transform ``g(q) = (2 pi)^{-1/2} ∫ e^{-iqx} f(x) dx``
is priced as ``H0 = (2 pi)^{-1/2} ∫ F0(q) g(q) dq``, with ``F0`` the price of
the imaginary power payoff ``S_T^{iq}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import erf

from .errors import NumericalError, ParameterError
from .market import MarketModel, imaginary_power_price

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
TRANSFORM_TOL = 1e-9
Q_CAP = 200.0
G_FLOOR = 1e-12
REALNESS_TOL = 1e-9
PROBE_POINTS = (5.0, 10.0, 20.0)


def _probe_good(f: Callable) -> bool:
    """Check |f|, |f'|, |f''| times |x|^4 shrink along |x| = 5, 10, 20 on both sides."""
    h = 1e-3
    for sign in (1.0, -1.0):
        scores = []
        for r in PROBE_POINTS:
            x = sign * r
            f0, fp, fm = float(f(x)), float(f(x + h)), float(f(x - h))
            d1 = (fp - fm) / (2 * h)
            d2 = (fp - 2 * f0 + fm) / (h * h)
            scores.append(np.array([abs(f0), abs(d1), abs(d2)]) * r**4)
        s = np.array(scores)
        slack = 1e-12
        if np.any(s[1] > s[0] + slack) or np.any(s[2] > s[1] + slack):
            return False
    return True


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Payoff as a function of ``x = log S_T``.

    ``support`` bounds the region where ``f`` is non-negligible; when omitted
    it is located numerically.
    """

    f: Callable
    declared_integrable: bool = True
    declared_good: bool = False
    support: tuple[float, float] | None = None
    name: str = "custom"
    table: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.declared_good and not _probe_good(self.f):
            raise ParameterError(f"payoff {self.name!r} is declared good but fails the decay probe")

    def __call__(self, x):
        return self.f(x)

    def located_support(self, span: float = 200.0, n: int = 40001) -> tuple[float, float]:
        if self.support is not None:
            return self.support
        x = np.linspace(-span, span, n)
        v = np.abs(np.asarray(self.f(x), dtype=float))
        top = v.max()
        if top == 0.0:
            return (0.0, 0.0)
        idx = np.flatnonzero(v > 1e-18 * top)
        step = x[1] - x[0]
        return float(x[idx[0]] - 2 * step), float(x[idx[-1]] + 2 * step)


def gaussian_payoff(a: float = 0.0, u: float = 1.0) -> PayoffSpec:
    """Normal density with mean ``a`` and variance ``u``, evaluated at log price."""
    if not u > 0:
        raise ParameterError("Gaussian payoff variance u must be positive")
    c = 1.0 / math.sqrt(2.0 * math.pi * u)
    half = 40.0 * math.sqrt(u)
    return PayoffSpec(lambda x: c * np.exp(-0.5 * (np.asarray(x) - a) ** 2 / u), True, True, (a - half, a + half),
                      f"gaussian(a={a},u={u})")


def smoothed_indicator_payoff(lo: float, hi: float, width: float = 0.1) -> PayoffSpec:
    """``1{lo < x < hi}`` smoothed with an error-function edge of scale ``width``."""
    if not (hi > lo and width > 0):
        raise ParameterError("smoothed indicator needs hi > lo and width > 0")
    pad = 40.0 * width

    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (erf((x - lo) / width) - erf((x - hi) / width))

    return PayoffSpec(f, True, True, (lo - pad, hi + pad), f"indicator(lo={lo},hi={hi},w={width})")


def tabulated_payoff(x, values) -> PayoffSpec:
    """Linear interpolation of tabulated ``(x, f)``; zero outside the table."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != v.shape or x.size < 2 or not np.all(np.diff(x) > 0):
        raise ParameterError("tabulated payoff needs increasing x and matching values")

    def f(z):
        return np.interp(z, x, v, left=0.0, right=0.0)

    return PayoffSpec(f, True, False, (float(x[0]), float(x[-1])), "tabulated", (x, v))


# --------------------------------------------------------------------------- #
# Transforms
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class TransformSpec:
    """Fourier transform ``g`` (vectorised over ``q``); Hermitian for real payoffs."""

    g: Callable
    provenance: str = "closed_form"
    hermitian: bool = True

    def __post_init__(self):
        if self.provenance not in ("closed_form", "quadrature"):
            raise ParameterError(f"unknown provenance {self.provenance!r}")

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = np.asarray(self.g(q), dtype=complex)
        return complex(out) if out.ndim == 0 else out

    def combine(self, other: "TransformSpec", a: float = 1.0, b: float = 1.0) -> "TransformSpec":
        prov = "closed_form" if self.provenance == other.provenance == "closed_form" else "quadrature"
        return TransformSpec(lambda q: a * np.asarray(self.g(q)) + b * np.asarray(other.g(q)), prov,
                             self.hermitian and other.hermitian)


def _weighted_quad(f, lo, hi, q, weight):
    if q == 0.0:
        if weight == "sin":
            return 0.0, 0.0
        return integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=500)
    return integrate.quad(f, lo, hi, weight=weight, wvar=q, epsabs=1e-12, epsrel=1e-12, limit=500)


def fourier_transform(payoff: PayoffSpec, q) -> complex | np.ndarray:
    """``g(q) = (2 pi)^{-1/2} ∫ e^{-iqx} f(x) dx`` by oscillatory quadrature.

    Computed at ``|q|`` and conjugated for ``q < 0`` so that Hermitian symmetry
    holds exactly.
    """
    if not payoff.declared_integrable:
        raise ParameterError(f"payoff {payoff.name!r} is not integrable; its Fourier transform does not exist")
    if payoff.table is not None:
        # piecewise linear: integrate each segment exactly instead of across kinks
        out = _seg_call(*payoff.table, q)
        return complex(out) if np.ndim(out) == 0 else out
    lo, hi = payoff.located_support()
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(qs.shape, dtype=complex)
    if hi <= lo:
        out[:] = 0.0
        return complex(out[0]) if np.ndim(q) == 0 else out

    def fx(x):
        return float(payoff.f(x))

    for i, qi in enumerate(qs):
        w = abs(qi)
        c, ec = _weighted_quad(fx, lo, hi, w, "cos")
        s, es = _weighted_quad(fx, lo, hi, w, "sin")
        if ec + es > TRANSFORM_TOL:
            raise NumericalError(f"Fourier quadrature at q={qi} missed tolerance", estimate=complex(c, -s),
                                 bound=ec + es)
        val = INV_SQRT_2PI * complex(c, -s)
        out[i] = val if qi >= 0 else val.conjugate()
    return complex(out[0]) if np.ndim(q) == 0 else out


def gaussian_transform(a: float = 0.0, u: float = 1.0) -> TransformSpec:
    """Closed form for the Gaussian payoff: ``(2 pi)^{-1/2} e^{-q^2 u / 2} e^{-iqa}``."""
    if not u > 0:
        raise ParameterError("u must be positive")
    return TransformSpec(lambda q: INV_SQRT_2PI * np.exp(-0.5 * np.asarray(q) ** 2 * u - 1j * np.asarray(q) * a))


def _segment_transform(x: np.ndarray, v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact transform of the piecewise-linear interpolant of ``(x, v)`` (zero outside)."""
    m = 0.5 * (x[1:] + x[:-1])
    w = 0.5 * np.diff(x)
    vbar = 0.5 * (v[1:] + v[:-1])
    slope = np.diff(v) / np.diff(x)
    out = np.empty(q.shape, dtype=complex)
    for i, qi in enumerate(q):
        th = qi * w
        even = 2.0 * w * np.sinc(th / np.pi)
        # ∫_{-w}^{w} t sin(q t) dt = 2 w^2 (sin th - th cos th) / th^2, series near 0
        small = np.abs(th) < 1e-3
        ths = np.where(small, 1.0, th)
        odd = np.where(small, 2.0 * w * w * th * (1.0 / 3.0 - th * th / 30.0),
                       2.0 * w * w * (np.sin(ths) - ths * np.cos(ths)) / ths**2)
        out[i] = np.sum(np.exp(-1j * qi * m) * (vbar * even - 1j * slope * odd))
    return INV_SQRT_2PI * out


def _trapezoid_transform(x: np.ndarray, fx: np.ndarray, q: np.ndarray) -> np.ndarray:
    h = x[1] - x[0]
    wts = np.full(x.size, h)
    wts[[0, -1]] *= 0.5
    out = np.empty(q.shape, dtype=complex)
    chunk = max(1, 2_000_000 // x.size)
    for s in range(0, q.size, chunk):
        qs = q[s:s + chunk]
        out[s:s + chunk] = np.exp(-1j * np.outer(qs, x)) @ (wts * fx)
    return INV_SQRT_2PI * out


def transform_from_payoff(payoff: PayoffSpec, probe_q: float = 50.0, tol: float = 1e-11,
                          max_points: int = 1 << 20) -> TransformSpec:
    """Vectorised transform of ``payoff`` for use in portfolios.

    Tabulated payoffs are integrated exactly segment by segment.  Otherwise the
    trapezoid rule on the support is refined by step halving until two levels
    agree to ``tol`` on ``|q| <= probe_q``; for smooth decaying payoffs the rule
    converges geometrically.
    """
    if not payoff.declared_integrable:
        raise ParameterError(f"payoff {payoff.name!r} is not integrable")
    if payoff.table is not None:
        x, v = payoff.table
        return TransformSpec(lambda q: _seg_call(x, v, q), "quadrature")
    lo, hi = payoff.located_support()
    if hi <= lo:
        return TransformSpec(lambda q: np.zeros(np.shape(q), dtype=complex), "quadrature")
    probe = np.linspace(0.0, probe_q, 101)
    n = 2049
    x = np.linspace(lo, hi, n)
    prev = _trapezoid_transform(x, np.asarray(payoff.f(x), float), probe)
    while True:
        n = 2 * n - 1
        if n > max_points:
            raise NumericalError("payoff transform did not converge under step halving", bound=float(diff))
        x = np.linspace(lo, hi, n)
        fx = np.asarray(payoff.f(x), float)
        cur = _trapezoid_transform(x, fx, probe)
        diff = np.max(np.abs(cur - prev))
        if diff < tol:
            break
        prev = cur

    def g(q, x=x, fx=fx):
        q = np.asarray(q, dtype=float)
        flat = np.atleast_1d(q).ravel()
        vals = _trapezoid_transform(x, fx, np.abs(flat))
        vals = np.where(flat < 0, vals.conj(), vals)
        return vals.reshape(q.shape)

    return TransformSpec(g, "quadrature")


def _seg_call(x, v, q):
    q = np.asarray(q, dtype=float)
    flat = np.atleast_1d(q).ravel()
    vals = _segment_transform(x, v, np.abs(flat))
    vals = np.where(flat < 0, vals.conj(), vals)
    return vals.reshape(q.shape)


def inverse_transform(transform: TransformSpec, x: float, q_cap: float = Q_CAP) -> float:
    """``f(x) = (2 pi)^{-1/2} ∫ e^{iqx} g(q) dq`` using Hermitian symmetry on ``[0, Q]``."""
    Q = _truncation(transform, 1.0, q_cap)[0]
    if Q == 0.0:
        return 0.0

    def re(q):
        return (np.exp(1j * q * x) * transform(q)).real

    val, err = integrate.quad(re, 0.0, Q, epsabs=1e-12, epsrel=1e-12, limit=1000)
    if err > 1e-8:
        raise NumericalError(f"inverse transform at x={x} missed tolerance", estimate=2 * INV_SQRT_2PI * val,
                             bound=err)
    return 2.0 * INV_SQRT_2PI * val


def _truncation(transform: TransformSpec, scale, q_cap: float) -> tuple[float, float]:
    """Smallest ``Q`` beyond which ``|g| scale < 1e-12`` on a sampled grid, and a tail bound.

    ``scale`` is a constant or a function of ``q`` (the modulus of the
    imaginary power prices weighting ``g``).
    """
    q = np.arange(0.0, q_cap + 1e-12, 0.05)
    weight = scale(q) if callable(scale) else scale
    mag = np.abs(transform(q)) * weight
    above = np.flatnonzero(mag >= G_FLOOR)
    if above.size == 0:
        return 0.0, 0.0
    if above[-1] == q.size - 1:
        # envelope still large at the cap: crude tail estimate from the last decade of samples
        tail = float(np.max(mag[-200:])) * q_cap
        return q_cap, INV_SQRT_2PI * 2.0 * tail
    Q = float(q[min(above[-1] + 1, q.size - 1)])
    return Q, INV_SQRT_2PI * 2.0 * G_FLOOR * 0.05


@dataclass(frozen=True)
class Replication:
    price: float
    imag: float
    q_max: float
    tail_bound: float


def replicate_payoff(model: MarketModel, transform: TransformSpec, T: float, q_cap: float = Q_CAP,
                     tol: float = 1e-9, panel: float = 0.25, order: int = 16) -> Replication:
    """Price a payoff as a portfolio of imaginary power payoffs, ``(2 pi)^{-1/2} ∫ F0 g dq``.

    The q-integral is truncated symmetrically at ``Q``, where ``|F0 g|`` falls
    below the floor, and evaluated by composite Gauss-Legendre with panels
    summed in a fixed order.
    """
    Q, tail = _truncation(transform, lambda q: np.abs(imaginary_power_price(model, q, T)), q_cap)
    if tail > tol:
        raise NumericalError(f"Fourier portfolio tail bound {tail:.3g} exceeds {tol:.3g}", bound=tail)
    if Q == 0.0:
        return Replication(0.0, 0.0, 0.0, tail)
    n_panels = max(1, int(math.ceil(2 * Q / panel)))
    edges = np.linspace(-Q, Q, n_panels + 1)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * nodes[None, :]
    vals = imaginary_power_price(model, pts.ravel(), T).reshape(pts.shape) * transform(pts.ravel()).reshape(pts.shape)
    panel_sums = (vals @ weights) * half
    total = INV_SQRT_2PI * panel_sums.sum()
    if abs(total.imag) > REALNESS_TOL:
        raise NumericalError(f"replicated price has imaginary part {total.imag:.3g}", estimate=total,
                             bound=abs(total.imag))
    return Replication(float(total.real), float(total.imag), Q, tail)


def replicate_payoff_price(model: MarketModel, transform: TransformSpec, T: float, **kw) -> float:
    return replicate_payoff(model, transform, T, **kw).price


def gaussian_payoff_price_gbm(a: float, u: float, r: float, sigma: float, T: float, s0: float = 1.0) -> float:
    """Closed-form price of the Gaussian payoff under geometric Brownian motion.

    ``e^{-rT} (2 pi (u + v))^{-1/2} exp(-(a - b)^2 / (2 (u + v)))`` with
    ``b = log s0 + (r - sigma^2/2) T`` and ``v = sigma^2 T``.
    """
    if not u > 0:
        raise ParameterError("u must be positive")
    if not (T > 0 and sigma > 0 and s0 > 0):
        raise ParameterError("T, sigma and s0 must be positive")
    b = math.log(s0) + (r - 0.5 * sigma * sigma) * T
    v = sigma * sigma * T
    return math.exp(-r * T) / math.sqrt(2.0 * math.pi * (u + v)) * math.exp(-0.5 * (a - b) ** 2 / (u + v))


def payoff_price_from_distribution(dist, payoff: PayoffSpec, r: float, T: float) -> float:
    """Stieltjes price ``e^{-rT} ∫ f(log x) dF(x)`` on a risk-neutral distribution."""
    return math.exp(-r * T) * dist.expectation(lambda x: payoff.f(np.log(x)))
