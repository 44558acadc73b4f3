"""Lévy exponents, Lévy measures and the transforms acting on them.

An exponent ``psi`` satisfies ``E[exp(alpha * xi_t)] = exp(psi(alpha) * t)`` for
``alpha`` in an open interval ``A = (beta, gamma)`` containing the origin, and
extends analytically to the strip ``Re(z) in A``.  Every exponent object in this
module is immutable; evaluation is a pure function of the arguments.

Catalog processes (Brownian, Poisson, compound Poisson, gamma, variance gamma)
are evaluated in closed form.  ``FromTriplet`` evaluates the Lévy-Khinchin
integral by adaptive Gauss-Kronrod quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import ActivityError, DomainError, NumericalError, ParameterError, UnsupportedError

INF = math.inf
SERIES_CROSSOVER = 1e-4  # |alpha x| below this uses the power series of e^{ax}-1-ax
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
QUAD_FAIL_BOUND = 1e-8


# --------------------------------------------------------------------------- #
# Domains
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ExponentDomain:
    """Open interval ``(beta, gamma)`` with ``beta < 0 < gamma``; endpoints may be infinite."""

    beta: float = -INF
    gamma: float = INF

    def __post_init__(self):
        if not (self.beta < 0.0 < self.gamma):
            raise ParameterError(f"domain ({self.beta}, {self.gamma}) must contain 0 in its interior")

    def contains(self, x):
        x = np.asarray(x)
        return (x > self.beta) & (x < self.gamma)

    def check(self, x, name: str = "alpha") -> None:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return
        lo, hi = np.min(x), np.max(x)
        if not lo > self.beta:
            raise DomainError(f"{name}={lo!r} is not above the lower endpoint {self.beta!r}", lo, self.beta)
        if not hi < self.gamma:
            raise DomainError(f"{name}={hi!r} is not below the upper endpoint {self.gamma!r}", hi, self.gamma)

    def shifted(self, delta: float) -> "ExponentDomain":
        """Domain of ``alpha -> psi(alpha + delta)``."""
        return ExponentDomain(self.beta - delta, self.gamma - delta)

    def scaled(self, sigma: float) -> "ExponentDomain":
        """Domain of ``alpha -> psi(sigma * alpha)`` for ``sigma > 0``."""
        return ExponentDomain(self.beta / sigma, self.gamma / sigma)

    def window(self, cap: float = 5.0, fraction: float = 1.0) -> tuple[float, float]:
        """Finite sub-interval: endpoints capped at ``±cap`` then shrunk towards 0 by ``fraction``."""
        lo = max(self.beta, -cap) * fraction
        hi = min(self.gamma, cap) * fraction
        return lo, hi

    def interior_grid(self, n: int, cap: float = 5.0, fraction: float = 1.0) -> np.ndarray:
        lo, hi = self.window(cap, fraction)
        return np.linspace(lo, hi, n + 2)[1:-1]

    def to_list(self) -> list:
        return [self.beta, self.gamma]


REAL_LINE = ExponentDomain()


# --------------------------------------------------------------------------- #
# Lévy measures
# --------------------------------------------------------------------------- #


def _quad(fn, a: float, b: float) -> tuple[float, float]:
    if a == b:
        return 0.0, 0.0
    val, err, info = integrate.quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400, full_output=1)[:3]
    return val, err


def _split_points(lo: float, hi: float, extra: Sequence[float] = ()) -> list[float]:
    pts = {lo, hi}
    for p in (-1.0, 0.0, 1.0, *extra):
        if lo < p < hi:
            pts.add(p)
    return sorted(pts)


@dataclass(frozen=True, eq=False)
class LevyMeasureSpec:
    """Lévy measure: finitely many atoms plus an optional density.

    ``density`` must accept numpy arrays and vanish outside ``support``.
    ``singularity_order`` declares the density's blow-up ``|x|^-order`` at the
    origin (0 for a bounded density); orders ``>= 1`` mean infinite activity.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    density: Callable[[np.ndarray], np.ndarray] | None = None
    singularity_order: float = 0.0
    support: tuple[float, float] = (-INF, INF)

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for x, m in atoms:
            if x == 0.0:
                raise ParameterError("a Lévy measure carries no mass at the origin")
            if m < 0.0:
                raise ParameterError(f"atom mass {m} at {x} is negative")
        if self.density is not None:
            if self.singularity_order >= 3.0:
                raise ParameterError("a density of order |x|^-3 or worse at 0 does not integrate 1∧x²")
            check = self.integrate(lambda x: np.minimum(1.0, x * x))
            if not math.isfinite(check):
                raise ParameterError("density does not integrate 1∧x²")

    @property
    def is_zero(self) -> bool:
        return self.density is None and all(m == 0.0 for _, m in self.atoms)

    @property
    def finite_activity(self) -> bool:
        return self.density is None or self.singularity_order < 1.0

    def integrate(self, fn, lo: float = -INF, hi: float = INF, extra_splits: Sequence[float] = ()) -> float:
        """``∫ fn(x) density(x) dx`` over ``(lo, hi)`` intersected with the support (density part only)."""
        if self.density is None:
            return 0.0
        lo = max(lo, self.support[0])
        hi = min(hi, self.support[1])
        if not lo < hi:
            return 0.0
        dens = self.density
        total, err = 0.0, 0.0
        pts = _split_points(lo, hi, extra_splits)
        def integrand(x):
            d = float(dens(x))
            # far tails: the density underflows before fn overflows
            return 0.0 if d == 0.0 else float(fn(x) * d)

        for a, b in zip(pts[:-1], pts[1:]):
            with np.errstate(over="ignore", invalid="ignore"):
                v, e = _quad(integrand, a, b)
            total += v
            err += e
        if not math.isfinite(total) or err > QUAD_FAIL_BOUND * max(1.0, abs(total)):
            raise NumericalError(f"Lévy-measure quadrature did not converge (estimate {total}, bound {err})",
                                 estimate=total, bound=err)
        return total

    def atom_sum(self, fn) -> float:
        return float(sum(m * fn(x) for x, m in self.atoms))

    def total_mass(self) -> float:
        if not self.finite_activity:
            return INF
        return self.atom_sum(lambda x: 1.0) + self.integrate(lambda x: 1.0)

    def tilted(self, delta: float) -> "LevyMeasureSpec":
        """The measure ``e^{delta x} nu(dx)``."""
        dens = self.density

        def new_density(x):
            x = np.asarray(x, dtype=float)
            d = np.asarray(dens(x), dtype=float)
            pos = d > 0
            # log-space product so that e^{delta x} overflow never meets an underflowed density
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(pos, np.exp(delta * x + np.log(np.where(pos, d, 1.0))), 0.0)

        return LevyMeasureSpec(
            atoms=tuple((x, m * math.exp(delta * x)) for x, m in self.atoms),
            density=None if dens is None else new_density,
            singularity_order=self.singularity_order,
            support=self.support,
        )

    def scaled(self, sigma: float) -> "LevyMeasureSpec":
        """Image measure under ``x -> sigma x``."""
        dens = self.density
        new_density = None if dens is None else (lambda y: dens(np.asarray(y) / sigma) / sigma)
        return LevyMeasureSpec(
            atoms=tuple((sigma * x, m) for x, m in self.atoms),
            density=new_density,
            singularity_order=self.singularity_order,
            support=(self.support[0] * sigma, self.support[1] * sigma),
        )


@dataclass(frozen=True)
class LevyTriplet:
    """``(drift, gaussian_var, measure)`` in the truncated convention ``1{|x|<1}``."""

    drift: float = 0.0
    gaussian_var: float = 0.0
    measure: LevyMeasureSpec = field(default_factory=LevyMeasureSpec)

    def __post_init__(self):
        if self.gaussian_var < 0.0:
            raise ParameterError("gaussian_var must be non-negative")


def _compensated(z, x):
    """``e^{zx} - 1 - zx 1{|x|<1}`` with the small-argument series below the crossover."""
    zx = z * x
    small = abs(zx) < SERIES_CROSSOVER
    if small:
        body = zx * zx * (0.5 + zx * (1.0 / 6.0 + zx / 24.0))
        return body if abs(x) < 1.0 else body + zx
    if abs(x) < 1.0:
        return np.expm1(zx) - zx
    return np.expm1(zx)


def _lk_integral(measure: LevyMeasureSpec, z: complex | float, real: bool) -> complex | float:
    atoms = measure.atom_sum(lambda x: _compensated(z, x))
    if measure.density is None:
        return atoms
    extra = () if z == 0 else (SERIES_CROSSOVER / abs(z), -SERIES_CROSSOVER / abs(z))
    if real:
        dens = measure.integrate(lambda x: _compensated(z, x), extra_splits=extra)
        return atoms + dens
    re = measure.integrate(lambda x: complex(_compensated(z, x)).real, extra_splits=extra)
    im = measure.integrate(lambda x: complex(_compensated(z, x)).imag, extra_splits=extra)
    return atoms + complex(re, im)


def check_exp_moment_condition(measure: LevyMeasureSpec, alpha: float) -> bool:
    """Whether ``∫_{|x|>1} e^{alpha x} nu(dx)`` is finite.

    Tail integrals are computed over dyadic shells ``[2^k, 2^{k+1}]`` out to
    4096; the integral is declared convergent when the shell contributions decay
    geometrically and the extrapolated remainder is negligible.  Trailing shells
    where the density has underflowed to zero are ignored, so the decision rests
    on the last shells that carry mass.  A side with bounded support converges.
    """
    if measure.density is None:
        return True
    dens = measure.density
    total = 0.0
    tails = []
    for sign in (1.0, -1.0):
        lo_s, hi_s = measure.support
        if (sign > 0 and hi_s <= 1.0) or (sign < 0 and lo_s >= -1.0):
            continue
        bounded = math.isfinite(hi_s) if sign > 0 else math.isfinite(lo_s)

        def g(y, sign=sign):
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                d = dens(np.asarray(sign * y))
                return float(np.exp(alpha * sign * y + np.log(d)))

        shells = []
        for k in range(12):
            a, b = 2.0**k, 2.0 ** (k + 1)
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    v, _ = _quad(g, a, b)
                except (OverflowError, FloatingPointError):
                    return False
            if not math.isfinite(v):
                return False
            shells.append(v)
        total += sum(shells)
        if not bounded:
            while shells and shells[-1] == 0.0:
                shells.pop()
            tails.append(shells)
    for shells in tails:
        if len(shells) < 2:
            continue
        last, prev = shells[-1], shells[-2]
        if last <= 1e-300:
            continue
        ratio = last / prev if prev > 0 else INF
        if not ratio < 0.9:
            return False
        if last * ratio / (1.0 - ratio) > 1e-6 * max(1.0, total):
            return False
    return True


def jump_rate(measure: LevyMeasureSpec, interval: tuple[float, float]) -> float:
    """``nu((a, b])``: expected number of jumps per unit time with size in ``(a, b]``."""
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        return 0.0
    if a < 0.0 <= b and not measure.finite_activity:
        raise ActivityError(f"interval ({a}, {b}] touches the origin of an infinite-activity measure")
    atoms = sum(m for x, m in measure.atoms if a < x <= b)
    return atoms + measure.integrate(lambda x: 1.0, a, b)


def exponent_from_triplet(triplet: LevyTriplet, alpha: float) -> float:
    """Real Lévy-Khinchin exponent ``p a + v a²/2 + ∫(e^{ax}-1-ax1{|x|<1}) nu(dx)``."""
    if not check_exp_moment_condition(triplet.measure, alpha):
        raise DomainError(f"exponential moment of order {alpha} is infinite", alpha)
    alpha = float(alpha)
    return triplet.drift * alpha + 0.5 * triplet.gaussian_var * alpha * alpha + float(
        _lk_integral(triplet.measure, alpha, real=True))


def exponent_from_triplet_complex(triplet: LevyTriplet, z: complex) -> complex:
    z = complex(z)
    return triplet.drift * z + 0.5 * triplet.gaussian_var * z * z + complex(_lk_integral(triplet.measure, z, real=False))


# --------------------------------------------------------------------------- #
# Compound-Poisson jump laws
# --------------------------------------------------------------------------- #


class JumpLaw:
    """Distribution of an individual compound-Poisson jump."""

    law = "abstract"
    domain: tuple[float, float] = (-INF, INF)
    atoms: tuple[tuple[float, float], ...] = ()
    lattice: float | None = None

    def mgf(self, z):
        raise NotImplementedError

    def density(self, x):
        return None

    def sample_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(JumpLaw):
    size: float = 1.0
    law = "point"

    def __post_init__(self):
        if self.size == 0.0:
            raise ParameterError("point-mass jump size must be non-zero")

    @property
    def atoms(self):
        return ((self.size, 1.0),)

    @property
    def lattice(self):
        return self.size

    def mgf(self, z):
        return np.exp(np.asarray(z) * self.size)

    def sample_sum(self, rng, counts):
        return self.size * counts.astype(float)

    def to_dict(self):
        return {"law": "point", "size": self.size}


@dataclass(frozen=True)
class NormalJumps(JumpLaw):
    mean: float = 0.0
    var: float = 1.0
    law = "normal"

    def __post_init__(self):
        if self.var <= 0.0:
            raise ParameterError("normal jump variance must be positive")

    def mgf(self, z):
        z = np.asarray(z)
        return np.exp(z * self.mean + 0.5 * self.var * z * z)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x - self.mean) ** 2 / self.var) / math.sqrt(2.0 * math.pi * self.var)

    def sample_sum(self, rng, counts):
        counts = counts.astype(float)
        z = rng.standard_normal(counts.shape)
        return self.mean * counts + np.sqrt(self.var * counts) * z

    def to_dict(self):
        return {"law": "normal", "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class DoubleExponential(JumpLaw):
    """Up-jumps Exp(eta_up) with probability ``p_up``, down-jumps Exp(eta_down) otherwise."""

    p_up: float = 0.5
    eta_up: float = 10.0
    eta_down: float = 10.0
    law = "double_exponential"

    def __post_init__(self):
        if not (0.0 <= self.p_up <= 1.0) or self.eta_up <= 0.0 or self.eta_down <= 0.0:
            raise ParameterError("double-exponential jumps need 0<=p_up<=1 and positive rates")

    @property
    def domain(self):
        return (-self.eta_down, self.eta_up)

    def mgf(self, z):
        z = np.asarray(z)
        return self.p_up * self.eta_up / (self.eta_up - z) + (1.0 - self.p_up) * self.eta_down / (self.eta_down + z)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        up = self.p_up * self.eta_up * np.exp(-self.eta_up * np.abs(x))
        down = (1.0 - self.p_up) * self.eta_down * np.exp(-self.eta_down * np.abs(x))
        return np.where(x >= 0.0, up, down)

    def sample_sum(self, rng, counts):
        ups = rng.binomial(counts, self.p_up)
        downs = counts - ups
        return rng.standard_gamma(ups.astype(float)) / self.eta_up - rng.standard_gamma(downs.astype(float)) / self.eta_down

    def to_dict(self):
        return {"law": "double_exponential", "p_up": self.p_up, "eta_up": self.eta_up, "eta_down": self.eta_down}


def jump_law_from_dict(d: Mapping) -> JumpLaw:
    d = dict(d)
    law = d.pop("law")
    try:
        cls = {"point": PointMass, "normal": NormalJumps, "double_exponential": DoubleExponential}[law]
    except KeyError:
        raise ParameterError(f"unknown jump law {law!r}") from None
    return cls(**{k: float(v) for k, v in d.items()})


# --------------------------------------------------------------------------- #
# Exponents
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ZeroJump:
    """Finite-activity pure-jump structure: ``xi_t = drift*t`` with probability ``exp(-rate*t)``.

    ``lattice`` is set when every jump has the same size, so that ``xi_t`` lives
    on ``drift*t + lattice*N``.
    """

    drift: float
    rate: float
    lattice: float | None = None


class Exponent:
    """Lévy exponent with its moment domain.

    Subclasses implement ``_psi`` on complex numpy arrays without domain checks.
    """

    kind = "abstract"
    domain: ExponentDomain = REAL_LINE

    def _psi(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _psi_real(self, x: np.ndarray) -> np.ndarray:
        return self._psi(x.astype(complex)).real

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        self.domain.check(a)
        out = self._psi_real(a)
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_complex(self, z):
        z = np.asarray(z, dtype=complex)
        self.domain.check(z.real, "Re(z)")
        out = self._psi(z)
        return complex(out) if np.ndim(out) == 0 else out

    # Combination psi(q s - l) + (q-1) psi(-l) - q psi(s - l) entering power prices.
    # Overridden where an exact simplification exists (drift cancellation, Brownian).
    def _d0(self, q, sigma: float, lam: float):
        q = np.asarray(q)
        return self._psi(q * sigma - lam + 0j) + (q - 1.0) * self._psi(np.asarray(-lam + 0j)) - q * self._psi(
            np.asarray(sigma - lam + 0j))

    @property
    def measure(self) -> LevyMeasureSpec | None:
        return None

    @property
    def gaussian_var(self) -> float | None:
        return None

    @property
    def zero_jump(self) -> ZeroJump | None:
        return None

    def triplet(self) -> LevyTriplet:
        raise UnsupportedError(f"{self.kind} exponent has no stored Lévy triplet")

    def sample(self, rng: np.random.Generator, dt: float, size: int) -> np.ndarray:
        raise UnsupportedError(f"no exact sampler for {self.kind} exponents")

    def check_convexity(self, n: int = 101, tol: float = 1e-9) -> bool:
        grid = self.domain.interior_grid(n)
        vals = self(grid)
        return bool(np.all(vals[:-2] - 2.0 * vals[1:-1] + vals[2:] >= -tol))

    def to_dict(self) -> dict:
        raise UnsupportedError(f"{self.kind} exponents are not serializable")

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict().get('params', {})})"


class Brownian(Exponent):
    kind = "brownian"
    domain = REAL_LINE

    def _psi(self, z):
        return 0.5 * z * z

    def _psi_real(self, x):
        return 0.5 * x * x

    def _d0(self, q, sigma, lam):
        q = np.asarray(q)
        return 0.5 * sigma * sigma * q * (q - 1.0)

    @property
    def measure(self):
        return LevyMeasureSpec()

    @property
    def gaussian_var(self):
        return 1.0

    def triplet(self):
        return LevyTriplet(0.0, 1.0, LevyMeasureSpec())

    def sample(self, rng, dt, size):
        return math.sqrt(dt) * rng.standard_normal(size)

    def to_dict(self):
        return {"kind": "brownian", "params": {}}

    def __eq__(self, other):
        return type(other) is Brownian

    def __hash__(self):
        return hash("brownian")


def _positive(name, value):
    value = float(value)
    if not value > 0.0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True, repr=False)
class Poisson(Exponent):
    m: float = 1.0
    kind = "poisson"

    def __post_init__(self):
        object.__setattr__(self, "m", _positive("m", self.m))

    @property
    def domain(self):
        return REAL_LINE

    def _psi(self, z):
        return self.m * np.expm1(z)

    def _psi_real(self, x):
        return self.m * np.expm1(x)

    @property
    def measure(self):
        return LevyMeasureSpec(atoms=((1.0, self.m),))

    @property
    def gaussian_var(self):
        return 0.0

    @property
    def zero_jump(self):
        return ZeroJump(0.0, self.m, 1.0)

    def triplet(self):
        return LevyTriplet(0.0, 0.0, self.measure)

    def sample(self, rng, dt, size):
        return rng.poisson(self.m * dt, size).astype(float)

    def to_dict(self):
        return {"kind": "poisson", "params": {"m": self.m}}


@dataclass(frozen=True, repr=False)
class CompoundPoisson(Exponent):
    m: float = 1.0
    jumps: JumpLaw = field(default_factory=lambda: NormalJumps(0.0, 1.0))
    kind = "compound_poisson"

    def __post_init__(self):
        object.__setattr__(self, "m", _positive("m", self.m))

    @property
    def domain(self):
        return ExponentDomain(*self.jumps.domain)

    def _psi(self, z):
        return self.m * (self.jumps.mgf(z) - 1.0)

    @property
    def measure(self):
        law = self.jumps
        dens = law.density(np.zeros(1))
        density = None if dens is None else (lambda x, law=law, m=self.m: m * law.density(x))
        return LevyMeasureSpec(atoms=tuple((x, self.m * p) for x, p in law.atoms), density=density)

    @property
    def gaussian_var(self):
        return 0.0

    @property
    def zero_jump(self):
        return ZeroJump(0.0, self.m, self.jumps.lattice)

    def triplet(self):
        meas = self.measure
        drift = meas.atom_sum(lambda x: x if abs(x) < 1.0 else 0.0) + meas.integrate(lambda x: x, -1.0, 1.0)
        return LevyTriplet(drift, 0.0, meas)

    def sample(self, rng, dt, size):
        counts = rng.poisson(self.m * dt, size)
        return self.jumps.sample_sum(rng, counts)

    def to_dict(self):
        return {"kind": "compound_poisson", "params": {"m": self.m, "jumps": self.jumps.to_dict()}}


@dataclass(frozen=True, repr=False)
class GammaProcess(Exponent):
    """Gamma subordinator with rate ``m`` and unit scale: ``psi(a) = -m log(1-a)``."""

    m: float = 1.0
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "m", _positive("m", self.m))

    @property
    def domain(self):
        return ExponentDomain(-INF, 1.0)

    def _psi(self, z):
        return -self.m * np.log1p(-z)

    def _psi_real(self, x):
        return -self.m * np.log1p(-x)

    @property
    def measure(self):
        m = self.m
        return LevyMeasureSpec(density=lambda x: m * np.exp(-x) / x, singularity_order=1.0, support=(0.0, INF))

    @property
    def gaussian_var(self):
        return 0.0

    def triplet(self):
        return LevyTriplet(self.m * (1.0 - math.exp(-1.0)), 0.0, self.measure)

    def sample(self, rng, dt, size):
        return rng.standard_gamma(self.m * dt, size)

    def to_dict(self):
        return {"kind": "gamma", "params": {"m": self.m}}


@dataclass(frozen=True, repr=False)
class VarianceGamma(Exponent):
    """Symmetric variance gamma: ``psi(a) = -m log(1 - a²/(2m²))``, ``|a| < sqrt(2) m``.

    Realised as the difference of two independent gamma processes with rate
    ``m`` and scale ``1/(sqrt(2) m)``.
    """

    m: float = 1.0
    kind = "variance_gamma"

    def __post_init__(self):
        object.__setattr__(self, "m", _positive("m", self.m))

    @property
    def scale(self) -> float:
        return 1.0 / (math.sqrt(2.0) * self.m)

    @property
    def domain(self):
        edge = math.sqrt(2.0) * self.m
        return ExponentDomain(-edge, edge)

    def _psi(self, z):
        s = self.scale
        return -self.m * (np.log1p(-s * z) + np.log1p(s * z))

    def _psi_real(self, x):
        return -self.m * np.log1p(-x * x / (2.0 * self.m * self.m))

    @property
    def measure(self):
        m, k = self.m, math.sqrt(2.0) * self.m
        return LevyMeasureSpec(density=lambda x: m * np.exp(-k * np.abs(x)) / np.abs(x), singularity_order=1.0)

    @property
    def gaussian_var(self):
        return 0.0

    def triplet(self):
        return LevyTriplet(0.0, 0.0, self.measure)

    def sample(self, rng, dt, size):
        g1 = rng.standard_gamma(self.m * dt, size)
        g2 = rng.standard_gamma(self.m * dt, size)
        return self.scale * (g1 - g2)

    def to_dict(self):
        return {"kind": "variance_gamma", "params": {"m": self.m}}


def _derive_domain(measure: LevyMeasureSpec, cap: float = 64.0) -> ExponentDomain:
    ends = []
    for sign in (-1.0, 1.0):
        if check_exp_moment_condition(measure, sign * cap):
            ends.append(sign * INF)
            continue
        lo, hi = 0.0, cap
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if check_exp_moment_condition(measure, sign * mid):
                lo = mid
            else:
                hi = mid
        ends.append(sign * lo)
    return ExponentDomain(ends[0], ends[1])


@dataclass(frozen=True, repr=False, eq=False)
class FromTriplet(Exponent):
    """Exponent given by a Lévy triplet, evaluated by quadrature.

    Without an explicit ``moment_domain`` the domain is located by bisection on
    the exponential-moment condition (``±inf`` beyond 64).
    """

    source: LevyTriplet
    moment_domain: ExponentDomain | None = None
    kind = "triplet"

    def __post_init__(self):
        if self.moment_domain is None:
            dom = REAL_LINE if self.source.measure.density is None else _derive_domain(self.source.measure)
            object.__setattr__(self, "moment_domain", dom)

    @property
    def domain(self):
        return self.moment_domain

    def _psi(self, z):
        z = np.asarray(z, dtype=complex)
        flat = [exponent_from_triplet_complex(self.source, v) for v in z.ravel()]
        return np.array(flat, dtype=complex).reshape(z.shape)

    def _psi_real(self, x):
        x = np.asarray(x, dtype=float)
        t = self.source
        flat = [t.drift * v + 0.5 * t.gaussian_var * v * v + float(_lk_integral(t.measure, float(v), real=True))
                for v in x.ravel()]
        return np.array(flat, dtype=float).reshape(x.shape)

    @property
    def measure(self):
        return self.source.measure

    @property
    def gaussian_var(self):
        return self.source.gaussian_var

    @property
    def zero_jump(self):
        meas = self.source.measure
        if self.source.gaussian_var > 0.0 or not meas.finite_activity:
            return None
        small = meas.atom_sum(lambda x: x if abs(x) < 1.0 else 0.0) + meas.integrate(lambda x: x, -1.0, 1.0)
        lattice = meas.atoms[0][0] if meas.density is None and len(meas.atoms) == 1 else None
        return ZeroJump(self.source.drift - small, meas.total_mass(), lattice)

    def triplet(self):
        return self.source

    def sample(self, rng, dt, size):
        t = self.source
        zj = self.zero_jump
        if t.measure.is_zero:
            return t.drift * dt + math.sqrt(t.gaussian_var * dt) * rng.standard_normal(size)
        if zj is not None and zj.lattice is not None:
            return zj.drift * dt + zj.lattice * rng.poisson(zj.rate * dt, size)
        raise UnsupportedError("exact sampling is only available for Gaussian or single-atom triplets")

    def to_dict(self):
        t = self.source
        if t.measure.density is not None:
            raise UnsupportedError("triplets with a density are not serializable")
        return {"kind": "triplet", "params": {"drift": t.drift, "gaussian_var": t.gaussian_var,
                                               "atoms": [list(a) for a in t.measure.atoms]}}


# --------------------------------------------------------------------------- #
# Transforms
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, repr=False)
class Esscher(Exponent):
    """Esscher tilt: ``psi_d(a) = psi(a + d) - psi(d)``."""

    base: Exponent
    tilt: float
    kind = "esscher"

    @property
    def domain(self):
        return self.base.domain.shifted(self.tilt)

    def _psi(self, z):
        return self.base._psi(np.asarray(z) + self.tilt) - self.base._psi(np.asarray(self.tilt + 0j))

    def _psi_real(self, x):
        return self.base._psi_real(np.asarray(x) + self.tilt) - self.base._psi_real(np.asarray(float(self.tilt)))

    def _d0(self, q, sigma, lam):
        return self.base._d0(q, sigma, lam - self.tilt)

    @property
    def measure(self):
        meas = self.base.measure
        return None if meas is None else meas.tilted(self.tilt)

    @property
    def gaussian_var(self):
        return self.base.gaussian_var

    @property
    def zero_jump(self):
        zj = self.base.zero_jump
        if zj is None:
            return None
        d = self.tilt
        rate = zj.rate + float(self.base._psi_real(np.asarray(float(d)))) - zj.drift * d
        return ZeroJump(zj.drift, rate, zj.lattice)

    def to_dict(self):
        return {"kind": "esscher", "params": {"base": self.base.to_dict(), "tilt": self.tilt}}


@dataclass(frozen=True, repr=False)
class DriftShift(Exponent):
    """``psi(a) + eps a``: the exponent of ``xi_t + eps t``."""

    base: Exponent
    eps: float
    kind = "drift_shift"

    @property
    def domain(self):
        return self.base.domain

    def _psi(self, z):
        return self.base._psi(z) + self.eps * np.asarray(z)

    def _psi_real(self, x):
        return self.base._psi_real(x) + self.eps * np.asarray(x)

    def _d0(self, q, sigma, lam):
        return self.base._d0(q, sigma, lam)

    @property
    def measure(self):
        return self.base.measure

    @property
    def gaussian_var(self):
        return self.base.gaussian_var

    @property
    def zero_jump(self):
        zj = self.base.zero_jump
        return None if zj is None else ZeroJump(zj.drift + self.eps, zj.rate, zj.lattice)

    def sample(self, rng, dt, size):
        return self.base.sample(rng, dt, size) + self.eps * dt

    def to_dict(self):
        return {"kind": "drift_shift", "params": {"base": self.base.to_dict(), "eps": self.eps}}


@dataclass(frozen=True, repr=False)
class Rescaled(Exponent):
    """``psi(sigma a)``: the exponent of ``sigma xi_t``."""

    base: Exponent
    sigma: float
    kind = "rescale"

    @property
    def domain(self):
        return self.base.domain.scaled(self.sigma)

    def _psi(self, z):
        return self.base._psi(self.sigma * np.asarray(z))

    def _psi_real(self, x):
        return self.base._psi_real(self.sigma * np.asarray(x))

    def _d0(self, q, sigma, lam):
        return self.base._d0(q, sigma * self.sigma, lam * self.sigma)

    @property
    def measure(self):
        meas = self.base.measure
        return None if meas is None else meas.scaled(self.sigma)

    @property
    def gaussian_var(self):
        v = self.base.gaussian_var
        return None if v is None else v * self.sigma**2

    @property
    def zero_jump(self):
        zj = self.base.zero_jump
        if zj is None:
            return None
        lattice = None if zj.lattice is None else zj.lattice * self.sigma
        return ZeroJump(zj.drift * self.sigma, zj.rate, lattice)

    def sample(self, rng, dt, size):
        return self.sigma * self.base.sample(rng, dt, size)

    def to_dict(self):
        return {"kind": "rescale", "params": {"base": self.base.to_dict(), "sigma": self.sigma}}


# --------------------------------------------------------------------------- #
# Functional API
# --------------------------------------------------------------------------- #

_CATALOG = {
    "brownian": lambda p: Brownian(),
    "poisson": lambda p: Poisson(p.get("m", 1.0)),
    "compound_poisson": lambda p: CompoundPoisson(p.get("m", 1.0), _jumps_param(p.get("jumps"))),
    "gamma": lambda p: GammaProcess(p.get("m", 1.0)),
    "variance_gamma": lambda p: VarianceGamma(p.get("m", 1.0)),
}
_ALIASES = {"vg": "variance_gamma", "cp": "compound_poisson", "bm": "brownian"}


def _jumps_param(j) -> JumpLaw:
    if j is None:
        return NormalJumps(0.0, 1.0)
    if isinstance(j, JumpLaw):
        return j
    return jump_law_from_dict(j)


def make_catalog_process(kind: str, params: Mapping | None = None, **kwargs) -> Exponent:
    """Build a catalog exponent, e.g. ``make_catalog_process("gamma", m=1)``."""
    p = dict(params or {})
    p.update(kwargs)
    key = _ALIASES.get(kind.lower(), kind.lower())
    try:
        builder = _CATALOG[key]
    except KeyError:
        raise ParameterError(f"unknown process kind {kind!r}") from None
    return builder(p)


def eval_exponent(spec: Exponent, alpha):
    return spec(alpha)


def eval_exponent_complex(spec: Exponent, z):
    return spec.evaluate_complex(z)


def esscher(spec: Exponent, delta: float) -> Exponent:
    delta = float(delta)
    if not spec.domain.contains(delta):
        spec.domain.check(delta, "tilt")
    if delta == 0.0:
        return spec
    if isinstance(spec, Esscher):
        return Esscher(spec.base, spec.tilt + delta)
    return Esscher(spec, delta)


def drift_shift(spec: Exponent, epsilon: float) -> Exponent:
    epsilon = float(epsilon)
    if epsilon == 0.0:
        return spec
    return DriftShift(spec, epsilon)


def rescale(spec: Exponent, sigma: float) -> Exponent:
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ParameterError(f"rescaling factor must be positive, got {sigma}")
    if sigma == 1.0:
        return spec
    return Rescaled(spec, sigma)


def exponent_from_dict(d: Mapping) -> Exponent:
    """Inverse of ``Exponent.to_dict``: ``{"kind": ..., "params": {...}}``."""
    try:
        kind = d["kind"]
    except (KeyError, TypeError):
        raise ParameterError("exponent JSON needs a 'kind' field") from None
    p = dict(d.get("params", {}))
    if kind in ("esscher", "drift_shift", "rescale"):
        base = exponent_from_dict(p["base"])
        if kind == "esscher":
            return Esscher(base, float(p["tilt"]))
        if kind == "drift_shift":
            return DriftShift(base, float(p["eps"]))
        return Rescaled(base, float(p["sigma"]))
    if kind == "triplet":
        measure = LevyMeasureSpec(atoms=tuple(tuple(a) for a in p.get("atoms", ())))
        return FromTriplet(LevyTriplet(float(p.get("drift", 0.0)), float(p.get("gaussian_var", 0.0)), measure))
    if kind == "recovered":
        from .recovery import RecoveredExponent

        return RecoveredExponent.from_params(p)
    return make_catalog_process(kind, p)
