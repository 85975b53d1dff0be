"""Expansions of parameter-dependent symbols in powers of ``lambda^{-1/d}``.

A symbol ``h(xi, rho, lambda)`` with anisotropy ``d`` is studied through
the substitution ``lambda = w^{-d}``.  For ``w`` in a fixed sheet
``D(Lambda)`` of the preimage of the sector, the function

    f(w) = w^{-mu} h(xi, rho, w^{-d})

extends smoothly to ``w = 0`` and its Taylor coefficients ``h_k`` give the
expansion ``h ~ sum_k lambda^{(-k-mu)/d} h_k``.  This module extracts those
coefficients numerically, measures the decay of the remainder, recovers
principal parts by scaling limits and samples the symbol seminorms.

The sheet used throughout is

    D(Lambda) = {w : |w| <= 1, -(2 pi - phi)/d <= arg w <= -phi/d},

so that ``arg lambda = -d arg w`` runs over ``[phi, 2 pi - phi]``.  The
ray ``arg w = -pi/d`` is mapped onto the negative real axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._io import format_number
from .spectral import Sector

__all__ = [
    "ParamSymbol",
    "WRay",
    "CoefficientTable",
    "PrincipalPart",
    "RemainderOrder",
    "SeminormReport",
    "resolvent_symbol",
    "principal_part",
    "wp_coefficients",
    "expansion_sum",
    "remainder",
    "wp_remainder_order",
    "seminorm_sample",
    "MAX_COEFFICIENTS",
]

#: Largest number of coefficients ``K`` accepted by :func:`wp_coefficients`.
MAX_COEFFICIENTS = 8

_EPS = np.finfo(float).eps


def _as_xi(xi) -> np.ndarray:
    return np.atleast_1d(np.asarray(xi, dtype=float))


@dataclass(frozen=True, eq=False)
class ParamSymbol:
    """A symbol ``h(xi, rho, lambda)`` with its declared structure.

    ``evaluator(xi, rho, lam)`` receives ``xi`` as a 1-D float array, ``rho``
    as a float and ``lam`` as a complex scalar or array; it must broadcast
    over ``lam`` and must not mutate shared state.  ``order`` is the symbol
    order of ``h`` in ``(xi, rho, lambda^{1/d})`` and ``shift`` is the power
    ``mu`` removed by the prefactor ``w^{-mu}``.  ``analytic_at_infinity``
    declares that ``h`` is holomorphic in ``lambda`` in a full neighbourhood
    of infinity; it is taken on trust and unlocks the contour-integral route
    in :func:`wp_coefficients`.  ``delta`` records the weight-line abscissa
    whose imaginary part is passed as ``rho``.
    """

    evaluator: Callable
    order: float = 0.0
    shift: float = 0.0
    d: int = 1
    sector: Sector = field(default_factory=Sector)
    analytic_at_infinity: bool = False
    delta: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not callable(self.evaluator):
            raise TypeError("evaluator must be callable")
        if self.order > 0:
            raise ValueError("the declared order must be <= 0")
        if self.shift < 0:
            raise ValueError("the shift mu must be >= 0")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("the anisotropy d must be a positive integer")
        object.__setattr__(self, "d", int(self.d))

    def __call__(self, xi, rho, lam):
        return self.evaluator(_as_xi(xi), float(rho), lam)

    @property
    def integer_shift(self) -> bool:
        return float(self.shift).is_integer()

    def theta_range(self) -> tuple[float, float]:
        """Angular extent of ``D(Lambda)``."""
        phi = self.sector.phi
        return -(2 * math.pi - phi) / self.d, -phi / self.d

    def w_power(self, w, p: float) -> np.ndarray:
        """``w^p`` on the branch continuous across ``D(Lambda)``."""
        w = np.asarray(w, dtype=complex)
        if float(p).is_integer():
            return w ** int(p)
        theta = np.angle(w)
        theta = np.where(theta > 0, theta - 2 * math.pi, theta)
        return np.abs(w) ** p * np.exp(1j * p * theta)

    def lambda_to_w(self, lam) -> np.ndarray:
        """The point ``w`` of ``D(Lambda)`` with ``w^{-d} = lambda``."""
        lam = np.asarray(lam, dtype=complex)
        arg = np.mod(np.angle(lam), 2 * math.pi)  # arg lambda in [0, 2 pi)
        return np.abs(lam) ** (-1.0 / self.d) * np.exp(-1j * arg / self.d)

    def w_function(self, xi, rho) -> Callable[[np.ndarray], np.ndarray]:
        """``w -> w^{-mu} h(xi, rho, w^{-d})`` at a fixed covariable point."""
        xi = _as_xi(xi)
        rho = float(rho)

        def f(w):
            w = np.asarray(w, dtype=complex)
            return self.w_power(w, -self.shift) * self.evaluator(xi, rho, w ** (-self.d))

        return f


def resolvent_symbol(power: int = 1, d: int = 2, offset: float = 0.0,
                     sector: Sector | None = None) -> ParamSymbol:
    """``(|xi|^2 + rho^2 + offset - lambda)^{-power}`` with shift ``mu = d * power``.

    Since ``h = O(lambda^{-power})``, the prefactor ``w^{-d power}`` makes
    ``w^{-mu} h(w^{-d}) = (q w^d - 1)^{-power}`` regular at ``w = 0``.  With
    ``d = 2`` this is the resolvent power of a Laplace-type symbol.
    """
    if power < 1 or int(power) != power:
        raise ValueError("power must be a positive integer")
    power = int(power)

    def evaluator(xi, rho, lam):
        q = float(xi @ xi) + rho * rho + offset
        return (q - np.asarray(lam, dtype=complex)) ** (-power)

    return ParamSymbol(evaluator, order=-2.0 * power, shift=float(d * power),
                       d=d, sector=sector or Sector(), analytic_at_infinity=True,
                       label=f"resolvent^{power}")


@dataclass(frozen=True)
class WRay:
    """Radii ``r_1 > r_2 > ...`` along the ray ``arg w = theta`` in ``D(Lambda)``."""

    theta: float
    radii: tuple

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ValueError("a ray needs at least one radius")
        if any(not 0 < r <= 1 for r in radii):
            raise ValueError("ray radii must lie in (0, 1]")
        if any(b >= a for a, b in zip(radii, radii[1:])):
            raise ValueError("ray radii must be strictly decreasing")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def central(cls, sym: ParamSymbol, r0: float = 0.5, levels: int = 8) -> "WRay":
        """The ray mapped onto the negative reals, with radii ``r0 2^{-j}``."""
        return cls(-math.pi / sym.d, tuple(r0 * 0.5**j for j in range(levels)))

    def validate(self, sym: ParamSymbol) -> None:
        lo, hi = sym.theta_range()
        theta = math.remainder(self.theta + math.pi, 2 * math.pi) - math.pi  # into [-2 pi, 0]
        if theta > 0:
            theta -= 2 * math.pi
        if not lo - 1e-12 <= theta <= hi + 1e-12:
            raise ValueError(f"ray angle {self.theta:.6g} does not lie in D(Lambda)")

    def points(self) -> np.ndarray:
        return np.asarray(self.radii) * np.exp(1j * self.theta)


# ---------------------------------------------------------------------------
# principal parts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrincipalPart:
    value: complex
    error: float
    converged: bool


def principal_part(sym: ParamSymbol, mu_hom: float, point, d: int | None = None,
                   powers: Sequence[int] = range(4, 13)) -> PrincipalPart:
    """``lim tau^{-mu_hom} h(tau xi, tau rho, tau^d lambda)`` as ``tau = 2^p -> inf``.

    The sequence is accelerated by a Richardson table that removes powers of
    ``1/tau`` one at a time.  The error estimate is the change between the
    last two diagonal entries; the result is flagged as not converged when
    those changes stop decreasing.
    """
    xi, rho, lam = point
    xi = _as_xi(xi)
    if lam == 0:
        raise ValueError("the scaling limit needs lambda != 0")
    d = sym.d if d is None else d
    taus = [2.0**p for p in powers]
    seq = [complex(tau ** (-mu_hom) * sym(tau * xi, tau * rho, tau**d * lam)) for tau in taus]
    table = [seq]
    for j in range(1, len(seq)):
        prev = table[-1]
        fac = 2.0**j
        table.append([(fac * prev[i + 1] - prev[i]) / (fac - 1) for i in range(len(prev) - 1)])
    diag = [col[-1] for col in table]
    changes = [abs(b - a) for a, b in zip(diag, diag[1:])]
    if not changes:
        return PrincipalPart(diag[-1], math.inf, False)
    # deep columns only amplify rounding; pick the entry after the smallest change
    best = int(np.argmin(changes))
    value = diag[best + 1]
    error = changes[best]
    noise = 16 * _EPS * max(abs(v) for v in seq)
    converged = error <= max(1e-6 * abs(value), noise) or (
        len(changes) >= 3 and changes[1] <= changes[0] and changes[2] <= changes[1])
    return PrincipalPart(complex(value), float(max(error, noise)), bool(converged))


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Coefficients ``h_k`` at sample points ``(xi, rho)``, with error estimates."""

    points: tuple
    values: np.ndarray  # (n_points, K) complex
    errors: np.ndarray  # (n_points, K)
    converged: np.ndarray  # (n_points, K) bool
    shift: float
    d: int
    method: str

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def coefficient(self, k: int, point_index: int = 0) -> complex:
        return complex(self.values[point_index, k])

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def rows(self):
        """One row ``(k, xi, rho, re, im, err)`` per coefficient and point."""
        for i, (xi, rho) in enumerate(self.points):
            for k in range(self.K):
                v = self.values[i, k]
                yield k, xi, rho, float(v.real), float(v.imag), float(self.errors[i, k])

    def to_csv(self) -> str:
        """CSV text with header ``k,xi,rho,re,im,err``.

        A vector ``xi`` is written as its components joined by ``;``.
        """
        lines = ["k,xi,rho,re,im,err"]
        for k, xi, rho, re, im, err in self.rows():
            xi_txt = ";".join(format_number(x) for x in xi)
            lines.append(",".join([str(k), xi_txt, format_number(rho), format_number(re),
                                   format_number(im), format_number(err)]))
        return "\n".join(lines) + "\n"


def _cauchy_level(f, radius: float, K: int, M: int):
    """Trapezoid rule for ``(1/2 pi i) oint f(w) w^{-k-1} dw`` on ``|w| = radius``."""
    j = np.arange(M)
    w = radius * np.exp(2j * math.pi * j / M)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = f(w)
    if not np.all(np.isfinite(vals)):
        return None, None
    coeffs = np.fft.fft(vals)[:K] / M / radius ** np.arange(K)
    noise = 64 * _EPS * float(np.max(np.abs(vals))) / radius ** np.arange(K)
    return coeffs, noise


def _cauchy_coefficients(f, K: int, radii: Sequence[float], M: int, tol: float):
    prev = None
    best = None
    for radius in radii:
        cur, noise = _cauchy_level(f, radius, K, M)
        if cur is None:
            prev = None
            continue
        if prev is not None:
            pcur, pnoise = prev
            err = np.abs(cur - pcur) + np.maximum(noise, pnoise)
            conv = err <= np.maximum(tol * np.maximum(np.abs(cur), 1.0), 2 * np.maximum(noise, pnoise))
            if best is None or np.max(err) < np.max(best[1]):
                best = (cur, err, conv)
            if np.all(conv):
                return cur, err, conv
        prev = (cur, noise)
    if best is None:
        raise ValueError("the symbol is not finite on any sampling circle")
    return best


def _arnoldi_taylor(z: np.ndarray, values: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares polynomial fit in an Arnoldi basis; returns Taylor coefficients at 0."""
    n = z.size
    Q = np.zeros((n, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(degree):
        v = z * Q[:, k]
        for _ in range(2):  # classical Gram-Schmidt with one reorthogonalization
            for j in range(k + 1):
                hj = np.vdot(Q[:, j], v) / n
                H[j, k] += hj
                v = v - hj * Q[:, j]
        H[k + 1, k] = np.linalg.norm(v) / math.sqrt(n)
        Q[:, k + 1] = v / H[k + 1, k]
    c, *_ = np.linalg.lstsq(Q, values, rcond=None)
    # monomial coefficients of the basis: q_{k+1} = (z q_k - sum_j H_jk q_j)/H_{k+1,k}
    T = np.zeros((degree + 1, degree + 1), dtype=complex)
    T[0, 0] = 1.0
    for k in range(degree):
        t = np.zeros(degree + 1, dtype=complex)
        t[1:] = T[k, :-1]
        for j in range(k + 1):
            t -= H[j, k] * T[j]
        T[k + 1] = t / H[k + 1, k]
    return c @ T


def _sector_level(sym: ParamSymbol, f, theta: float, radius: float, K: int,
                  degree: int, n_radial: int = 30, n_angular: int = 30):
    lo, hi = sym.theta_range()
    half = 0.95 * min(theta - lo, hi - theta)
    ang = theta + half * np.cos(math.pi * (np.arange(n_angular) + 0.5) / n_angular)
    rad = radius * 0.5 * (1 - np.cos(math.pi * (np.arange(n_radial) + 0.5) / n_radial))
    w = (rad[:, None] * np.exp(1j * ang[None, :])).ravel()
    vals = f(w)
    taylor = _arnoldi_taylor(w / radius, vals, degree)
    return taylor[:K] / radius ** np.arange(K)


def _sector_coefficients(sym: ParamSymbol, f, K: int, ray: WRay, degree: int, tol: float):
    if len(ray.radii) < 2:
        raise ValueError("the sector route needs two ray radii")
    # fits on consecutive radii; the pair that agrees best supplies the value
    # (from its outer radius, where the fit is best conditioned) and the estimate
    fits = [_sector_level(sym, f, ray.theta, r, K, degree) for r in ray.radii[:4]]
    best = None
    for a, b in zip(fits, fits[1:]):
        err = np.abs(a - b)
        if best is None or np.max(err) < np.max(best[1]):
            best = (a, err)
    value, err = best
    conv = err <= tol * np.maximum(np.abs(value), 1.0)
    return value, err, conv


def wp_coefficients(sym: ParamSymbol, K: int, ray: WRay | None = None, points=None,
                    method: str = "auto", tol: float = 1e-8, circle_points: int = 128,
                    degree: int = 24) -> CoefficientTable:
    """Coefficients ``h_k = (1/k!) d^k/dw^k [w^{-mu} h(xi, rho, w^{-d})]`` at ``w = 0``.

    Two routes are available.  ``"cauchy"`` evaluates the Taylor coefficients
    as contour integrals over circles ``|w| = r`` for the radii of ``ray``
    (halving from 1/2 by default) and stops once two consecutive circles
    agree; it needs ``analytic_at_infinity`` and an integer shift.
    ``"sector"`` fits a polynomial by least squares to samples inside
    ``D(Lambda)`` around the ray and compares the fits for consecutive
    radii, keeping the best-agreeing pair.  ``"auto"`` picks the contour route whenever it applies.

    ``points`` is a sequence of ``(xi, rho)`` pairs, default ``[(1, 1)]``.
    Each coefficient carries an error estimate; entries whose estimate
    exceeds ``tol`` (relative to ``max(|h_k|, 1)``) are flagged in
    ``converged``.
    """
    if not 1 <= K <= MAX_COEFFICIENTS:
        raise ValueError(f"K must lie in 1..{MAX_COEFFICIENTS}")
    if method not in ("auto", "cauchy", "sector"):
        raise ValueError(f"unknown method {method!r}")
    can_contour = sym.analytic_at_infinity and sym.integer_shift
    if method == "auto":
        method = "cauchy" if can_contour else "sector"
    if method == "cauchy" and not can_contour:
        raise ValueError("the contour route needs analytic_at_infinity and an integer shift")
    ray = ray if ray is not None else WRay.central(sym)
    ray.validate(sym)
    if points is None:
        points = [((1.0,), 1.0)]
    pts = tuple((tuple(float(x) for x in _as_xi(xi)), float(rho)) for xi, rho in points)
    values = np.zeros((len(pts), K), dtype=complex)
    errors = np.zeros((len(pts), K))
    conv = np.zeros((len(pts), K), dtype=bool)
    for i, (xi, rho) in enumerate(pts):
        f = sym.w_function(xi, rho)
        if method == "cauchy":
            v, e, c = _cauchy_coefficients(f, K, ray.radii, circle_points, tol)
        else:
            v, e, c = _sector_coefficients(sym, f, K, ray, degree, tol)
        values[i], errors[i], conv[i] = v, e, c
    return CoefficientTable(pts, values, errors, conv, float(sym.shift), sym.d, method)


# ---------------------------------------------------------------------------
# remainders
# ---------------------------------------------------------------------------


def expansion_sum(sym: ParamSymbol, table: CoefficientTable, lam, N: int,
                  point_index: int = 0) -> np.ndarray:
    """``sum_{k<N} lambda^{(-k-mu)/d} h_k`` with ``lambda^{-1/d}`` taken in ``D(Lambda)``."""
    if N > table.K:
        raise ValueError(f"the table holds only {table.K} coefficients")
    w = sym.lambda_to_w(lam)
    base = sym.w_power(w, sym.shift)
    total = np.zeros_like(w)
    for k in range(N - 1, -1, -1):  # Horner in w
        total = total * w + table.values[point_index, k]
    return base * total


def remainder(sym: ParamSymbol, table: CoefficientTable, lam, N: int,
              point_index: int = 0) -> np.ndarray:
    """``h(lambda) - sum_{k<N} lambda^{(-k-mu)/d} h_k`` at a table point."""
    xi, rho = table.points[point_index]
    h = np.asarray(sym(xi, rho, np.asarray(lam, dtype=complex)), dtype=complex)
    return h - expansion_sum(sym, table, lam, N, point_index)


@dataclass(frozen=True)
class RemainderOrder:
    status: str  # "measured" | "saturated"
    slope: float
    expected: float
    moduli: np.ndarray
    remainders: np.ndarray

    def within(self, tolerance: float) -> bool:
        """Measured slope equals the expected one up to ``tolerance``."""
        return self.status == "measured" and abs(self.slope - self.expected) <= tolerance

    def bounded(self, tolerance: float) -> bool:
        """Remainder decays at least as fast as expected (or is below noise)."""
        return self.status == "saturated" or self.slope <= self.expected + tolerance


def wp_remainder_order(sym: ParamSymbol, table: CoefficientTable, N: int, point_index: int = 0,
                       moduli: Sequence[float] | None = None, angle: float = math.pi,
                       noise: float = 1e3) -> RemainderOrder:
    """Log-log slope of ``|remainder|`` against ``|lambda|`` along ``arg lambda = angle``.

    The expected slope is ``-(N + mu)/d``.  Samples where the remainder is
    below ``noise * eps * |h|`` are rounding noise and are dropped; if fewer
    than three samples remain the status is ``"saturated"``.
    """
    if not bool(sym.sector.contains(np.exp(1j * angle))):
        raise ValueError("the lambda ray must lie in the sector")
    R = np.asarray(moduli if moduli is not None else np.geomspace(20.0, 2000.0, 16), dtype=float)
    lam = R * np.exp(1j * angle)
    xi, rho = table.points[point_index]
    h = np.asarray(sym(xi, rho, lam), dtype=complex)
    rem = np.abs(remainder(sym, table, lam, N, point_index))
    # coefficient errors bound how small a measured remainder can be trusted
    w = np.abs(sym.lambda_to_w(lam))
    coef_noise = np.zeros_like(R)
    for k in range(N):
        coef_noise += table.errors[point_index, k] * w ** (k + sym.shift)
    floor = noise * _EPS * np.abs(h) + 10 * coef_noise
    keep = rem > floor
    expected = -(N + sym.shift) / sym.d
    if np.count_nonzero(keep) < 3:
        return RemainderOrder("saturated", math.nan, expected, R, rem)
    slope = float(np.polyfit(np.log(R[keep]), np.log(rem[keep]), 1)[0])
    return RemainderOrder("measured", slope, expected, R, rem)


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeminormReport:
    """Sampled suprema of the weighted derivatives, one per ``w``."""

    w: np.ndarray
    sup: np.ndarray
    growth_slope: float
    growing: bool
    inconclusive: bool


def _central(F, x0: np.ndarray, dirs: list, steps: list):
    """Mixed central difference of ``F`` at ``x0`` along ``dirs`` (each applied once)."""
    if not dirs:
        return F(x0)
    e, hstep = dirs[0], steps[0]
    return (_central(F, x0 + hstep * e, dirs[1:], steps[1:])
            - _central(F, x0 - hstep * e, dirs[1:], steps[1:])) / (2 * hstep)


def _w_derivative(G, w: complex, k: int, step: float):
    """``d^k G / dw^k`` for holomorphic ``G`` by central differences along ``w``."""
    if k == 0:
        return G(w)
    hw = step * abs(w)
    e = w / abs(w)
    if k == 1:
        return (G(w + hw * e) - G(w - hw * e)) / (2 * hw * e)
    return (G(w + hw * e) - 2 * G(w) + G(w - hw * e)) / (hw * e) ** 2


def _weighted_sup(sym, k, nu, w, xi_grid, rho_grid, step):
    n = _as_xi(xi_grid[0]).size
    basis = list(np.eye(n + 1))
    orders = [()] + [(i,) for i in range(n + 1)] + list(itertools.combinations_with_replacement(range(n + 1), 2))
    best = 0.0
    for xi in xi_grid:
        for rho in rho_grid:
            x0 = np.concatenate([_as_xi(xi), [float(rho)]])
            bracket = math.sqrt(1.0 + float(x0 @ x0))
            for alpha in orders:
                hs = [step * bracket] * len(alpha)

                def F(x, _w=w):
                    G = lambda ww: complex(sym(x[:n], x[n], ww ** (-sym.d)))  # noqa: E731
                    return _w_derivative(G, _w, k, step)

                val = abs(_central(F, x0, [basis[i] for i in alpha], hs))
                best = max(best, val * bracket ** (-nu - k + len(alpha)))
    return best


def seminorm_sample(sym: ParamSymbol, k: int, w_values, xi_grid=None, rho_grid=None,
                    nu: float | None = None, step: float = 1e-2,
                    growth_tol: float = 0.25) -> SeminormReport:
    """Sampled ``sup_{xi, rho} <xi, rho>^{-nu-k+|alpha|+l} |d_xi^alpha d_rho^l d_w^k h(xi, rho, w^{-d})|``.

    Derivatives up to total order two in ``(xi, rho)`` and ``k <= 2`` in ``w``
    use central differences.  The growth slope is the fitted exponent of the
    suprema against ``1/|w|``; a slope above ``growth_tol`` flags the symbol
    as leaving the class.  Repeating the sample with half the step and
    seeing a change above 10% marks the report inconclusive.
    """
    if k not in (0, 1, 2):
        raise ValueError("w-derivatives are limited to order <= 2")
    nu = sym.order if nu is None else nu
    xi_grid = list(xi_grid) if xi_grid is not None else [(x,) for x in (0.0, 0.5, 2.0, 8.0, 32.0)]
    rho_grid = list(rho_grid) if rho_grid is not None else [0.0, 1.0, 4.0, 16.0]
    w = np.asarray(w_values, dtype=complex)
    lo, hi = sym.theta_range()
    ang = np.angle(w)
    ang = np.where(ang > 0, ang - 2 * math.pi, ang)
    if np.any(np.abs(w) > 1) or np.any(np.abs(w) == 0) or np.any((ang < lo - 1e-12) | (ang > hi + 1e-12)):
        raise ValueError("every sample w must lie in D(Lambda) and be nonzero")
    sup = np.array([_weighted_sup(sym, k, nu, wv, xi_grid, rho_grid, step) for wv in w])
    sup_half = np.array([_weighted_sup(sym, k, nu, wv, xi_grid, rho_grid, step / 2) for wv in w])
    scale = max(float(np.max(sup)), 1e-300)
    inconclusive = bool(np.any(np.abs(sup - sup_half) > 0.1 * np.maximum(sup, 1e-8 * scale)))
    positive = sup > 1e-14 * scale
    if np.count_nonzero(positive) >= 2 and np.ptp(np.log(np.abs(w[positive]))) > 0:
        growth = float(np.polyfit(-np.log(np.abs(w[positive])), np.log(sup[positive]), 1)[0])
    else:
        growth = 0.0
    return SeminormReport(w, sup, growth, growth > growth_tol, inconclusive)
