"""Algebra of Fuchs-type operators in a mode-diagonal representation.

An operator of order ``m`` is stored as

    A = r^{-m} sum_k a_k(r) D^k,      D = -r d/dr,

where every ``a_k`` is a power series in ``r`` truncated at a fixed order and
each series coefficient is a polynomial in ``mu``, the eigenvalue of the
cross-section operator ``-Delta_X`` on the mode the operator acts on.  Since
Laplace-type cross-section operators act diagonally on the eigenbasis of
``-Delta_X``, this representation is closed under composition.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from ._errors import (
    SingularMetricError,
    TruncationWarning,
    UnsupportedSymbolError,
)

DEFAULT_TRUNCATION = 16
_ZERO_TOL = 1e-14

__all__ = [
    "ModePolynomial",
    "RadialSeries",
    "FuchsOperator",
    "ConormalPolynomial",
    "MellinSymbol",
    "build_cone_laplacian",
    "fuchs_compose",
    "conormal",
    "mellin_symbol",
    "principal_symbol_b",
    "identity_operator",
    "euler_operator",
]


def _as_coeff_array(values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=complex)).copy()
    if arr.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    # strip trailing exact zeros but keep at least the constant term
    nz = np.nonzero(arr)[0]
    arr = arr[: nz[-1] + 1] if nz.size else arr[:1]
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# polynomials in mu
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModePolynomial:
    """Polynomial in the cross-section eigenvalue ``mu``.

    ``coefficients[j]`` multiplies ``mu**j``.
    """

    coefficients: np.ndarray

    def __init__(self, coefficients=(0.0,)):
        object.__setattr__(self, "coefficients", _as_coeff_array(coefficients))

    @classmethod
    def constant(cls, value: complex) -> "ModePolynomial":
        return cls([value])

    @classmethod
    def zero(cls) -> "ModePolynomial":
        return cls([0.0])

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coefficients) <= tol))

    def __call__(self, mu):
        # Horner; works for scalars and arrays
        mu = np.asarray(mu)
        acc = np.zeros(mu.shape, dtype=complex) + self.coefficients[-1]
        for c in self.coefficients[-2::-1]:
            acc = acc * mu + c
        return acc if acc.ndim else complex(acc)

    def __add__(self, other: "ModePolynomial") -> "ModePolynomial":
        return ModePolynomial(npoly.polyadd(self.coefficients, _mp(other).coefficients))

    def __sub__(self, other: "ModePolynomial") -> "ModePolynomial":
        return ModePolynomial(npoly.polysub(self.coefficients, _mp(other).coefficients))

    def __neg__(self) -> "ModePolynomial":
        return ModePolynomial(-self.coefficients)

    def __mul__(self, other) -> "ModePolynomial":
        if isinstance(other, ModePolynomial):
            return ModePolynomial(npoly.polymul(self.coefficients, other.coefficients))
        return ModePolynomial(self.coefficients * complex(other))

    __rmul__ = __mul__

    def allclose(self, other: "ModePolynomial", tol: float = 1e-12) -> bool:
        diff = (self - other).coefficients
        return bool(np.all(np.abs(diff) <= tol))

    def to_json(self) -> list:
        return [_complex_to_json(c) for c in self.coefficients]

    @classmethod
    def from_json(cls, data) -> "ModePolynomial":
        if isinstance(data, (int, float)):
            data = [data]
        return cls([_complex_from_json(c) for c in data])

    def __repr__(self) -> str:
        return f"ModePolynomial({np.round(self.coefficients, 14).tolist()})"


def _mp(x) -> ModePolynomial:
    return x if isinstance(x, ModePolynomial) else ModePolynomial.constant(x)


def _complex_to_json(c: complex):
    c = complex(c)
    if c.imag == 0.0:
        return float(c.real)
    return [float(c.real), float(c.imag)]


def _complex_from_json(c) -> complex:
    if isinstance(c, (list, tuple)):
        if len(c) != 2:
            raise ValueError(f"complex number must be [re, im], got {c!r}")
        return complex(float(c[0]), float(c[1]))
    return complex(float(c))


# ---------------------------------------------------------------------------
# truncated power series in r
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialSeries:
    """Power series ``sum_p c_p(mu) r^p`` truncated after ``r**truncation_order``.

    ``overflow`` records whether an arithmetic operation that produced this
    series discarded a nonzero term beyond the truncation order.
    """

    coefficients: tuple
    truncation_order: int = DEFAULT_TRUNCATION
    overflow: bool = False

    def __init__(self, coefficients: Iterable = (), truncation_order: int = DEFAULT_TRUNCATION,
                 overflow: bool = False):
        if truncation_order < 0:
            raise ValueError("truncation_order must be >= 0")
        coeffs = [_mp(c) for c in coefficients]
        if len(coeffs) > truncation_order + 1:
            if any(not c.is_zero() for c in coeffs[truncation_order + 1:]):
                overflow = True
            coeffs = coeffs[: truncation_order + 1]
        while len(coeffs) > 1 and coeffs[-1].is_zero():
            coeffs.pop()
        if not coeffs:
            coeffs = [ModePolynomial.zero()]
        object.__setattr__(self, "coefficients", tuple(coeffs))
        object.__setattr__(self, "truncation_order", int(truncation_order))
        object.__setattr__(self, "overflow", bool(overflow))

    @classmethod
    def constant(cls, value, truncation_order: int = DEFAULT_TRUNCATION) -> "RadialSeries":
        return cls([_mp(value)], truncation_order)

    @classmethod
    def from_scalars(cls, values: Sequence[complex],
                     truncation_order: int = DEFAULT_TRUNCATION) -> "RadialSeries":
        """Series whose coefficients do not depend on ``mu``."""
        return cls([ModePolynomial.constant(v) for v in values], truncation_order)

    def __len__(self) -> int:
        return len(self.coefficients)

    def at_zero(self) -> ModePolynomial:
        return self.coefficients[0]

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(c.is_zero(tol) for c in self.coefficients)

    def mu_degree(self) -> int:
        return max(c.degree for c in self.coefficients)

    def _check(self, other: "RadialSeries") -> None:
        if self.truncation_order != other.truncation_order:
            raise ValueError(
                f"truncation orders differ ({self.truncation_order} vs {other.truncation_order})")

    def __add__(self, other: "RadialSeries") -> "RadialSeries":
        self._check(other)
        n = max(len(self), len(other))
        z = ModePolynomial.zero()
        out = [(self.coefficients[p] if p < len(self) else z)
               + (other.coefficients[p] if p < len(other) else z) for p in range(n)]
        return RadialSeries(out, self.truncation_order, self.overflow or other.overflow)

    def __neg__(self) -> "RadialSeries":
        return RadialSeries([-c for c in self.coefficients], self.truncation_order, self.overflow)

    def __sub__(self, other: "RadialSeries") -> "RadialSeries":
        return self + (-other)

    def scale(self, factor) -> "RadialSeries":
        """Multiply by a scalar or by a series-independent mode polynomial."""
        return RadialSeries([c * factor for c in self.coefficients],
                            self.truncation_order, self.overflow)

    def __mul__(self, other: "RadialSeries") -> "RadialSeries":
        if not isinstance(other, RadialSeries):
            return self.scale(other)
        self._check(other)
        N = self.truncation_order
        out = [ModePolynomial.zero() for _ in range(N + 1)]
        overflow = self.overflow or other.overflow
        for p, a in enumerate(self.coefficients):
            if a.is_zero():
                continue
            for q, b in enumerate(other.coefficients):
                if b.is_zero():
                    continue
                if p + q > N:
                    overflow = True
                    continue
                out[p + q] = out[p + q] + a * b
        return RadialSeries(out, N, overflow)

    def shift(self, power: int) -> "RadialSeries":
        """Multiply by ``r**power`` (``power >= 0``)."""
        if power < 0:
            raise ValueError("negative shifts leave the power-series class")
        z = ModePolynomial.zero()
        return RadialSeries([z] * power + list(self.coefficients),
                            self.truncation_order, self.overflow)

    def derivative(self) -> "RadialSeries":
        """Term-wise ``d/dr``."""
        out = [c * p for p, c in enumerate(self.coefficients)][1:]
        return RadialSeries(out, self.truncation_order, self.overflow)

    def reciprocal(self) -> "RadialSeries":
        """``1/f`` for a series with ``mu``-independent coefficients and ``f(0) != 0``."""
        if any(c.degree > 0 for c in self.coefficients):
            raise ValueError("reciprocal only defined for mu-independent series")
        a = np.array([c.coefficients[0] for c in self.coefficients], dtype=complex)
        if abs(a[0]) <= _ZERO_TOL:
            raise SingularMetricError("series vanishes at r = 0")
        N = self.truncation_order
        b = np.zeros(N + 1, dtype=complex)
        b[0] = 1.0 / a[0]
        for p in range(1, N + 1):
            s = 0j
            for q in range(1, min(p, a.size - 1) + 1):
                s += a[q] * b[p - q]
            b[p] = -s / a[0]
        return RadialSeries.from_scalars(b, N)

    def __call__(self, r, mu):
        """Evaluate the truncated series at radius ``r`` and mode ``mu``."""
        r = np.asarray(r, dtype=float)
        acc = np.zeros(np.broadcast(r, np.asarray(mu)).shape, dtype=complex)
        for c in reversed(self.coefficients):
            acc = acc * r + c(mu)
        return acc if acc.ndim else complex(acc)

    def allclose(self, other: "RadialSeries", tol: float = 1e-12) -> bool:
        return (self - other).is_zero(tol)

    def to_json(self) -> list:
        return [c.to_json() for c in self.coefficients]

    @classmethod
    def from_json(cls, data, truncation_order: int = DEFAULT_TRUNCATION) -> "RadialSeries":
        return cls([ModePolynomial.from_json(c) for c in data], truncation_order)


# ---------------------------------------------------------------------------
# conormal polynomial
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConormalPolynomial:
    """``p(z) = sum_k c_k z^k`` attached to one cross-section mode ``mu``."""

    coefficients: np.ndarray
    mu: float = 0.0

    def __init__(self, coefficients, mu: float = 0.0):
        object.__setattr__(self, "coefficients", _as_coeff_array(coefficients))
        object.__setattr__(self, "mu", float(mu))

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, z):
        return npoly.polyval(z, self.coefficients)

    def derivative(self, order: int = 1) -> "ConormalPolynomial":
        if order == 0:
            return self
        if self.degree < order:
            return ConormalPolynomial([0.0], self.mu)
        return ConormalPolynomial(npoly.polyder(self.coefficients, order), self.mu)

    def shifted(self, a: complex) -> "ConormalPolynomial":
        """The polynomial ``z -> p(z + a)``."""
        out = np.zeros(1, dtype=complex)
        base = np.array([a, 1.0], dtype=complex)
        power = np.ones(1, dtype=complex)
        for c in self.coefficients:
            out = npoly.polyadd(out, c * power)
            power = npoly.polymul(power, base)
        return ConormalPolynomial(out, self.mu)

    def __mul__(self, other: "ConormalPolynomial") -> "ConormalPolynomial":
        return ConormalPolynomial(npoly.polymul(self.coefficients, other.coefficients), self.mu)

    def roots(self) -> np.ndarray:
        c = self.coefficients
        if c.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.asarray(npoly.polyroots(c), dtype=complex)

    def allclose(self, other: "ConormalPolynomial", tol: float = 1e-12) -> bool:
        d = npoly.polysub(self.coefficients, other.coefficients)
        return bool(np.all(np.abs(d) <= tol))


# ---------------------------------------------------------------------------
# Fuchs operators
# ---------------------------------------------------------------------------


_SIGNS = (None, "analyst", "geometer")


@dataclass(frozen=True, eq=False)
class FuchsOperator:
    """``r^{-m} sum_k a_k(r) (-r d/dr)^k`` with mode-polynomial coefficients."""

    order: int
    coeffs: tuple
    label: str = ""
    sign: str | None = None
    truncated: bool = field(default=False)

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        if len(coeffs) != self.order + 1:
            raise ValueError(f"expected {self.order + 1} coefficients, got {len(coeffs)}")
        if not all(isinstance(c, RadialSeries) for c in coeffs):
            raise TypeError("coefficients must be RadialSeries")
        orders = {c.truncation_order for c in coeffs}
        if len(orders) != 1:
            raise ValueError("all coefficients must share one truncation order")
        if coeffs[-1].is_zero():
            raise ValueError("leading coefficient a_m vanishes identically")
        if self.sign not in _SIGNS:
            raise ValueError(f"sign must be one of {_SIGNS}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "truncated",
                           bool(self.truncated or any(c.overflow for c in coeffs)))

    @property
    def truncation_order(self) -> int:
        return self.coeffs[0].truncation_order

    def conormal(self, mu: float) -> ConormalPolynomial:
        return conormal(self, mu)

    def mellin_symbol(self) -> "MellinSymbol":
        return mellin_symbol(self)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "coefficients": [a.to_json() for a in self.coeffs],
            "label": self.label,
            "sign": self.sign,
            "truncation_order": self.truncation_order,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "FuchsOperator":
        unknown = set(data) - {"order", "coefficients", "label", "sign", "truncation_order"}
        if unknown:
            raise ValueError(f"unknown operator keys: {sorted(unknown)}")
        order = int(data["order"])
        N = int(data.get("truncation_order", DEFAULT_TRUNCATION))
        coeffs = [RadialSeries.from_json(c, N) for c in data["coefficients"]]
        return cls(order, tuple(coeffs), str(data.get("label", "")), data.get("sign"))


def identity_operator(truncation_order: int = DEFAULT_TRUNCATION) -> FuchsOperator:
    return FuchsOperator(0, (RadialSeries.constant(1.0, truncation_order),), "identity")


def euler_operator(truncation_order: int = DEFAULT_TRUNCATION) -> FuchsOperator:
    """``r^{-1}(-r d/dr)``, the basic first-order Fuchs operator."""
    N = truncation_order
    return FuchsOperator(1, (RadialSeries.constant(0.0, N), RadialSeries.constant(1.0, N)),
                         "euler")


def build_cone_laplacian(cross_section, G_profile=None, sign: str = "analyst",
                         truncation_order: int = DEFAULT_TRUNCATION) -> FuchsOperator:
    """Laplacian of ``dr^2 + r^2 g_X`` with radial conformal factor ``G(r)``.

    ``cross_section`` may be an integer ``n`` or any object with an ``n``
    attribute.  ``G_profile`` is a :class:`RadialSeries` (or a sequence of
    Taylor coefficients); it defaults to ``G = 1``.  With ``sign="analyst"``
    the result is the nonpositive Laplacian, with ``"geometer"`` its negative.
    """
    n = int(getattr(cross_section, "n", cross_section))
    if n < 1:
        raise ValueError("cross-section dimension must be >= 1")
    if sign not in ("analyst", "geometer"):
        raise ValueError("sign must be 'analyst' or 'geometer'")
    N = truncation_order
    if G_profile is None:
        G = RadialSeries.constant(1.0, N)
    elif isinstance(G_profile, RadialSeries):
        G = G_profile
        if G.truncation_order != N:
            G = RadialSeries(G.coefficients, N)
    else:
        G = RadialSeries.from_scalars(list(G_profile), N)
    if abs(G.at_zero()(0.0)) <= _ZERO_TOL:
        raise SingularMetricError("G(0) = 0: the cone metric degenerates at the tip")

    # r G'/G as a power series
    rlog = (G.derivative() * G.reciprocal()).shift(1)
    a2 = RadialSeries.constant(1.0, N)
    a1 = RadialSeries.constant(-(n - 1), N) - rlog
    a0 = RadialSeries([ModePolynomial([0.0, -1.0])], N)
    coeffs = (a0, a1, a2)
    if sign == "geometer":
        coeffs = tuple(-a for a in coeffs)
    label = "cone_laplacian" if sign == "analyst" else "neg_cone_laplacian"
    return FuchsOperator(2, coeffs, label, sign)


def _shifted_D_powers(shift: float, k: int) -> list[np.ndarray]:
    """Coefficients (in ``D``) of ``(D + shift)^j`` for ``j = 0..k``."""
    out = [np.ones(1, dtype=complex)]
    base = np.array([shift, 1.0], dtype=complex)
    for _ in range(k):
        out.append(npoly.polymul(out[-1], base))
    return out


def fuchs_compose(A2: FuchsOperator, A1: FuchsOperator) -> FuchsOperator:
    """Composition ``A2 o A1``.

    Moving ``r^{p - m1}`` (from the coefficients of ``A1``) to the left
    through ``D^k`` uses ``D r^a = r^a (D - a)``, so the composite is
    ``r^{-(m1+m2)} sum r^p a2_k(r) c1_{l,p} (D + m1 - p)^k D^l``.  A warning
    (and the ``truncated`` flag) marks any series term lost to truncation.
    """
    if A1.truncation_order != A2.truncation_order:
        raise ValueError("operands must share the truncation order")
    N = A1.truncation_order
    m1, m2 = A1.order, A2.order
    m = m1 + m2
    # acc[q][p] = ModePolynomial multiplying r^p D^q
    acc = [[ModePolynomial.zero() for _ in range(N + 1)] for _ in range(m + 1)]
    overflow = A1.truncated or A2.truncated
    for l, a1 in enumerate(A1.coeffs):
        for p, c1 in enumerate(a1.coefficients):
            if c1.is_zero():
                continue
            powers = _shifted_D_powers(m1 - p, m2)
            for k, a2 in enumerate(A2.coeffs):
                poly_k = powers[k]  # (D + m1 - p)^k
                for q2, c2 in enumerate(a2.coefficients):
                    if c2.is_zero():
                        continue
                    if p + q2 > N:
                        overflow = True
                        continue
                    prod = c2 * c1
                    for i, e in enumerate(poly_k):
                        if e != 0:
                            acc[i + l][p + q2] = acc[i + l][p + q2] + prod * e
    coeffs = tuple(RadialSeries(row, N) for row in acc)
    if overflow:
        warnings.warn("composition dropped series terms beyond the truncation order",
                      TruncationWarning, stacklevel=2)
    sign = A1.sign if A1.sign == A2.sign else None
    label = f"({A2.label})*({A1.label})" if (A1.label or A2.label) else ""
    return FuchsOperator(m, coeffs, label, sign, truncated=overflow)


def conormal(A: FuchsOperator, mu: float) -> ConormalPolynomial:
    """``sum_k a_k(0)(mu) z^k``."""
    return ConormalPolynomial([a.at_zero()(mu) for a in A.coeffs], mu)


@dataclass(frozen=True)
class MellinSymbol:
    """``h(r, z) = sum_k a_k(r) z^k``; the operator is ``r^{-order} op_M(h)``."""

    order: int
    coeffs: tuple

    def __call__(self, r, z, mu):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=complex)
        vals = [a(r, mu) for a in self.coeffs]
        acc = np.zeros(np.broadcast(r, z).shape, dtype=complex)
        for v in reversed(vals):
            acc = acc * z + v
        return acc if acc.ndim else complex(acc)

    def coefficient_values(self, r, mu) -> np.ndarray:
        """Array of shape ``(order + 1, len(r))`` with ``a_k(r)`` at mode ``mu``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.array([np.broadcast_to(a(r, mu), r.shape) for a in self.coeffs])

    def at_tip(self, mu: float) -> ConormalPolynomial:
        return ConormalPolynomial([a.at_zero()(mu) for a in self.coeffs], mu)


def mellin_symbol(A: FuchsOperator) -> MellinSymbol:
    return MellinSymbol(A.order, A.coeffs)


def principal_symbol_b(A: FuchsOperator, r: float, rho: float, s: float) -> complex:
    """Rescaled principal symbol ``sigma_b(A)(r, rho, s)``.

    The cross-section covariable enters through its metric length ``s``;
    ``D`` contributes ``-i rho`` and ``mu`` contributes ``s**2``.  Only terms
    with ``k + 2j = m`` survive.  Coefficients with ``k + 2j > m`` cannot
    come from a cone differential operator and are rejected.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    m = A.order
    total = 0j
    for k, a in enumerate(A.coeffs):
        poly = ModePolynomial.zero()
        for p, c in enumerate(a.coefficients):
            poly = poly + c * (r ** p)
        for j, cj in enumerate(poly.coefficients):
            if cj == 0:
                continue
            if k + 2 * j > m and abs(cj) > _ZERO_TOL:
                raise UnsupportedSymbolError(
                    f"term mu^{j} D^{k} exceeds order {m}; not a cone operator of that order")
            if k + 2 * j == m:
                total += cj * (-1j * rho) ** k * s ** (2 * j)
    return complex(total)


def random_operator(rng: np.random.Generator, order: int, mu_degree: int = 1,
                    radial_terms: int = 3,
                    truncation_order: int = DEFAULT_TRUNCATION) -> FuchsOperator:
    """Operator with random polynomial coefficients, used for property tests."""
    coeffs = []
    for _ in range(order + 1):
        terms = [ModePolynomial(rng.normal(size=mu_degree + 1) + 1j * rng.normal(size=mu_degree + 1))
                 for _ in range(radial_terms)]
        coeffs.append(RadialSeries(terms, truncation_order))
    if coeffs[-1].is_zero():
        coeffs[-1] = RadialSeries.constant(1.0, truncation_order)
    return FuchsOperator(order, tuple(coeffs), f"random{order}")
