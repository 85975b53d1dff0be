"""Small-time expansion of heat traces, cutoff moments and kernel scaling.

The heat trace of an order-``m`` cone operator over an ``n``-dimensional
cross-section has the form

    Tr e^{-tA} ~ sum_k C_k t^{(k-n-1)/m} + sum_k C'_k t^{k/m} log t,

and :class:`HeatTraceExpansion` fits finitely many of these terms to
sampled traces by column-scaled least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from ._errors import ConditioningError, TailBoundError

__all__ = [
    "ExpansionBasis",
    "ExpansionFit",
    "HeatTraceExpansion",
    "fit_heat_trace",
    "residual_order",
    "ResidualOrder",
    "CutoffFunction",
    "CutoffMoment",
    "cutoff_moment",
    "KernelScalingResult",
    "twisted_homogeneity_residual",
]

MAX_CONDITION = 1e12
_MERGE_TOL = 1e-12


# ---------------------------------------------------------------------------
# basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionBasis:
    """Power exponents ``(k-n-1)/m`` for ``k < K`` and log exponents ``k/m`` for ``k < K_log``.

    ``extra_exponents`` adds further pure powers; any that coincide with an
    existing power are merged into one column.  Log columns are never merged
    with power columns.
    """

    m: int
    n: int
    K: int
    K_log: int = 0
    extra_exponents: tuple = ()

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if self.K < 0 or self.K_log < 0:
            raise ValueError("term counts must be nonnegative")

    @property
    def exponents(self) -> list[float]:
        raw = [(k - self.n - 1) / self.m for k in range(self.K)]
        raw += [float(e) for e in self.extra_exponents]
        merged: list[float] = []
        for e in raw:
            if all(abs(e - f) > _MERGE_TOL for f in merged):
                merged.append(e)
        return merged

    @property
    def log_exponents(self) -> list[float]:
        return [k / self.m for k in range(self.K_log)]

    @property
    def n_columns(self) -> int:
        return len(self.exponents) + len(self.log_exponents)

    def design(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        cols = [t**e for e in self.exponents]
        cols += [t**e * np.log(t) for e in self.log_exponents]
        return np.column_stack(cols) if cols else np.zeros((t.size, 0))

    def next_exponent(self) -> float:
        return (self.K - self.n - 1) / self.m

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "K": self.K, "K_log": self.K_log}


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------


def _solve_scaled(X: np.ndarray, y: np.ndarray, max_condition: float):
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    Xs = X / norms
    sv = np.linalg.svd(Xs, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else math.inf
    if cond > max_condition:
        raise ConditioningError(
            f"design condition number {cond:.3g} exceeds {max_condition:.3g}; "
            "use fewer terms or a wider t-grid")
    beta, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    return beta / norms, cond


class HeatTraceExpansion(RegressorMixin, BaseEstimator):
    """Least-squares fit of the small-time heat-trace expansion.

    Parameters
    ----------
    m, n : int
        Operator order and cross-section dimension.
    K : int
        Number of power terms ``t^{(k-n-1)/m}``.
    K_log : int
        Number of log terms ``t^{k/m} log t``.
    weighting : {"none", "relative"}
        ``"relative"`` divides each row by the sample magnitude so the
        dominant ``t^{-(n+1)/m}`` term does not swamp the rest.
    max_condition : float
        Refuse fits whose column-scaled design is worse conditioned.

    Attributes
    ----------
    coef_ : ndarray
        Power coefficients in the order of ``exponents_``.
    log_coef_ : ndarray
        Log coefficients in the order of ``log_exponents_``.
    condition_ : float
        Condition number of the column-scaled (and weighted) design.
    """

    def __init__(self, m=2, n=1, K=3, K_log=0, weighting="relative", max_condition=MAX_CONDITION):
        self.m = m
        self.n = n
        self.K = K
        self.K_log = K_log
        self.weighting = weighting
        self.max_condition = max_condition

    def _basis(self) -> ExpansionBasis:
        return ExpansionBasis(self.m, self.n, self.K, self.K_log)

    def fit(self, t, y):
        t = check_array(np.asarray(t, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        check_consistent_length(t, y)
        if np.any(t <= 0):
            raise ValueError("t must be positive")
        if self.weighting not in ("none", "relative"):
            raise ValueError("weighting must be 'none' or 'relative'")
        basis = self._basis()
        if t.size < 2 * basis.n_columns:
            raise ValueError(f"need at least {2 * basis.n_columns} samples for "
                             f"{basis.n_columns} columns")
        X = basis.design(t)
        w = np.ones_like(y)
        scale = float(np.max(np.abs(y))) if y.size else 0.0
        if self.weighting == "relative" and scale > 0:
            w = 1.0 / np.maximum(np.abs(y), 1e-300 + 1e-14 * scale)
        if scale == 0.0:
            coef = np.zeros(basis.n_columns)
            _, cond = _solve_scaled(X, y, self.max_condition)
        else:
            coef, cond = _solve_scaled(X * w[:, None], y * w, self.max_condition)
        npow = len(basis.exponents)
        self.exponents_ = np.array(basis.exponents)
        self.log_exponents_ = np.array(basis.log_exponents)
        self.coef_ = coef[:npow]
        self.log_coef_ = coef[npow:]
        self.condition_ = cond
        self.t_ = t
        self.residual_ = y - X @ coef
        return self

    def predict(self, t):
        check_is_fitted(self, "coef_")
        t = np.asarray(t, dtype=float).ravel()
        X = self._basis().design(t)
        return X @ np.concatenate([self.coef_, self.log_coef_])

    def partial_predict(self, t, n_terms: int):
        """Sum of the first ``n_terms`` power terms only."""
        check_is_fitted(self, "coef_")
        t = np.asarray(t, dtype=float).ravel()
        out = np.zeros_like(t)
        for e, c in zip(self.exponents_[:n_terms], self.coef_[:n_terms]):
            out += c * t**e
        return out


@dataclass(frozen=True, eq=False)
class ExpansionFit:
    basis: ExpansionBasis
    exponents: np.ndarray
    coefficients: np.ndarray
    log_exponents: np.ndarray
    log_coefficients: np.ndarray
    condition: float
    t: np.ndarray
    data: np.ndarray
    model: np.ndarray
    residual: np.ndarray
    estimator: HeatTraceExpansion = field(repr=False)

    def coefficient(self, exponent: float) -> float:
        idx = np.nonzero(np.abs(self.exponents - exponent) < 1e-12)[0]
        if idx.size == 0:
            raise KeyError(f"no power column with exponent {exponent}")
        return float(self.coefficients[idx[0]])

    def to_json(self, residual_slope=None) -> dict:
        return {
            "exponents": [float(e) for e in self.exponents],
            "coefficients": [float(c) for c in self.coefficients],
            "log_exponents": [float(e) for e in self.log_exponents],
            "log_coefficients": [float(c) for c in self.log_coefficients],
            "condition": float(self.condition),
            "residual_slope": residual_slope,
        }


def _unpack(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    samples = list(samples)
    t = np.array([s.t for s in samples], dtype=float)
    y = np.array([s.value for s in samples], dtype=float)
    tail = np.array([s.tail_bound for s in samples], dtype=float)
    return t, y, tail


def fit_heat_trace(samples, basis: ExpansionBasis, weighting: str = "relative",
                   tail_tol: float = 1e-10, max_condition: float = MAX_CONDITION) -> ExpansionFit:
    """Fit ``basis`` to heat-trace samples (objects with ``t``, ``value``, ``tail_bound``)."""
    t, y, tail = _unpack(samples)
    if np.any(tail > tail_tol):
        raise TailBoundError(f"sample tail bounds up to {tail.max():.3g} exceed {tail_tol:g}")
    est = HeatTraceExpansion(basis.m, basis.n, basis.K, basis.K_log, weighting, max_condition)
    if basis.extra_exponents:
        raise ValueError("extra exponents are not supported by the estimator")
    est.fit(t, y)
    model = est.predict(t)
    return ExpansionFit(basis, est.exponents_, est.coef_, est.log_exponents_, est.log_coef_,
                        est.condition_, t, y, model, y - model, est)


@dataclass(frozen=True)
class ResidualOrder:
    status: str  # "ok" | "saturated"
    slope: float | None
    expected: float | None = None


def residual_order(samples, fit: ExpansionFit, n_terms: int | None = None,
                   window: float = 0.5, noise: float = 1e-11) -> ResidualOrder:
    """Log-log slope of the residual against ``t``.

    With ``n_terms`` set, the residual is the data minus only the first
    ``n_terms`` fitted power terms, so a fit carrying extra terms yields
    stable coefficients for the subtracted part; the slope then estimates
    the exponent of term ``n_terms``.  The regression uses the smallest
    ``window`` fraction of the ``t`` values.  Residuals below ``noise``
    times the data scale are reported as ``"saturated"``.
    """
    t, y, _ = _unpack(samples)
    if n_terms is None:
        resid = y - fit.estimator.predict(t)
        expected = fit.basis.next_exponent()
    else:
        if not 0 <= n_terms <= len(fit.exponents):
            raise ValueError("n_terms out of range")
        resid = y - fit.estimator.partial_predict(t, n_terms)
        expected = (n_terms - fit.basis.n - 1) / fit.basis.m
    order = np.argsort(t)
    t, resid, y = t[order], resid[order], y[order]
    keep = max(3, int(round(window * t.size)))
    t, resid, yk = t[:keep], resid[:keep], y[:keep]
    floor = noise * max(float(np.max(np.abs(yk))), 1e-300)
    if np.any(np.abs(resid) <= floor):
        return ResidualOrder("saturated", None, expected)
    slope = float(np.polyfit(np.log(t), np.log(np.abs(resid)), 1)[0])
    return ResidualOrder("ok", slope, expected)


# ---------------------------------------------------------------------------
# cutoff moments
# ---------------------------------------------------------------------------


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth ``omega`` equal to 1 on ``[0, inner]`` and 0 on ``[outer, inf)``."""

    inner: float = 1.0
    outer: float = 2.0

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        a = _psi(self.outer - r)
        b = _psi(r - self.inner)
        out = a / (a + b)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class CutoffMoment:
    numeric: float
    closed_form: float
    constant: float
    log_branch: bool

    @property
    def difference(self) -> float:
        return abs(self.numeric - self.closed_form)


def _quad(f, a, b, points=None) -> float:
    val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=400, points=points)
    return float(val)


def cutoff_moment(omega: CutoffFunction, j: float, nu: float, tau: float) -> CutoffMoment:
    """``tau^nu int_tau^inf omega(r) r^{j-nu-1} dr`` by quadrature and in closed form.

    The closed form is ``C tau^nu - tau^j/(j - nu)`` for ``nu != j`` and
    ``C tau^nu - tau^j log(tau)`` for ``nu == j``, where ``C`` collects the
    ``tau``-independent part: ``int_1^inf omega r^{j-nu-1} dr`` plus
    ``1/(j - nu)`` when ``nu != j``.  This needs ``omega = 1`` on
    ``[tau, 1]``, hence ``omega.inner >= 1``.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if omega.inner < 1:
        raise ValueError("the closed form needs omega = 1 on [0, 1]")
    a = j - nu - 1.0

    def integrand(r):
        return omega(r) * r**a

    numeric = tau**nu * _quad(integrand, tau, omega.outer, points=[omega.inner])
    tail = _quad(integrand, 1.0, omega.outer, points=[omega.inner] if omega.inner > 1 else None)
    log_branch = abs(j - nu) < 1e-14
    if log_branch:
        C = tail
        closed = C * tau**nu - tau**j * math.log(tau)
    else:
        C = tail + 1.0 / (j - nu)
        # (tau^nu - tau^j)/(j - nu) through expm1: stable as nu approaches j
        delta = nu - j
        closed = tail * tau**nu - tau**j * math.expm1(delta * math.log(tau)) / delta
    return CutoffMoment(float(numeric), float(closed), float(C), log_branch)


# ---------------------------------------------------------------------------
# twisted homogeneity of kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelScalingResult:
    max_deviation: float
    evaluated: int
    skipped: int


def twisted_homogeneity_residual(kernel: Callable, mu: float, d: int,
                                 samples: Iterable[Sequence], taus=(2.0, 5.0),
                                 zero_tol: float = 1e-300) -> KernelScalingResult:
    """Largest relative violation of ``k(tau^d lam, r, r') = tau^{mu+1} k(lam, tau r, tau r')``.

    Samples where the left side vanishes are skipped and counted.
    """
    worst = 0.0
    evaluated = skipped = 0
    for lam, r, rp in samples:
        for tau in taus:
            lhs = complex(kernel(tau**d * lam, r, rp))
            rhs = tau ** (mu + 1) * complex(kernel(lam, tau * r, tau * rp))
            if abs(lhs) <= zero_tol:
                skipped += 1
                continue
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
            evaluated += 1
    return KernelScalingResult(worst, evaluated, skipped)
