"""Spectral truth for exact cones and the contour representation of the heat trace.

The model is the cone ``(0, 1] x X`` with metric ``dr^2 + r^2 g_X``, the
nonnegative Laplacian, a Dirichlet condition at ``r = 1`` and the Friedrichs
extension at the tip.  Separating variables on an eigenfunction of
``-Delta_X`` with eigenvalue ``mu`` gives Bessel's equation of order
``nu = sqrt(((n-1)/2)^2 + mu)``, so the spectrum is ``{j_{nu,k}^2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh
from scipy.special import erfc, jv, jvp

from ._errors import (
    ContourError,
    ConvergenceError,
    GridTooCoarseError,
    TailBoundError,
    UnsupportedOperatorError,
)
from .fuchs_algebra import FuchsOperator, build_cone_laplacian, conormal
from .spectral import CrossSection, Sector

__all__ = [
    "ModelCone",
    "EigenvalueList",
    "HeatTraceSample",
    "Contour",
    "indicial_orders",
    "bessel_zero",
    "bessel_zeros_below",
    "eigenvalues_exact_cone",
    "eigenvalues_fd",
    "heat_trace_sum",
    "dunford_heat_trace",
]

NU_MAX = 500.0
K_MAX = 100_000


@dataclass(frozen=True)
class ModelCone:
    """Exact cone of unit radius with Dirichlet condition at ``r = 1``."""

    cross_section: CrossSection
    operator: FuchsOperator | None = None

    def __post_init__(self):
        op = self.operator
        if op is None:
            op = build_cone_laplacian(self.cross_section, sign="geometer")
            object.__setattr__(self, "operator", op)
        if op.order != 2:
            raise UnsupportedOperatorError("the oracle needs a second-order operator")
        if any(len(a.coefficients) > 1 for a in op.coeffs):
            raise UnsupportedOperatorError("the oracle needs r-independent coefficients")

    @property
    def n(self) -> int:
        return self.cross_section.n


@dataclass(frozen=True, eq=False)
class EigenvalueList:
    """Sorted eigenvalues with multiplicities, complete up to ``lambda_max``."""

    lambdas: np.ndarray
    multiplicities: np.ndarray
    lambda_max: float = math.inf
    errors: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=int)
        if lam.shape != mult.shape:
            raise ValueError("lambdas and multiplicities must align")
        order = np.argsort(lam, kind="stable")
        object.__setattr__(self, "lambdas", lam[order])
        object.__setattr__(self, "multiplicities", mult[order])
        if self.errors is not None:
            object.__setattr__(self, "errors", np.asarray(self.errors, dtype=float)[order])

    def __len__(self) -> int:
        return self.lambdas.size

    @property
    def total_count(self) -> int:
        return int(np.sum(self.multiplicities))

    def counting(self, lam) -> np.ndarray:
        """``N(lam)``: eigenvalues ``<= lam`` counted with multiplicity."""
        cum = np.concatenate([[0], np.cumsum(self.multiplicities)])
        return cum[np.searchsorted(self.lambdas, lam, side="right")]

    def expanded(self) -> np.ndarray:
        return np.repeat(self.lambdas, self.multiplicities)

    def weyl_fit(self) -> tuple[float, float]:
        """Least-squares ``N(lam) ~ a lam + b sqrt(lam)`` on the upper half of the list."""
        lam = self.lambdas
        if lam.size < 8:
            return 0.0, float(self.total_count) / max(math.sqrt(lam[-1]), 1.0) if lam.size else 0.0
        grid = np.linspace(lam[-1] / 2, lam[-1], 200)
        N = self.counting(grid)
        X = np.column_stack([grid, np.sqrt(grid)])
        (a, b), *_ = np.linalg.lstsq(X, N, rcond=None)
        return float(a), float(b)


@dataclass(frozen=True)
class HeatTraceSample:
    t: float
    value: float
    tail_bound: float


@dataclass(frozen=True)
class Contour:
    """The curve around the positive reals: two rays at angle ``+-phi`` joined by an arc.

    It comes in along ``r e^{i phi}``, runs along ``delta e^{i theta}``
    for ``theta`` from ``phi`` to ``2 pi - phi``, and leaves along
    ``r e^{-i phi}``.
    """

    phi: float = math.pi / 4
    delta: float = 0.5

    def __post_init__(self):
        Sector(self.phi, self.delta)  # validates the parameters

    @classmethod
    def from_sector(cls, sector: Sector) -> "Contour":
        return cls(sector.phi, sector.delta)


# ---------------------------------------------------------------------------
# indicial orders and Bessel zeros
# ---------------------------------------------------------------------------


def indicial_orders(model: ModelCone, count: int | None = None, mu_max: float | None = None):
    """Bessel orders ``nu_j`` of the modes, as ``(mode, nu)`` pairs.

    Select the modes either by ``count`` or by ``mu <= mu_max``.
    """
    cs = model.cross_section
    if mu_max is not None:
        modes = cs.modes_below(mu_max)
    else:
        modes = cs.modes(count if count is not None else 10)
    centre = (model.n - 1) / 2.0
    out = []
    for md in modes:
        p = conormal(model.operator, md.mu)
        roots = p.roots()
        if roots.size != 2 or np.max(np.abs(roots.imag)) > 1e-9 * (1 + np.max(np.abs(roots))):
            raise UnsupportedOperatorError(
                f"mode {md.index}: indicial roots {roots} are not real (not Laplace type)")
        r = np.sort(roots.real)
        if abs((r[0] + r[1]) / 2 - centre) > 1e-9 * (1 + abs(centre)):
            raise UnsupportedOperatorError("indicial roots are not symmetric about (n-1)/2")
        out.append((md, float((r[1] - r[0]) / 2)))
    return out


def _newton_polish(nu: float, z: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    rel = np.inf
    for _ in range(60):
        step = jv(nu, z) / jvp(nu, z)
        z_new = np.clip(z - step, lo, hi)
        rel = float(np.max(np.abs(z_new - z) / z_new))
        z = z_new
        if rel <= 8 * np.finfo(float).eps:
            return z
    if rel <= 1e-13:  # last-ulp oscillation
        return z
    raise ConvergenceError(f"Newton iteration for zeros of J_{nu} stalled at relative step {rel:.2e}")


def bessel_zeros_below(nu: float, xmax: float, step: float = 0.5) -> np.ndarray:
    """All positive zeros of ``J_nu`` below ``xmax``."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    start = max(nu, 1e-3)  # J_nu has no zeros in (0, nu]
    if xmax <= start:
        return np.zeros(0)
    x = np.arange(start, xmax + step, step)
    f = jv(nu, x)
    idx = np.nonzero(np.signbit(f[:-1]) != np.signbit(f[1:]))[0]
    if idx.size == 0:
        return np.zeros(0)
    a, b = x[idx], x[idx + 1]
    z = _newton_polish(nu, 0.5 * (a + b), a, b)
    return z[z < xmax]


def bessel_zero(nu: float, k: int) -> float:
    """The ``k``-th positive zero ``j_{nu,k}`` of ``J_nu``."""
    if not 0 <= nu <= NU_MAX:
        raise ValueError(f"nu must lie in [0, {NU_MAX}]")
    if not 1 <= k <= K_MAX:
        raise ValueError(f"k must lie in [1, {K_MAX}]")
    # McMahon's leading term overestimates modestly; widen until k zeros are bracketed
    xmax = (k + nu / 2.0 + 0.25) * math.pi + 2.0 * nu ** (1 / 3) + 10.0
    for _ in range(20):
        z = bessel_zeros_below(nu, xmax)
        if z.size >= k:
            return float(z[k - 1])
        xmax *= 1.5
    raise ConvergenceError(f"could not bracket zero {k} of J_{nu}")


def eigenvalues_exact_cone(model: ModelCone, lambda_max: float) -> EigenvalueList:
    """All ``j_{nu_j,k}^2 <= lambda_max`` over every mode."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    xmax = math.sqrt(lambda_max)
    centre2 = ((model.n - 1) / 2.0) ** 2
    cs = model.cross_section
    # j_{nu,1} > nu, so modes with nu >= sqrt(lambda_max) contribute nothing
    modes = cs.modes_below(lambda_max - centre2)
    complete = lambda_max
    if cs.is_finite and len(modes) == cs.num_modes:
        # unlisted modes have mu >= mu_last, hence eigenvalues above centre2 + mu_last
        complete = min(lambda_max, centre2 + cs.mode(cs.num_modes - 1).mu)
    lams, mults = [], []
    for md, nu in indicial_orders(model, mu_max=lambda_max - centre2):
        if nu > NU_MAX:
            raise ValueError(f"lambda_max = {lambda_max} needs Bessel orders above {NU_MAX}")
        z = bessel_zeros_below(nu, xmax)
        lams.append(z**2)
        mults.append(np.full(z.size, md.multiplicity))
    if not lams:
        return EigenvalueList(np.zeros(0), np.zeros(0, dtype=int), complete)
    return EigenvalueList(np.concatenate(lams), np.concatenate(mults), complete)


# ---------------------------------------------------------------------------
# finite-element cross-check
# ---------------------------------------------------------------------------

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(6)


def _fem_mode(n: int, mu: float, N: int, count: int) -> np.ndarray:
    """Lowest ``count`` eigenvalues of one radial mode, P1 elements, lumped mass.

    The weak form is ``int (u'v' + mu/r^2 u v) r^n dr = lam int u v r^n dr``
    on the graded grid ``r_i = (i/N)^2``.
    """
    r = (np.arange(N + 1) / N) ** 2
    a, b = r[:-1], r[1:]
    L = b - a
    # quadrature points per element, mapped from [-1, 1]
    xq = 0.5 * (a[:, None] + b[:, None]) + 0.5 * L[:, None] * _GAUSS_X[None, :]
    wq = 0.5 * L[:, None] * _GAUSS_W[None, :]
    rn = xq**n
    phi_left = (b[:, None] - xq) / L[:, None]
    phi_right = (xq - a[:, None]) / L[:, None]
    stiff = np.sum(wq * rn, axis=1) / L**2  # int r^n (1/L)^2
    pot = mu * wq * rn / xq**2
    k_ll = stiff + np.sum(pot * phi_left**2, axis=1)
    k_rr = stiff + np.sum(pot * phi_right**2, axis=1)
    k_lr = -stiff + np.sum(pot * phi_left * phi_right, axis=1)
    m_l = np.sum(wq * rn * phi_left, axis=1)
    m_r = np.sum(wq * rn * phi_right, axis=1)

    diag = np.zeros(N + 1)
    off = np.zeros(N)
    mass = np.zeros(N + 1)
    np.add.at(diag, np.arange(N), k_ll)
    np.add.at(diag, np.arange(1, N + 1), k_rr)
    off[:] = k_lr
    np.add.at(mass, np.arange(N), m_l)
    np.add.at(mass, np.arange(1, N + 1), m_r)

    # Dirichlet at r = 1; at the tip only for mu > 0 (u ~ r^nu vanishes there)
    first = 1 if mu > 0 else 0
    sl = slice(first, N)
    d, o, m = diag[sl], off[first:N - 1], mass[sl]
    if m.size < count:
        raise GridTooCoarseError(f"grid of size {N} cannot resolve {count} eigenvalues")
    # the graded grid makes ||M^{-1/2} K M^{-1/2}|| grow like N^4, so
    # bisection loses absolute accuracy at the bottom of the spectrum;
    # shift-invert Lanczos keeps relative accuracy for the small eigenvalues
    scale = 1.0 / np.sqrt(m)
    T = diags([o * scale[:-1] * scale[1:], d * scale**2, o * scale[:-1] * scale[1:]],
              [-1, 0, 1], format="csc")
    vals = eigsh(T, k=count, sigma=0.0, which="LM", return_eigenvectors=False,
                 v0=np.ones(T.shape[0]))
    return np.sort(vals)


def eigenvalues_fd(model: ModelCone, grid_size: int = 4096, count: int = 10) -> EigenvalueList:
    """Lowest ``count`` eigenvalues from a discretization, with error estimates.

    Each radial mode is solved at ``grid_size`` and ``grid_size/2``; the
    returned value is the Richardson extrapolation ``(4 l_N - l_{N/2})/3``
    and the error estimate is ``|l_N - l_{N/2}|/3``, the usual second-order
    estimate for the unextrapolated value.
    """
    if grid_size < 32 or grid_size % 2:
        raise GridTooCoarseError("grid_size must be an even number >= 32")
    if count < 1:
        raise ValueError("count must be >= 1")
    cs = model.cross_section
    centre2 = ((model.n - 1) / 2.0) ** 2
    vals, errs, mults = [], [], []
    j = 0
    bound = math.inf
    while j < cs.num_modes:
        md = cs.mode(j)
        nu2 = centre2 + md.mu
        if nu2 > bound:  # j_{nu,1}^2 > nu^2 exceeds the current count-th value
            break
        k = count
        fine = _fem_mode(model.n, md.mu, grid_size, k)
        coarse = _fem_mode(model.n, md.mu, grid_size // 2, k)
        vals.extend((4 * fine - coarse) / 3)
        errs.extend(np.abs(fine - coarse) / 3)
        mults.extend([md.multiplicity] * k)
        expanded = np.sort(np.repeat(vals, mults))
        if expanded.size >= count:
            bound = expanded[count - 1]
        j += 1
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals)[order]
    errs = np.asarray(errs)[order]
    mults = np.asarray(mults)[order]
    keep = np.cumsum(mults) - mults < count
    return EigenvalueList(vals[keep], mults[keep], float(vals[keep][-1]), errs[keep])


# ---------------------------------------------------------------------------
# heat traces
# ---------------------------------------------------------------------------


def _tail_bound(eigs: EigenvalueList, t: float, safety: float = 2.0) -> float:
    lam_max = eigs.lambda_max
    if math.isinf(lam_max):
        return 0.0
    a, b = eigs.weyl_fit()
    # int_L^inf e^{-t lam} dN for N = a lam + b sqrt(lam)
    x = t * lam_max
    first = abs(a) * math.exp(-x) / t
    second = abs(b) * 0.5 * math.sqrt(math.pi / t) * erfc(math.sqrt(x))
    return safety * (first + second)


def heat_trace_sum(eigs: EigenvalueList, t, tol: float | None = None):
    """``sum mult e^{-t lam}`` with a bound on the omitted part of the spectrum.

    ``t`` may be a scalar (returns one :class:`HeatTraceSample`) or a
    sequence (returns a list).  With ``tol`` set, a tail bound above it
    raises :class:`TailBoundError`.
    """
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    lam = eigs.lambdas
    mult = eigs.multiplicities.astype(float)
    out = []
    for tv in ts:
        terms = mult * np.exp(-tv * lam)
        value = float(math.fsum(terms))
        tail = _tail_bound(eigs, float(tv))
        if tol is not None and tail > tol:
            raise TailBoundError(
                f"tail bound {tail:.3g} at t = {tv:g} exceeds {tol:g}; raise lambda_max")
        out.append(HeatTraceSample(float(tv), value, tail))
    return out[0] if scalar else out


def _gauss_panel(f, a: float, b: float, x: np.ndarray, w: np.ndarray) -> complex:
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return complex(half * np.sum(w * f(mid + half * x)))


_GL_HI = np.polynomial.legendre.leggauss(24)
_GL_LO = np.polynomial.legendre.leggauss(12)


def _adaptive(f, a: float, b: float, tol: float, depth: int = 0) -> complex:
    hi = _gauss_panel(f, a, b, *_GL_HI)
    lo = _gauss_panel(f, a, b, *_GL_LO)
    if abs(hi - lo) <= tol or depth >= 40:
        if depth >= 40:
            raise ConvergenceError("contour quadrature failed to converge")
        return hi
    m = 0.5 * (a + b)
    return _adaptive(f, a, m, tol / 2, depth + 1) + _adaptive(f, m, b, tol / 2, depth + 1)


def dunford_heat_trace(eigs: EigenvalueList, contour: Contour, t: float, power: int = 1,
                       tol: float = 1e-13) -> float:
    """``(i/2 pi) int e^{-t lam} Tr (A - lam)^{-1} dlam`` along the contour.

    With ``power = l > 1`` the integrand uses ``Tr (A - lam)^{-l}`` and the
    result is multiplied by ``(l-1)! t^{1-l}``; both give ``Tr e^{-tA}``.
    The rays are cut where ``e^{-t Re lam} < 1e-18``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if power < 1:
        raise ValueError("power must be >= 1")
    lam = eigs.lambdas
    mult = eigs.multiplicities.astype(float)
    phi, delta = contour.phi, contour.delta
    if lam.size and lam[0] <= delta:
        raise ContourError(f"eigenvalue {lam[0]} lies inside the contour radius delta = {delta}")
    R = 41.4 / (t * math.cos(phi))  # e^{-t R cos(phi)} = 1e-18
    R = max(R, 2 * delta)

    def trace(z: np.ndarray) -> np.ndarray:
        return (mult[None, :] / (lam[None, :] - z[:, None]) ** power).sum(axis=1)

    def ray(sign: int):
        e = np.exp(1j * sign * phi)

        def g(x):  # lam = delta e^x e^{+-i phi}, dlam = lam dx
            z = delta * np.exp(x) * e
            return np.exp(-t * z) * trace(z) * z
        return g

    def arc(theta):
        z = delta * np.exp(1j * theta)
        return np.exp(-t * z) * trace(z) * 1j * z

    xmax = math.log(R / delta)
    scale = float(np.sum(mult * np.exp(-t * lam))) if lam.size else 1.0
    atol = tol * max(scale, 1.0)
    # the upper ray is traversed inwards, the lower ray outwards
    upper = -_adaptive(ray(+1), 0.0, xmax, atol)
    lower = _adaptive(ray(-1), 0.0, xmax, atol)
    mid = _adaptive(arc, phi, 2 * math.pi - phi, atol)
    integral = upper + mid + lower
    value = (1j / (2 * math.pi)) * integral
    value *= math.factorial(power - 1) * t ** (1 - power)
    return float(value.real)
