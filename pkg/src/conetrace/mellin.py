"""Mellin transform and Mellin quantization on logarithmic radial grids.

With ``s = log r`` the Mellin transform becomes a Fourier transform,

    (M u)(beta + i y) = int e^{s (beta + i y)} u(e^s) ds,

and ``op_M(h)`` becomes a Fourier multiplier along the weight line
``Re z = beta``.  Both integrals use the trapezoid rule, which converges
exponentially for smooth, compactly supported integrands.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._errors import ContourTruncationError, TruncationWarning
from .fuchs_algebra import FuchsOperator, MellinSymbol, mellin_symbol

__all__ = [
    "LogGrid",
    "RadialFunction",
    "bump",
    "mellin_transform",
    "op_mellin_apply",
    "apply_direct",
    "fd_weights",
]

SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class LogGrid:
    """``N`` nodes ``r_i = exp(s_i)`` with ``s_i`` uniform on ``[s_min, s_max]``."""

    s_min: float
    s_max: float
    N: int = 2048

    def __post_init__(self):
        if self.N < 16:
            raise ValueError("a log grid needs at least 16 nodes")
        if not self.s_max > self.s_min:
            raise ValueError("s_max must exceed s_min")

    @classmethod
    def from_radii(cls, r_min: float = 1e-6, r_max: float = 1e2, N: int = 2048) -> "LogGrid":
        if not 0 < r_min < r_max:
            raise ValueError("need 0 < r_min < r_max")
        return cls(math.log(r_min), math.log(r_max), N)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.N)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def h(self) -> float:
        return (self.s_max - self.s_min) / (self.N - 1)

    @property
    def length(self) -> float:
        return self.s_max - self.s_min

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.N, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Samples of a function of ``r`` on a :class:`LogGrid`."""

    grid: LogGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        v = v.astype(complex if np.iscomplexobj(v) else float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def support_error(self) -> float:
        """Largest sample magnitude at the two grid ends."""
        return float(max(abs(self.values[0]), abs(self.values[-1])))

    @property
    def support_ok(self) -> bool:
        return self.support_error < SUPPORT_TOL * max(1.0, float(np.max(np.abs(self.values))))

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return RadialFunction(self.grid, self.values + other.values)

    def __mul__(self, c) -> "RadialFunction":
        return RadialFunction(self.grid, self.values * c)

    __rmul__ = __mul__


def bump(grid: LogGrid, center: float, half_width: float, amplitude: float = 1.0) -> RadialFunction:
    """Smooth bump ``exp(1 - 1/(1 - x^2))`` in ``x = (log r - center)/half_width``."""
    x = (grid.s - center) / half_width
    out = np.zeros(grid.N)
    inside = np.abs(x) < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return RadialFunction(grid, out)


def mellin_transform(u: RadialFunction, z):
    """``int_0^inf r^{z-1} u(r) dr`` by the trapezoid rule in ``log r``.

    ``z`` may be a scalar or an array.  If the integrand ``r^z u`` is not
    negligible at the grid ends a :class:`TruncationWarning` carrying the
    size of the neglected end values is emitted.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    s = u.grid.s
    w = u.grid.trapezoid_weights() * u.values
    vals = np.exp(np.outer(z_arr, s)) @ w
    ends = np.abs(np.exp(np.outer(z_arr.real, s[[0, -1]])) * u.values[[0, -1]])
    est = float(np.max(ends)) if ends.size else 0.0
    scale = max(1.0, float(np.max(np.abs(vals))))
    if est > SUPPORT_TOL * scale:
        warnings.warn(f"integrand not negligible at the grid ends (size {est:.3g})",
                      TruncationWarning, stacklevel=2)
    return vals if np.ndim(z) else complex(vals[0])


def _symbol_coefficients(h, r: np.ndarray, mu: float) -> tuple[np.ndarray, int]:
    if isinstance(h, FuchsOperator):
        h = mellin_symbol(h)
    if isinstance(h, MellinSymbol):
        return h.coefficient_values(r, mu), h.order
    # plain sequence of z-coefficients (constants or arrays over r)
    coeffs = np.array([np.broadcast_to(np.asarray(c, dtype=complex), r.shape) for c in h])
    return coeffs, None


def op_mellin_apply(h, u: RadialFunction, beta: float = 0.0, m: int | None = None,
                    mu: float = 0.0, tol: float = 1e-12, T0: float = 8.0) -> RadialFunction:
    """``(1/2 pi i) int_{Re z = beta} r^{-z-m} h(r, z) (M u)(z) dz`` on ``u``'s grid.

    ``h`` is a :class:`FuchsOperator`, a :class:`MellinSymbol` or a sequence
    of ``z``-power coefficients.  ``m`` defaults to the operator order.  The
    contour is cut at ``|Im z| <= T``; ``T`` doubles until the newest octave
    changes the result by less than ``tol`` relative to its size.  Reaching
    the grid's Nyquist limit ``pi/h`` without meeting that target raises
    :class:`ContourTruncationError`.
    """
    grid = u.grid
    s, r = grid.s, grid.r
    coeffs, order = _symbol_coefficients(h, r, mu)
    if m is None:
        m = order if order is not None else 0
    K = coeffs.shape[0] - 1

    # With dy = pi/L the product y_l (s_j - s_0) equals pi l j/(N - 1), so the
    # phases are roots of unity indexed by integers.  This keeps them exact to
    # rounding even when y s is large, which matters once r^{-m} amplifies noise.
    N = grid.N
    period = 2 * (N - 1)
    roots = np.exp(1j * math.pi * np.arange(period) / (N - 1))
    dy = math.pi / grid.length  # period 2 pi/dy = 2 L avoids aliasing
    nyquist = math.pi / grid.h
    w = grid.trapezoid_weights() * u.values * np.exp(beta * (s - s[0]))
    shift = np.exp(-beta * (s - s[0]))
    jj = np.arange(N)

    # below this level (M u) is rounding noise; adding it only amplifies noise by |z|^K
    noise_floor = 64 * np.finfo(float).eps * float(np.sum(np.abs(w)))

    def segment(lidx: np.ndarray):
        # contribution of the nodes y = l dy to I_k(r), and the largest |M u| seen
        out = np.zeros((K + 1, N), dtype=complex)
        peak = 0.0
        for start in range(0, lidx.size, 512):
            lc = lidx[start:start + 512]
            phase = roots[np.outer(lc, jj) % period]  # e^{i y (s - s_0)}
            Mu = phase @ w
            peak = max(peak, float(np.max(np.abs(Mu))))
            z = beta + 1j * lc * dy
            zp = np.ones_like(z)
            for k in range(K + 1):
                out[k] += (Mu * zp) @ phase.conj()
                zp = zp * z
        return out * (dy / (2 * math.pi)), peak

    def combine(parts: np.ndarray) -> np.ndarray:
        return np.sum(coeffs * parts, axis=0)

    n_half = int(math.floor(T0 / dy))
    idx = np.arange(-n_half, n_half + 1)
    parts, _ = segment(idx)
    total = combine(parts)
    T = n_half * dy
    while True:
        if T >= nyquist:
            raise ContourTruncationError(
                f"contour truncation did not converge below the Nyquist limit pi/h = {nyquist:.4g}")
        new_half = int(math.floor(min(2 * T, nyquist) / dy))
        new = np.arange(n_half + 1, new_half + 1)
        parts, peak = segment(np.concatenate([-new[::-1], new]))
        if peak <= noise_floor:
            break  # the transform is exhausted on this octave
        extra = combine(parts)
        total = total + extra
        n_half, T = new_half, new_half * dy
        scale = float(np.max(np.abs(total * shift)))
        if float(np.max(np.abs(extra * shift))) <= tol * max(scale, 1e-300):
            break
    out = total * shift * r ** (-float(m))
    return RadialFunction(grid, out)


# ---------------------------------------------------------------------------
# direct action by finite differences in s (independent check route)
# ---------------------------------------------------------------------------


def fd_weights(derivative: int, offsets: np.ndarray) -> np.ndarray:
    """Finite-difference weights for ``f^{(derivative)}(0)`` (Fornberg's recursion)."""
    x = np.asarray(offsets, dtype=float)
    n = x.size
    if derivative >= n:
        raise ValueError("stencil too short for the requested derivative")
    c = np.zeros((n, derivative + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for k in range(min(i, derivative), -1, -1):
                prev = c[i - 1, k - 1] if k > 0 else 0.0
                c[i, k] = c1 * (k * prev - x[i - 1] * c[i - 1, k]) / c2
            for k in range(min(i, derivative), -1, -1):
                prev = c[j, k - 1] if k > 0 else 0.0
                c[j, k] = (x[i] * c[j, k] - k * prev) / c3
        c1 = c2
    return c[:, derivative]


def _derivative_s(values: np.ndarray, h: float, k: int, half_stencil: int) -> np.ndarray:
    if k == 0:
        return values.astype(complex)
    offs = np.arange(-half_stencil, half_stencil + 1)
    wts = fd_weights(k, offs) / h**k
    padded = np.concatenate([np.zeros(half_stencil), values, np.zeros(half_stencil)])
    out = np.zeros(values.size, dtype=complex)
    for o, wt in zip(offs, wts):
        out += wt * padded[half_stencil + o: half_stencil + o + values.size]
    return out


def apply_direct(A, u: RadialFunction, mu: float = 0.0, half_stencil: int = 6) -> RadialFunction:
    """``r^{-m} sum_k a_k(r) (-d/ds)^k u`` with central differences in ``s = log r``.

    ``u`` must vanish near both grid ends (samples beyond are taken as 0).
    """
    symbol = A if isinstance(A, MellinSymbol) else mellin_symbol(A)
    grid = u.grid
    coeffs = symbol.coefficient_values(grid.r, mu)
    out = np.zeros(grid.N, dtype=complex)
    for k in range(symbol.order + 1):
        deriv = _derivative_s(u.values, grid.h, k, half_stencil) * (-1) ** k
        out += coeffs[k] * deriv
    return RadialFunction(grid, out * grid.r ** (-float(symbol.order)))
