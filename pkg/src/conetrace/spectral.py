"""Boundary spectrum, weight-line ellipticity and parameter-ellipticity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._errors import IncompleteStripError, PoleError, UnsupportedSymbolError
from .fuchs_algebra import FuchsOperator, conormal, principal_symbol_b

__all__ = [
    "Mode",
    "CrossSection",
    "WeightLine",
    "BoundarySpectrumEntry",
    "Sector",
    "SamplingSpec",
    "ConditionResult",
    "EllipticityReport",
    "boundary_spectrum",
    "check_weight_ellipticity",
    "check_parameter_ellipticity",
    "parametrix_conormal_correction",
]

MULTIPLICITY_TOL = 1e-8
_MAX_MODES = 100_000


@dataclass(frozen=True)
class Mode:
    index: int
    mu: float
    multiplicity: int


@dataclass(frozen=True)
class CrossSection:
    """Spectrum of ``-Delta_X`` on the cross-section.

    Use :meth:`circle` for the circle of length ``2 pi c`` (the cone of
    angle ``2 pi c``) or :meth:`explicit` for a finite list of eigenvalues.
    """

    n: int
    eigenvalues: tuple = ()
    c: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if self.c is not None:
            if self.n != 1:
                raise ValueError("the circle generator has n = 1")
            if not self.c > 0:
                raise ValueError("conformal factor c must be positive")
        else:
            eig = tuple((float(mu), int(mult)) for mu, mult in self.eigenvalues)
            if not eig:
                raise ValueError("an explicit cross-section needs at least one eigenvalue")
            mus = [mu for mu, _ in eig]
            if any(mu < 0 for mu in mus) or any(b < a for a, b in zip(mus, mus[1:])):
                raise ValueError("eigenvalues must be nonnegative and nondecreasing")
            if any(mult < 1 for _, mult in eig):
                raise ValueError("multiplicities must be >= 1")
            object.__setattr__(self, "eigenvalues", eig)

    @classmethod
    def circle(cls, c: float = 1.0) -> "CrossSection":
        return cls(1, (), float(c))

    @classmethod
    def explicit(cls, n: int, eigenvalues: Sequence[tuple[float, int]]) -> "CrossSection":
        return cls(n, tuple(eigenvalues), None)

    @property
    def generator(self) -> str:
        return "circle" if self.c is not None else "explicit"

    @property
    def is_finite(self) -> bool:
        return self.c is None

    @property
    def num_modes(self) -> float:
        return math.inf if self.c is not None else len(self.eigenvalues)

    def mode(self, j: int) -> Mode:
        if j < 0:
            raise IndexError(j)
        if self.c is not None:
            return Mode(j, (j / self.c) ** 2, 1 if j == 0 else 2)
        mu, mult = self.eigenvalues[j]
        return Mode(j, mu, mult)

    def modes(self, count: int) -> list[Mode]:
        count = int(min(count, self.num_modes))
        return [self.mode(j) for j in range(count)]

    def modes_below(self, mu_max: float) -> list[Mode]:
        """All modes with ``mu <= mu_max`` (raises for truncated explicit lists)."""
        out = []
        j = 0
        while j < self.num_modes:
            md = self.mode(j)
            if md.mu > mu_max:
                return out
            out.append(md)
            j += 1
        if self.is_finite:
            return out
        raise RuntimeError("unreachable")

    @property
    def area(self) -> float:
        """Volume of the cross-section (circle generator only)."""
        if self.c is None:
            raise ValueError("area is only known for the circle generator")
        return 2.0 * math.pi * self.c

    def to_json(self) -> dict:
        if self.c is not None:
            return {"type": "circle", "c": self.c}
        return {"type": "explicit", "n": self.n,
                "eigenvalues": [[mu, mult] for mu, mult in self.eigenvalues]}

    @classmethod
    def from_json(cls, data: dict) -> "CrossSection":
        kind = data.get("type", "circle")
        if kind == "circle":
            return cls.circle(float(data.get("c", 1.0)))
        if kind == "explicit":
            return cls.explicit(int(data["n"]), [tuple(e) for e in data["eigenvalues"]])
        raise ValueError(f"unknown cross-section type {kind!r}")


@dataclass(frozen=True)
class WeightLine:
    gamma: float
    n: int

    @property
    def real_part(self) -> float:
        return (self.n + 1) / 2.0 - self.gamma


@dataclass(frozen=True)
class BoundarySpectrumEntry:
    z: complex
    mode_index: int
    algebraic_multiplicity: int


@dataclass(frozen=True)
class Sector:
    """``Lambda = {phi <= arg(lambda) <= 2 pi - phi}`` with inner radius ``delta``."""

    phi: float = math.pi / 4
    delta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.phi < math.pi / 2:
            raise ValueError("sector angle must lie in (0, pi/2)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def contains(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        return np.abs(np.angle(lam)) >= self.phi - 1e-15

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each point to the closed sector ``Lambda``."""
        w = np.asarray(points, dtype=complex)
        ang = np.abs(np.angle(w))
        rad = np.abs(w)
        inside = ang >= self.phi
        # nearest point on the boundary rays arg = +-phi
        along = rad * np.cos(ang - self.phi)
        d_ray = np.where(along > 0, rad * np.sin(np.abs(ang - self.phi)), rad)
        return np.where(inside, 0.0, d_ray)

    def distance_truncated(self, points) -> np.ndarray:
        """Distance to ``Lambda`` intersected with ``|lambda| >= delta``."""
        w = np.asarray(points, dtype=complex)
        phi, delta = self.phi, self.delta
        ang = np.abs(np.angle(w))
        rad = np.abs(w)
        inside = (ang >= phi) & (rad >= delta)
        u = w.real + 1j * np.abs(w.imag)  # reflect into the upper half-plane
        # candidate 1: the boundary ray t e^{i phi}, t >= delta
        e = np.exp(1j * phi)
        t = np.maximum((u * np.conj(e)).real, delta)
        d_ray = np.abs(u - t * e)
        # candidate 2: the arc |lambda| = delta, phi <= arg <= pi
        d_arc = np.abs(u - delta * np.exp(1j * np.clip(ang, phi, math.pi)))
        return np.where(inside, 0.0, np.minimum(d_ray, d_arc))


@dataclass(frozen=True)
class SamplingSpec:
    """Resolution of the finite checks behind :func:`check_parameter_ellipticity`."""

    sphere_points: int = 64
    radial_samples: Sequence[float] = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0)
    mode_cap: int = 8
    grid_size: int = 160
    log_range: tuple = (-7.0, 0.0)
    directions: int = 128
    tol: float = 1e-9


@dataclass(frozen=True)
class ConditionResult:
    status: str  # "ok" | "fail" | "inconclusive"
    margin: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class EllipticityReport:
    condition_i: ConditionResult
    condition_ii: ConditionResult
    condition_iii: ConditionResult

    @property
    def interior_ok(self) -> bool:
        return self.condition_i.ok

    @property
    def weight_line_ok(self) -> bool:
        return self.condition_ii.ok

    @property
    def model_cone_ok(self) -> bool:
        return self.condition_iii.ok

    @property
    def overall(self) -> bool:
        return self.interior_ok and self.weight_line_ok and self.model_cone_ok

    def to_json(self) -> dict:
        def block(res: ConditionResult, extra=()):
            out = {"ok": res.status if res.status == "inconclusive" else res.ok,
                   "margin": res.margin}
            for key in extra:
                out[key] = res.details.get(key)
            return out

        return {
            "condition_i": block(self.condition_i),
            "condition_ii": block(self.condition_ii),
            "condition_iii": block(self.condition_iii, ("mode_cap",)),
            "overall": self.overall,
        }


# ---------------------------------------------------------------------------
# roots of one conormal polynomial
# ---------------------------------------------------------------------------


def _refine(p, z0: complex, k: int, iters: int = 50) -> complex:
    """Newton on ``p^{(k-1)}``, which has a simple root at a ``k``-fold root of ``p``."""
    q = p.derivative(k - 1)
    dq = q.derivative()
    z = complex(z0)
    for _ in range(iters):
        d = dq(z)
        if d == 0:
            break
        step = q(z) / d
        z -= step
        if abs(step) <= 1e-16 * (1 + abs(z)):
            break
    return z


def _poly_roots(p) -> list[tuple[complex, int]]:
    """Distinct roots of ``p`` with algebraic multiplicities."""
    raw = p.roots()
    if raw.size == 0:
        return []
    # cluster nearby roots; multiple roots split by O(eps^{1/k})
    order = np.lexsort((raw.imag, raw.real))
    raw = raw[order]
    clusters: list[list[complex]] = []
    for z in raw:
        for cl in clusters:
            if abs(z - np.mean(cl)) <= 1e-4 * (1 + abs(z)):
                cl.append(z)
                break
        else:
            clusters.append([z])
    scale = float(np.max(np.abs(p.coefficients)))
    out = []
    for cl in clusters:
        k = len(cl)
        z = _refine(p, complex(np.mean(cl)), k)
        # confirm multiplicity with derivative tests; split if it fails
        ok = all(abs(p.derivative(j)(z)) <= MULTIPLICITY_TOL * scale * (1 + abs(z)) ** p.degree
                 for j in range(k))
        if ok:
            out.append((z, k))
        else:
            out.extend((_refine(p, w, 1), 1) for w in cl)
    return out


def _sum_abs_at_zero(A: FuchsOperator) -> float:
    return float(sum(abs(a.at_zero()(0.0)) for a in A.coeffs))


def _default_mode_cap(A: FuchsOperator, cs: CrossSection, radius: float) -> int:
    bound = (radius + _sum_abs_at_zero(A)) ** 2
    j = 0
    while j < cs.num_modes and j < _MAX_MODES:
        if cs.mode(j).mu > bound:
            return j
        j += 1
    return int(min(cs.num_modes, _MAX_MODES))


def _roots_in_strip(A, md: Mode, lo: float, hi: float, pad: float = 1e-9):
    p = conormal(A, md.mu)
    if np.all(p.coefficients == 0):
        raise UnsupportedSymbolError(f"conormal symbol vanishes identically on mode {md.index}")
    return [(z, k) for z, k in _poly_roots(p) if lo - pad <= z.real <= hi + pad]


def boundary_spectrum(A: FuchsOperator, cs: CrossSection, strip: tuple[float, float],
                      mode_cap: int | None = None,
                      lookahead: int = 4) -> list[BoundarySpectrumEntry]:
    """Points ``z`` in the strip where the conormal symbol is not invertible.

    Roots from different modes at the same ``z`` are merged; the
    multiplicity is the root multiplicity times the mode multiplicity,
    summed.  Modes beyond the cap are checked numerically over a look-ahead
    window and must be root-free in the strip, otherwise
    :class:`IncompleteStripError` is raised.  With ``mode_cap=None`` the
    cap starts from a coefficient bound and grows until the window is clean.
    """
    lo, hi = float(strip[0]), float(strip[1])
    if lo > hi:
        raise ValueError("strip edges must be ordered")
    radius = max(abs(lo), abs(hi))
    auto = mode_cap is None
    cap = _default_mode_cap(A, cs, radius) if auto else int(mode_cap)
    cap = int(min(cap, cs.num_modes))

    while True:
        window_end = int(min(cs.num_modes, cap + max(lookahead, cap // 2)))
        leak = [j for j in range(cap, window_end) if _roots_in_strip(A, cs.mode(j), lo, hi)]
        if not leak:
            break
        if not auto or cap >= _MAX_MODES:
            raise IncompleteStripError(
                f"mode {leak[0]} beyond mode_cap={cap} has roots in the strip [{lo}, {hi}]")
        cap = int(min(cs.num_modes, 2 * max(cap, 1)))

    if cs.is_finite and cap >= cs.num_modes and cs.c is None:
        # the explicit list may be a truncation; the last listed mode must clear the strip
        last = cs.mode(cs.num_modes - 1)
        if _roots_in_strip(A, last, lo, hi) and A.order > 0:
            raise IncompleteStripError(
                "explicit eigenvalue list ends before the strip is exhausted")

    merged: list[list] = []  # [z, first_mode, multiplicity]
    for j in range(cap):
        md = cs.mode(j)
        for z, k in _roots_in_strip(A, md, lo, hi):
            for entry in merged:
                if abs(entry[0] - z) <= 1e-9 * (1 + abs(z)):
                    entry[2] += k * md.multiplicity
                    break
            else:
                merged.append([z, j, k * md.multiplicity])
    entries = [BoundarySpectrumEntry(_clean(z), j, k) for z, j, k in merged]
    entries.sort(key=lambda e: (round(e.z.real, 12), round(e.z.imag, 12)))
    return entries


def _clean(z: complex) -> complex:
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def check_weight_ellipticity(A: FuchsOperator, cs: CrossSection, gamma: float,
                             tol: float = 1e-10) -> tuple[bool, float]:
    """Is the line ``Re z = (n+1)/2 - gamma`` free of boundary spectrum?

    Returns the verdict and the distance from the line to the nearest
    boundary-spectrum point (``inf`` when there is none).
    """
    beta = WeightLine(gamma, cs.n).real_part
    width = 2.0
    while True:
        entries = boundary_spectrum(A, cs, (beta - width, beta + width))
        if entries or width >= 64.0:
            break
        width *= 2.0
    if not entries:
        return True, math.inf
    margin = min(abs(e.z.real - beta) for e in entries)
    return bool(margin > tol), float(margin)


# ---------------------------------------------------------------------------
# parameter-ellipticity
# ---------------------------------------------------------------------------


def _condition_i(A: FuchsOperator, sector: Sector, grid: SamplingSpec) -> ConditionResult:
    m = A.order
    if m == 0:
        raise UnsupportedSymbolError("parameter-ellipticity needs an operator of positive order")
    theta = np.linspace(0.0, math.pi / 2, grid.sphere_points)  # s >= 0 half-circle suffices
    theta = np.concatenate([theta, np.linspace(math.pi / 2, math.pi, grid.sphere_points)[1:]])
    rho, s = np.cos(theta), np.sin(theta)
    values = np.array([[principal_symbol_b(A, r, a, b) for a, b in zip(rho, s)]
                       for r in grid.radial_samples])
    # sigma(rho, s) - lambda != 0 on the unit sphere for lambda in Lambda (|lambda| <= 1 via
    # homogeneity) reduces to the symbol values staying off the closed sector
    dist = sector.distance(values.ravel())
    margin = float(np.min(dist))
    worst = int(np.argmin(dist))
    details = {"worst_value": complex(values.ravel()[worst])}
    if margin == 0.0:
        return ConditionResult("fail", 0.0, details)
    if margin <= grid.tol:
        return ConditionResult("inconclusive", margin, details)
    return ConditionResult("ok", margin, details)


def _derivative_matrices(N: int, h: float, max_order: int):
    """Central-difference matrices for ``(-d/ds)^k`` on ``N`` interior nodes."""
    from scipy.sparse import diags

    d1 = diags([-np.ones(N - 1), np.ones(N - 1)], [-1, 1]) * (-1.0 / (2 * h))
    d2 = diags([np.ones(N - 1), -2 * np.ones(N), np.ones(N - 1)], [-1, 0, 1]) / h**2
    mats = [None] * (max_order + 1)
    from scipy.sparse import identity

    mats[0] = identity(N, format="csr")
    for k in range(1, max_order + 1):
        if k % 2 == 0:
            mats[k] = d2 if k == 2 else mats[k - 2] @ d2
        else:
            mats[k] = d1 if k == 1 else mats[k - 1] @ d1
    return [m.toarray() for m in mats]


def _numerical_range_polygon(B: np.ndarray, directions: int) -> np.ndarray:
    """Vertices of a polygon enclosing the numerical range of ``B``."""
    thetas = np.linspace(0.0, 2 * math.pi, directions, endpoint=False)
    support = np.empty(directions)
    for i, th in enumerate(thetas):
        C = np.exp(-1j * th) * B
        H = 0.5 * (C + C.conj().T)
        support[i] = np.linalg.eigvalsh(H)[-1]
    # intersect consecutive support lines Re(e^{-i th} w) = h
    verts = []
    for i in range(directions):
        t1, t2 = thetas[i], thetas[(i + 1) % directions]
        h1, h2 = support[i], support[(i + 1) % directions]
        M = np.array([[math.cos(t1), math.sin(t1)], [math.cos(t2), math.sin(t2)]])
        x, y = np.linalg.solve(M, [h1, h2])
        verts.append(complex(x, y))
    return np.array(verts)


def _polygon_to_sector_distance(verts: np.ndarray, sector: Sector) -> float:
    """Lower bound for the distance between a convex polygon and ``Lambda`` minus the delta-disk."""
    if np.any(sector.distance_truncated(verts) == 0.0):
        return 0.0
    # sample the boundary of the truncated sector; subtract half the sample spacing
    scale = max(float(np.max(np.abs(verts))), sector.delta) * 4.0
    arc_t = np.linspace(sector.phi, 2 * math.pi - sector.phi, 2049)
    arc = sector.delta * np.exp(1j * arc_t)
    arc_gap = sector.delta * (arc_t[1] - arc_t[0])
    radii = np.geomspace(sector.delta, scale, 4097)
    gaps = np.diff(radii, append=radii[-1] * (radii[-1] / radii[-2]))
    rays = np.concatenate([radii * np.exp(1j * sector.phi), radii * np.exp(-1j * sector.phi)])
    ray_gaps = np.concatenate([gaps, gaps])
    pts = np.concatenate([arc, rays])
    gap = np.concatenate([np.full(arc.size, arc_gap), ray_gaps])
    d = _point_polygon_distance(pts, verts)
    lower = d - 0.5 * gap
    # beyond the sampled range the rays move away from a bounded polygon
    return float(max(np.min(lower), 0.0))


def _point_polygon_distance(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    a = verts
    b = np.roll(verts, -1)
    ab = b - a
    P = pts[:, None]
    t = np.clip(((P - a) * ab.conj()).real / np.maximum(np.abs(ab) ** 2, 1e-300), 0.0, 1.0)
    dist = np.min(np.abs(P - (a + t * ab)), axis=1)
    # inside test for a counterclockwise convex polygon
    cross = (ab.conj() * (P - a)).imag
    inside = np.all(cross >= -1e-12 * np.abs(ab) * (1 + np.abs(P)), axis=1)
    return np.where(inside, 0.0, dist)


def _condition_iii(A: FuchsOperator, cs: CrossSection, sector: Sector,
                   grid: SamplingSpec) -> ConditionResult:
    m = A.order
    N = int(grid.grid_size)
    s_lo, s_hi = grid.log_range
    s = np.linspace(s_lo, s_hi, N + 2)[1:-1]
    h = s[1] - s[0]
    Dk = _derivative_matrices(N, h, m)
    # L^2(r^n dr) = L^2(e^{(n+1)s} ds): conjugate to the plain Euclidean product
    half_w = np.exp(0.5 * (cs.n + 1) * s)
    cap = int(min(grid.mode_cap, cs.num_modes))
    margins = []
    for md in cs.modes(cap):
        a0 = [a.at_zero()(md.mu) for a in A.coeffs]
        M = sum(a0[k] * Dk[k] for k in range(m + 1))
        M = np.exp(-m * s)[:, None] * M
        B = half_w[:, None] * M / half_w[None, :]
        verts = _numerical_range_polygon(B, grid.directions)
        margins.append(_polygon_to_sector_distance(verts, sector))
    margin = float(min(margins)) if margins else 0.0
    status = "ok" if margin > grid.tol else "inconclusive"
    return ConditionResult(status, margin, {"mode_cap": cap, "per_mode": margins})


def check_parameter_ellipticity(A: FuchsOperator, cs: CrossSection, sector: Sector,
                                gamma: float, grid: SamplingSpec | None = None) -> EllipticityReport:
    """Finite checks of the three parameter-ellipticity conditions.

    (i) samples the rescaled principal symbol over the unit sphere in
    ``(rho, s)`` and a set of radii; (ii) is the weight-line check; (iii)
    bounds the numerical range of a log-grid discretization of the frozen
    model operator, per mode, away from the truncated sector.  Condition
    (iii) is only sufficient, so its negative outcome is ``inconclusive``.
    """
    grid = grid or SamplingSpec()
    c1 = _condition_i(A, sector, grid)
    ok2, margin2 = check_weight_ellipticity(A, cs, gamma)
    c2 = ConditionResult("ok" if ok2 else "fail", margin2)
    c3 = _condition_iii(A, cs, sector, grid)
    return EllipticityReport(c1, c2, c3)


def parametrix_conormal_correction(A: FuchsOperator, mu: float,
                                   h0: Callable[[complex], complex],
                                   tol: float = 1e-12) -> Callable:
    """Correction ``f`` with ``p(z - m) (h0(z) + f(z)) = 1``, ``p`` the conormal symbol.

    The returned callable raises :class:`PoleError` when ``z - m`` is within
    ``tol`` of a root of ``p``.
    """
    p = conormal(A, mu)
    m = A.order
    roots = p.roots()

    def f(z):
        z_arr = np.asarray(z, dtype=complex)
        w = z_arr - m
        pw = p(w)
        scale = (1.0 + np.abs(w)) ** max(p.degree, 0) * float(np.max(np.abs(p.coefficients)))
        bad = np.abs(pw) <= tol * scale
        if np.any(bad):
            zb = complex(np.ravel(w)[np.argmax(np.ravel(bad))])
            root = complex(roots[np.argmin(np.abs(roots - zb))]) if roots.size else zb
            raise PoleError(f"z - m = {zb} is a root of the conormal symbol", root=root)
        out = (1.0 - pw * np.asarray(h0(z_arr), dtype=complex)) / pw
        return out if out.ndim else complex(out)

    return f
