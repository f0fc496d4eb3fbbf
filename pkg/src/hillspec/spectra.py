"""Eigenvalue localization for the ten boundary problems in the mu-plane.

Each problem is the zero set of an entire characteristic function of mu:

    D  -> s(1)    N  -> c'(1)    DN -> s'(1)    ND -> c(1)
    P  -> Delta - 2              AP -> Delta + 2

and the ``*_half`` variants read the same quantities at x = 1/2.  Zeros are
counted with the argument principle on rectangles, the rectangle is split
(quadtree; long boxes are bisected along their long side) until each box
holds at most two zeros, and the zeros are polished by Newton's method:
on f for simple zeros, on f' for double zeros of P/AP.  Every accepted zero
is re-counted on a tight square, which fixes its algebraic order.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ode
from .ode import DEFAULT_CONFIG, IntegratorConfig
from .potential import PotentialSpec, sup_norm, value_bounds

log = logging.getLogger(__name__)

TAGS = ("D", "N", "DN", "ND", "P", "AP", "D_half", "N_half", "DN_half", "ND_half")

BASE_POINTS = 64
MAX_REFINE_ROUNDS = 40
COUNT_REL_TOL = 1e-8
NEAR_DOUBLE_REL = 1e-6
TIGHT_REL = 1e-4
MULTIPLICITY_REL = 1e-7
NEWTON_MAX_ITER = 60
DIAGNOSTIC_TOL = 1e-6
NOISE_FACTOR = 100.0
# Newton polishing integrates this much tighter than the caller's tolerance:
# near a narrow gap |f'| is small and the root error is (error in f) / |f'|
POLISH_FACTOR = 1e-2
# off-centre split lines keep symmetric spectra (real axis, rigid shifts) off the contours
SPLIT_FRACTIONS = (0.4937, 0.5183, 0.4711, 0.5429)


class SpectrumError(RuntimeError):
    """Root localization failed (contour hits a zero, empty search)."""


class ContourZeroError(SpectrumError):
    """A zero of the characteristic function lies on (or at) the contour."""


@dataclass(frozen=True)
class SearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    max_depth: int = 40

    def __post_init__(self) -> None:
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"empty search region {self.bounds}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.re_min, self.re_max, self.im_min, self.im_max)

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def contains(self, mu: complex, margin: float = 0.0) -> bool:
        return (self.re_min - margin <= mu.real <= self.re_max + margin
                and self.im_min - margin <= mu.imag <= self.im_max + margin)

    def dilated(self, d: float) -> "SearchRegion":
        return replace(self, re_min=self.re_min - d, re_max=self.re_max + d,
                       im_min=self.im_min - d, im_max=self.im_max + d)

    def shifted(self, a: complex) -> "SearchRegion":
        return replace(self, re_min=self.re_min + a.real, re_max=self.re_max + a.real,
                       im_min=self.im_min + a.imag, im_max=self.im_max + a.imag)

    def split(self, frac: float = 0.5) -> list["SearchRegion"]:
        w, h = self.width, self.height
        rm = self.re_min + frac * w
        im = self.im_min + frac * h
        if w > 2 * h:
            return [replace(self, re_max=rm), replace(self, re_min=rm)]
        if h > 2 * w:
            return [replace(self, im_max=im), replace(self, im_min=im)]
        return [
            replace(self, re_max=rm, im_max=im), replace(self, re_min=rm, im_max=im),
            replace(self, re_max=rm, im_min=im), replace(self, re_min=rm, im_min=im),
        ]

    @classmethod
    def square(cls, center: complex, half_width: float) -> "SearchRegion":
        return cls(center.real - half_width, center.real + half_width,
                   center.imag - half_width, center.imag + half_width)


@dataclass(frozen=True)
class Eigenvalue:
    mu: complex
    tag: str
    algebraic_order: int
    char_residual: float
    geometric_multiplicity: int | None = None
    monodromy_residual: float | None = None
    is_lowest: bool = False
    cluster_width: float = 0.0

    @property
    def lam(self) -> complex:
        """Principal square root of mu (display only)."""
        return cmath.sqrt(self.mu)


@dataclass(frozen=True)
class SpectrumReport:
    tag: str
    region: SearchRegion
    eigenvalues: list[Eigenvalue]
    winding_total: int
    refined_total: int
    unresolved: list[SearchRegion] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def mus(self) -> np.ndarray:
        return np.array([e.mu for e in self.eigenvalues], dtype=complex)

    @property
    def complete(self) -> bool:
        return not self.unresolved and self.winding_total == self.refined_total

    @property
    def near_double(self) -> bool:
        return any(e.cluster_width > 0 and e.algebraic_order == 2 for e in self.eigenvalues)


# -- characteristic functions ---------------------------------------------------

def _endpoint(tag: str) -> float:
    return 0.5 if tag.endswith("_half") else 1.0


def _select(tag: str, st: ode.TransferState, derivative: bool):
    base = tag[:-5] if tag.endswith("_half") else tag
    if derivative:
        return {"D": st.ds, "N": st.dcp, "DN": st.dsp, "ND": st.dc,
                "P": st.dtrace, "AP": st.dtrace}[base]
    return {"D": st.s, "N": st.cp, "DN": st.sp, "ND": st.c,
            "P": st.trace - 2.0, "AP": st.trace + 2.0}[base]


def _check_tag(tag: str) -> None:
    if tag not in TAGS:
        raise ValueError(f"unknown problem tag {tag!r}, expected one of {TAGS}")


def char_value(q: PotentialSpec, tag: str, mu, cfg: IntegratorConfig = DEFAULT_CONFIG, with_derivative: bool = False):
    """Characteristic function of ``tag`` at mu (and d/dmu when requested)."""
    _check_tag(tag)
    st = ode.transfer(q, mu, 0.0, _endpoint(tag), cfg, with_derivative)
    f = _select(tag, st, False)
    if with_derivative:
        return f, _select(tag, st, True)
    return f


class CharFunction:
    """Cached, batched evaluation of one characteristic function.

    Alongside each value the cache keeps a noise floor, NOISE_FACTOR *
    rel_tol * (1 + largest transfer-matrix entry); samples below it carry no
    phase information.
    """

    def __init__(self, q: PotentialSpec, tag: str, cfg: IntegratorConfig):
        _check_tag(tag)
        self.q, self.tag, self.cfg = q, tag, cfg
        self._cache: dict[tuple[float, float], tuple[complex, float]] = {}
        self.evaluations = 0

    def _lookup(self, mus) -> list[tuple[complex, float]]:
        mus = np.asarray(mus, dtype=complex).ravel()
        keys = list(zip(np.round(mus.real, 11).tolist(), np.round(mus.imag, 11).tolist()))
        missing = {}
        for z, k in zip(mus, keys):
            if k not in self._cache and k not in missing:
                missing[k] = z
        if missing:
            pts = np.array(list(missing.values()))
            st = ode.transfer(self.q, pts, 0.0, _endpoint(self.tag), self.cfg)
            vals = np.atleast_1d(_select(self.tag, st, False))
            scale = np.max(np.abs(np.array([st.c, st.cp, st.s, st.sp])), axis=0)
            floor = NOISE_FACTOR * self.cfg.rel_tol * (1.0 + np.atleast_1d(scale))
            self.evaluations += pts.size
            for k, v, fl in zip(missing, vals, floor):
                self._cache[k] = (complex(v), float(fl))
        return [self._cache[k] for k in keys]

    def values(self, mus) -> np.ndarray:
        return np.array([v for v, _ in self._lookup(mus)])

    def values_and_floor(self, mus) -> tuple[np.ndarray, np.ndarray]:
        pairs = self._lookup(mus)
        return np.array([v for v, _ in pairs]), np.array([f for _, f in pairs])

    def with_derivative(self, mus) -> tuple[np.ndarray, np.ndarray]:
        f, df = char_value(self.q, self.tag, np.atleast_1d(np.asarray(mus, dtype=complex)), self.cfg, True)
        return np.atleast_1d(f), np.atleast_1d(df)


# -- argument principle --------------------------------------------------------

def _boundary(box: SearchRegion, t: np.ndarray) -> np.ndarray:
    """Counter-clockwise boundary point at parameter t in [0, 4]."""
    a, b, c, d = box.bounds
    side = np.minimum(np.floor(t), 3).astype(int)
    u = t - side
    re = np.choose(side, [a + u * (b - a), np.full_like(u, b), b - u * (b - a), np.full_like(u, a)])
    im = np.choose(side, [np.full_like(u, c), c + u * (d - c), np.full_like(u, d), d - u * (d - c)])
    return re + 1j * im


def _base_params(n_per_side: int) -> np.ndarray:
    return np.arange(4 * n_per_side + 1) / n_per_side


def _winding(fn: CharFunction, box: SearchRegion, n_per_side: int = BASE_POINTS) -> int:
    t = _base_params(n_per_side)
    vals, floor = fn.values_and_floor(_boundary(box, t))
    min_dt = 1e-10
    for _ in range(MAX_REFINE_ROUNDS):
        if np.any(np.abs(vals) < floor):
            raise ContourZeroError(f"characteristic function at noise level on the contour of {box.bounds}")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(dphi) >= 0.5 * math.pi)[0]
        if bad.size == 0:
            return int(round(dphi.sum() / (2 * math.pi)))
        if np.min(t[bad + 1] - t[bad]) < min_dt:
            raise ContourZeroError(f"phase unresolved near the contour of {box.bounds}")
        mids = 0.5 * (t[bad] + t[bad + 1])
        new_vals, new_floor = fn.values_and_floor(_boundary(box, mids))
        t = np.insert(t, bad + 1, mids)
        vals = np.insert(vals, bad + 1, new_vals)
        floor = np.insert(floor, bad + 1, new_floor)
    raise ContourZeroError(f"phase refinement did not settle on {box.bounds}")


def _prefetch(fn: CharFunction, boxes: list[SearchRegion]) -> None:
    if boxes:
        t = _base_params(BASE_POINTS)
        fn.values(np.concatenate([_boundary(b, t) for b in boxes]))


def count_zeros(q: PotentialSpec, tag: str, region: SearchRegion, cfg: IntegratorConfig = DEFAULT_CONFIG,
                _fn: CharFunction | None = None) -> int:
    """Zeros (with multiplicity) inside ``region`` by the argument principle.

    A zero on the contour triggers a dilation of the rectangle by 1e-6 of its
    diagonal, at most five times.
    """
    fn = _fn or CharFunction(q, tag, cfg.relaxed(COUNT_REL_TOL))
    box = region
    for attempt in range(6):
        try:
            return _winding(fn, box)
        except ContourZeroError:
            if attempt == 5:
                raise
            box = box.dilated(1e-6 * region.diameter)
            log.debug("dilating contour to %s", box.bounds)
    raise AssertionError("unreachable")


# -- Newton refinement -----------------------------------------------------------

def _newton_simple(fn: CharFunction, z: complex, box: SearchRegion | None) -> complex | None:
    margin = 0.0 if box is None else 0.05 * box.diameter
    for _ in range(NEWTON_MAX_ITER):
        f, df = fn.with_derivative(z)
        f, df = complex(f[0]), complex(df[0])
        if f == 0:
            return z
        if df == 0 or not np.isfinite(df):
            return None
        step = f / df
        z = z - step
        if box is not None and not box.contains(z, margin):
            return None
        if abs(step) <= 1e-14 * (1 + abs(z)):
            return z
    return z if abs(step) <= 1e-10 * (1 + abs(z)) else None


def _second_derivative(fn: CharFunction, z: complex) -> tuple[complex, complex, complex]:
    """(f, f', f'') at z, f'' by central differences of the exact f'."""
    h = 1e-4 * (1 + abs(z))
    f, df = fn.with_derivative(np.array([z, z + h, z - h]))
    return complex(f[0]), complex(df[0]), complex((df[1] - df[2]) / (2 * h))


def _noise_floor(fn: CharFunction, z: complex) -> float:
    """Attainable accuracy of f at z given the integration tolerance."""
    st = ode.transfer(fn.q, z, 0.0, _endpoint(fn.tag), fn.cfg)
    scale = max(abs(st.c), abs(st.cp), abs(st.s), abs(st.sp))
    return 10.0 * fn.cfg.rel_tol * (1.0 + scale)


def _newton_critical(fn: CharFunction, z: complex, box: SearchRegion) -> complex | None:
    margin = 0.05 * box.diameter
    for _ in range(NEWTON_MAX_ITER):
        _, g, dg = _second_derivative(fn, z)
        if dg == 0 or not np.isfinite(dg):
            return None
        step = g / dg
        z = z - step
        if not box.contains(z, margin):
            return None
        if abs(step) <= 1e-14 * (1 + abs(z)):
            return z
    return z if abs(step) <= 1e-10 * (1 + abs(z)) else None


@dataclass
class _Candidate:
    mu: complex
    order: int
    cluster_width: float = 0.0


def _resolve(fn: CharFunction, box: SearchRegion, n: int) -> list[_Candidate] | None:
    if n == 1:
        z = _newton_simple(fn, box.center, box)
        if z is None or not box.contains(z, 1e-9 * (1 + abs(z))):
            return None
        return [_Candidate(z, 1)]
    if n == 2:
        zc = _newton_critical(fn, box.center, box)
        if zc is None:
            return None
        f, _, f2 = _second_derivative(fn, zc)
        if f2 == 0:
            return None
        d = cmath.sqrt(-2.0 * f / f2)
        # a split below what the noise in f can resolve is a double zero
        resolvable = 4.0 * math.sqrt(2.0 * _noise_floor(fn, zc) / abs(f2))
        if abs(d) < max(NEAR_DOUBLE_REL * (1 + abs(zc)), resolvable):
            if not box.contains(zc, 1e-9 * (1 + abs(zc))):
                return None
            return [_Candidate(zc, 2, cluster_width=2 * abs(d))]
        roots = []
        for guess in (zc + d, zc - d):
            z = _newton_simple(fn, guess, box)
            if z is None or not box.contains(z, 1e-9 * (1 + abs(z))):
                return None
            roots.append(z)
        if abs(roots[0] - roots[1]) < max(NEAR_DOUBLE_REL * (1 + abs(zc)), resolvable):
            return None
        return [_Candidate(r, 1) for r in roots]
    return None


def _coarse_threshold(n: int) -> float:
    return 8.0 if n == 1 else 2.0


# -- main driver -------------------------------------------------------------------

def _count_children(fn: CharFunction, box: SearchRegion) -> tuple[list[SearchRegion], list[int]] | None:
    for frac in SPLIT_FRACTIONS:
        children = box.split(frac)
        _prefetch(fn, children)
        try:
            return children, [_winding(fn, c) for c in children]
        except ContourZeroError:
            continue
    return None


def _tight_order(fn_tight: CharFunction, mu: complex, radius: float) -> int:
    box = SearchRegion.square(mu, radius)
    for k in range(4):
        try:
            return _winding(fn_tight, box)
        except ContourZeroError:
            box = SearchRegion.square(mu, radius * (0.9 - 0.1 * k))
    return -1


def geometric_multiplicity(q: PotentialSpec, mu: complex, tag: str, cfg: IntegratorConfig = DEFAULT_CONFIG,
                           rel_tol: float = MULTIPLICITY_REL) -> tuple[int, float]:
    """(2, r) when the monodromy is +-identity within rel_tol * (1 + ||M||), else (1, r)."""
    if tag not in ("P", "AP"):
        raise ValueError("geometric multiplicity is defined for P and AP only")
    m = ode.monodromy(q, mu, cfg).matrix
    sign = 1.0 if tag == "P" else -1.0
    resid = float(np.max(np.abs(m - sign * np.eye(2)).sum(axis=1)))
    mnorm = float(np.max(np.abs(m).sum(axis=1)))
    return (2 if resid < rel_tol * (1 + mnorm) else 1), resid


def _sort_key(mu: complex) -> tuple[float, float]:
    return (round(mu.real, 9), round(mu.imag, 9))


def _polish_config(cfg: IntegratorConfig) -> IntegratorConfig:
    return replace(cfg, rel_tol=max(cfg.rel_tol * POLISH_FACTOR, 1e-14),
                   abs_tol=max(cfg.abs_tol * POLISH_FACTOR, 1e-16))


def _polish(fn: CharFunction, cand: _Candidate, spacing: float) -> _Candidate:
    """Re-run Newton at the polishing tolerance; keep the old value if it wanders."""
    reach = min(0.25 * spacing, TIGHT_REL * (1 + abs(cand.mu)))
    if cand.order == 1:
        z = _newton_simple(fn, cand.mu, None)
    else:
        z = _newton_critical(fn, cand.mu, SearchRegion.square(cand.mu, reach))
    if z is None or abs(z - cand.mu) > reach:
        return cand
    return replace(cand, mu=z)


def find_eigenvalues(q: PotentialSpec, tag: str, region: SearchRegion | None = None,
                     cfg: IntegratorConfig = DEFAULT_CONFIG) -> SpectrumReport:
    """Locate every zero of the characteristic function of ``tag`` in ``region``."""
    _check_tag(tag)
    region = region or default_region(q)
    fn = CharFunction(q, tag, cfg.relaxed(COUNT_REL_TOL))
    fn_tight = CharFunction(q, tag, cfg)

    box0 = region
    total = None
    for attempt in range(6):
        try:
            total = _winding(fn, box0)
            break
        except ContourZeroError:
            box0 = box0.dilated(1e-6 * region.diameter)
    if total is None:
        raise SpectrumError(f"could not count zeros on the boundary of {region.bounds}")

    candidates: list[_Candidate] = []
    unresolved: list[SearchRegion] = []
    level = [(box0, total, 0)]
    while level:
        nxt = []
        to_split = []
        for box, n, depth in level:
            if n <= 0:
                continue
            if n <= 2 and box.diameter <= _coarse_threshold(n):
                found = _resolve(fn_tight, box, n)
                if found is not None:
                    candidates.extend(found)
                    continue
            if depth >= region.max_depth:
                unresolved.append(box)
                continue
            to_split.append((box, n, depth))
        _prefetch(fn, [c for box, _, _ in to_split for c in box.split(SPLIT_FRACTIONS[0])])
        for box, n, depth in to_split:
            res = _count_children(fn, box)
            if res is None or sum(res[1]) != n:
                log.warning("inconsistent child counts in %s", box.bounds)
                unresolved.append(box)
                continue
            nxt.extend((c, k, depth + 1) for c, k in zip(*res))
        level = nxt

    # merge duplicates from neighbouring boxes, then fix orders on tight contours
    merged: list[_Candidate] = []
    for cand in sorted(candidates, key=lambda c: _sort_key(c.mu)):
        if merged and abs(merged[-1].mu - cand.mu) < 1e-9 * (1 + abs(cand.mu)):
            continue
        merged.append(cand)

    fn_polish = CharFunction(q, tag, _polish_config(cfg))
    polished = []
    for cand in merged:
        spacing = min((abs(o.mu - cand.mu) for o in merged if o is not cand), default=math.inf)
        polished.append(_polish(fn_polish, cand, spacing))
    merged = polished

    eigs: list[Eigenvalue] = []
    diagnostics: list[str] = []
    for cand in merged:
        others = [abs(o.mu - cand.mu) for o in merged if o is not cand]
        radius = TIGHT_REL * (1 + abs(cand.mu))
        if others:
            radius = min(radius, 0.4 * min(others))
        order = _tight_order(fn_tight, cand.mu, radius)
        if order <= 0:
            diagnostics.append(f"candidate {cand.mu:.12g} rejected by tight contour (count {order})")
            continue
        if order != cand.order:
            diagnostics.append(f"root {cand.mu:.12g}: Newton order {cand.order}, contour order {order}")
        resid = float(abs(fn_tight.with_derivative(cand.mu)[0][0]))
        gm = mres = None
        if tag in ("P", "AP"):
            gm, mres = geometric_multiplicity(q, cand.mu, tag, cfg)
            st = ode.monodromy(q, cand.mu, cfg)
            if abs(st.sp) < DIAGNOSTIC_TOL and abs(st.c) < DIAGNOSTIC_TOL:
                diagnostics.append(f"root {cand.mu:.12g}: s'(1) and c(1) both vanish (Delta = 0 case)")
        eigs.append(Eigenvalue(cand.mu, tag, order, resid, gm, mres, False, cand.cluster_width))

    eigs.sort(key=lambda e: _sort_key(e.mu))
    if tag == "P" and eigs:
        eigs[0] = replace(eigs[0], is_lowest=True)
    refined = sum(e.algebraic_order for e in eigs)
    if refined != total:
        diagnostics.append(f"winding total {total} differs from refined total {refined}")
    return SpectrumReport(tag, region, eigs, total, refined, unresolved, diagnostics)


def default_region(q: PotentialSpec, bands: int = 4) -> SearchRegion:
    """Real span [-10, (2 pi N)^2 + 10] (widened to the range of Re q), imaginary span +-(5 + 2||q||)."""
    re_lo, re_hi, _, _ = value_bounds(q)
    qn = sup_norm(q)
    return SearchRegion(min(-10.0, re_lo - 10.0), (2 * math.pi * bands) ** 2 + 10.0 + max(0.0, re_hi),
                        -(5.0 + 2 * qn), 5.0 + 2 * qn)


def lowest_region(q: PotentialSpec) -> SearchRegion:
    """A rectangle holding every eigenvalue whose real part can be the smallest.

    For the self-adjoint boundary conditions, eigenvalues have
    Re mu >= min Re q and Im mu within the range of Im q; the eigenvalue
    continued from the free zero lies within ||q|| of it.
    """
    re_lo, _, im_lo, im_hi = value_bounds(q)
    qn = sup_norm(q)
    return SearchRegion(re_lo - 1.0 - 1e-3 * math.pi, qn + 1.0 + 1e-3 * math.e, im_lo - 1.0 - 1e-3 * math.sqrt(2),
                        im_hi + 1.0 + 1e-3 * math.sqrt(3))


def _normalize(q: PotentialSpec, tag: str, cfg: IntegratorConfig, region: SearchRegion | None):
    region = region or lowest_region(q)
    rep = find_eigenvalues(q, tag, region, cfg)
    if not rep.eigenvalues:
        raise SpectrumError(f"no {tag} eigenvalue in {region.bounds}; enlarge the search region")
    lowest = min(rep.eigenvalues, key=lambda e: (round(e.mu.real, 9), abs(e.mu.imag)))
    shift = lowest.mu
    if abs(shift) < 1e-300:
        return q, 0j
    return q.shifted(-shift), shift


def normalize_half_neumann(q: PotentialSpec, cfg: IntegratorConfig = DEFAULT_CONFIG,
                           region: SearchRegion | None = None) -> tuple[PotentialSpec, complex]:
    """Shift q so that 0 is its lowest Neumann eigenvalue on [0, 1/2].

    Returns ``(q - mu_star, mu_star)``.
    """
    return _normalize(q, "N_half", cfg, region)


def normalize_unit_neumann(q: PotentialSpec, cfg: IntegratorConfig = DEFAULT_CONFIG,
                           region: SearchRegion | None = None) -> tuple[PotentialSpec, complex]:
    """Shift q so that 0 is its lowest Neumann eigenvalue on [0, 1] (the gauge matching (BB))."""
    return _normalize(q, "N", cfg, region)
