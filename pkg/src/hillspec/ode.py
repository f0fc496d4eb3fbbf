"""Fundamental system of -y'' + q(x) y = mu y as entire functions of mu.

The spectral parameter is mu = lambda**2 throughout; no square root is taken
during integration.  ``c`` and ``s`` start from the identity at ``x0``:

    c(x0) = s'(x0) = 1,   c'(x0) = s(x0) = 0.

Every routine accepts a scalar or an array of ``mu`` and integrates the whole
batch on one shared adaptive mesh (an embedded Dormand-Prince 5(4) pair with
PI step control).  The mu-derivatives come from the variational system

    v'' = (q - mu) v - y,   v(x0) = v'(x0) = 0,   y in {c, s}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .potential import PotentialSpec


class IntegrationError(RuntimeError):
    """Step size underflow; ``last_x`` is the last accepted abscissa."""

    def __init__(self, message: str, last_x: float):
        super().__init__(f"{message} (last good x = {last_x:.17g})")
        self.last_x = last_x


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 1e-2
    min_steps_per_wave: int = 16

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0.0 < v <= 1e-2):
                raise ValueError(f"{name}: must lie in (0, 1e-2], got {v}")
        if not self.max_step > 0:
            raise ValueError(f"max_step: must be positive, got {self.max_step}")
        if self.min_steps_per_wave < 8:
            raise ValueError(f"min_steps_per_wave: must be >= 8, got {self.min_steps_per_wave}")

    def relaxed(self, rel_tol: float) -> "IntegratorConfig":
        """A looser copy (never tighter than self)."""
        rel = max(self.rel_tol, rel_tol)
        return IntegratorConfig(rel, max(self.abs_tol, rel * 1e-2), self.max_step, self.min_steps_per_wave)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class TransferState:
    """Values of the fundamental system at ``x`` (arrays when mu is)."""

    x: float
    mu: complex | np.ndarray
    c: complex | np.ndarray
    cp: complex | np.ndarray
    s: complex | np.ndarray
    sp: complex | np.ndarray
    dc: complex | np.ndarray | None = None
    dcp: complex | np.ndarray | None = None
    ds: complex | np.ndarray | None = None
    dsp: complex | np.ndarray | None = None

    @property
    def matrix(self) -> np.ndarray:
        """[[c, s], [c', s']] (the transfer matrix acting on (y, y'))."""
        return np.array([[self.c, self.s], [self.cp, self.sp]])

    @property
    def wronskian(self):
        return self.c * self.sp - self.cp * self.s

    @property
    def trace(self):
        return self.c + self.sp

    @property
    def dtrace(self):
        if self.dc is None:
            raise ValueError("state was integrated without mu-derivatives")
        return self.dc + self.dsp


@dataclass(frozen=True)
class AuxiliaryPair:
    """y1, y2 normalized at x = 1/2 and their x-derivatives."""

    y1: complex
    y1p: complex
    y2: complex
    y2p: complex

    @property
    def wronskian(self) -> complex:
        return self.y1 * self.y2p - self.y1p * self.y2


# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 6))
_A[1, :1] = (1 / 5,)
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5

_OK, _UNDERFLOW, _NONFINITE = 0, 1, 2


@njit(cache=True)
def _q_local(code, mode, a, b, off, grid_n, u, right):
    """q at local abscissa u in [0, 1]; ``right`` selects the piece on (1/2, 1]."""
    if code == 0:
        return off
    if code == 1:
        v = 0j
        for k in range(a.size):
            v += a[k] * math.cos(2.0 * math.pi * k * u)
        for k in range(b.size):
            v += b[k] * math.sin(2.0 * math.pi * k * u)
        return v + off
    if code == 2 or (code == 3 and not right):
        v = 0j
        for k in range(a.size):
            v = v * u + a[k]
        return v + off
    if code == 3:
        if mode == 2:
            t = (u - 0.5) * grid_n
            j = min(max(int(math.floor(t)), 0), b.size - 2)
            w = t - j
            return (1.0 - w) * b[j] + w * b[j + 1] + off
        uu = u - 0.5 if mode == 0 else 1.0 - u
        v = 0j
        for k in range(a.size):
            v = v * uu + a[k]
        return v + off
    # samples
    t = u * grid_n
    j = min(max(int(math.floor(t)), 0), a.size - 2)
    w = t - j
    return (1.0 - w) * a[j] + w * a[j + 1] + off


@njit(cache=True)
def _integrate_kernel(code, mode, a, b, off, grid_n, mus, x0, targets, nd,
                      rel_tol, abs_tol, max_step, min_spw, cmat, amat, evec):
    """DP5(4) with PI control, one adaptive mesh per mu; states at every target."""
    m = mus.size
    nt = targets.size
    n = 2 * nd
    out = np.zeros((m, nt, n), dtype=np.complex128)
    ks = np.zeros((7, n), dtype=np.complex128)
    z = np.zeros(n, dtype=np.complex128)
    acc = np.zeros(n, dtype=np.complex128)
    f0 = np.zeros(n, dtype=np.complex128)
    zabs2 = np.zeros(n)
    for im in range(m):
        mu = mus[im]
        cap = min(max_step, 2.0 * math.pi / (min_spw * max(1.0, math.sqrt(abs(mu)))))
        z[:] = 0.0
        z[0] = 1.0
        z[nd + 1] = 1.0
        zabs2[:] = 0.0
        zabs2[0] = 1.0
        zabs2[nd + 1] = 1.0
        x = x0
        h = 0.5 * cap
        err_prev = 1e-4
        have_f0 = False
        for it in range(nt):
            target = targets[it]
            while x < target:
                h = min(h, cap)
                last = target - x <= h * (1.0 + 1e-12)
                step = target - x if last else h
                if step < 1e-14 * max(1.0, abs(x)):
                    return out, _UNDERFLOW, x
                mid = x + 0.5 * step
                kper = math.floor(mid)
                right = mid - kper > 0.5
                for st in range(7):
                    if st == 0 and have_f0:
                        for r in range(n):
                            ks[0, r] = step * f0[r]
                        continue
                    for r in range(n):
                        v = z[r]
                        for j in range(st):
                            v += amat[st, j] * ks[j, r]
                        acc[r] = v
                    qv = _q_local(code, mode, a, b, off, grid_n, x + cmat[st] * step - kper, right) - mu
                    for r in range(nd):
                        ks[st, r] = step * acc[nd + r]
                        ks[st, nd + r] = step * qv * acc[r]
                    if nd == 4:
                        ks[st, nd + 2] -= step * acc[0]
                        ks[st, nd + 3] -= step * acc[1]
                err2 = 0.0
                for r in range(n):
                    e = 0j
                    for j in range(7):
                        e += evec[j] * ks[j, r]
                    an = acc[r].real * acc[r].real + acc[r].imag * acc[r].imag
                    sc = abs_tol + rel_tol * math.sqrt(max(zabs2[r], an))
                    err2 = max(err2, (e.real * e.real + e.imag * e.imag) / (sc * sc))
                err = math.sqrt(err2)
                if not math.isfinite(err):
                    return out, _NONFINITE, x
                if err <= 1.0:
                    x = target if last else x + step
                    z[:] = acc
                    for r in range(n):
                        zabs2[r] = z[r].real * z[r].real + z[r].imag * z[r].imag
                        f0[r] = ks[6, r] / step
                    # FSAL: the last stage is f at the new point, reused only
                    # while the next step stays on the same smooth piece
                    have_f0 = not last
                    err = max(err, 1e-10)
                    h = step * min(5.0, max(0.2, _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA))
                    err_prev = err
                else:
                    h = step * max(0.2, _SAFETY * err ** (-0.2))
            out[im, it, :] = z
    return out, _OK, x


def _targets(q: PotentialSpec, x0: float, xs: list[float]) -> tuple[np.ndarray, list[int]]:
    """Mandatory landing points (requested outputs plus breakpoints of q) and
    the position of each requested output among them."""
    x_end = xs[-1] if xs else x0
    pts = set(float(x) for x in xs)
    bps = q.breakpoints()
    if bps:
        bps_arr = np.asarray(bps)
        for k in range(math.floor(x0) - 1, math.ceil(x_end) + 1):
            for b in bps_arr + k:
                if x0 < b < x_end:
                    pts.add(float(b))
    grid = sorted(pts)
    pos = {x: i for i, x in enumerate(grid)}
    return np.asarray(grid, dtype=float), [pos[float(x)] for x in xs]


def _integrate(q: PotentialSpec, mu, x0: float, xs, cfg: IntegratorConfig, with_derivative: bool):
    mu_arr = np.atleast_1d(np.asarray(mu, dtype=complex)).ravel()
    xs = [float(x) for x in xs]
    if any(b < a for a, b in zip([x0] + xs[:-1], xs)):
        raise ValueError("output points must be non-decreasing and not below x0")
    targets, pos = _targets(q, x0, xs)
    code, mode, a, b, off = q.compiled()
    nd = 4 if with_derivative else 2
    out, status, last_x = _integrate_kernel(
        code, mode, a, b, complex(off), q.grid_n, mu_arr, float(x0), targets, nd,
        cfg.rel_tol, cfg.abs_tol, cfg.max_step, float(cfg.min_steps_per_wave), _C, _A, _E)
    if status == _UNDERFLOW:
        raise IntegrationError("step size underflow", float(last_x))
    if status == _NONFINITE:
        raise IntegrationError("non-finite values", float(last_x))
    # rows: [c, s, dc, ds] values followed by their x-derivatives
    return mu_arr, [out[:, p, :].T for p in pos]


def _state(x: float, mu, mu_arr: np.ndarray, z: np.ndarray, with_derivative: bool) -> TransferState:
    k = 4 if with_derivative else 2
    scalar = np.ndim(mu) == 0
    shape = np.shape(mu)

    def pick(row):
        v = z[row]
        return complex(v[0]) if scalar else v.reshape(shape)

    mu_out = complex(mu) if scalar else mu_arr.reshape(shape)
    if with_derivative:
        return TransferState(x, mu_out, pick(0), pick(k), pick(1), pick(k + 1),
                             pick(2), pick(k + 2), pick(3), pick(k + 3))
    return TransferState(x, mu_out, pick(0), pick(k), pick(1), pick(k + 1))


def trajectory(q: PotentialSpec, mu, x0: float, xs, cfg: IntegratorConfig = DEFAULT_CONFIG,
               with_mu_derivative: bool = False) -> list[TransferState]:
    """Fundamental system started at x0, reported at each of ``xs``."""
    xs = list(xs)
    mu_arr, zs = _integrate(q, mu, x0, xs, cfg, with_mu_derivative)
    return [_state(x, mu, mu_arr, z, with_mu_derivative) for x, z in zip(xs, zs)]


def transfer(q: PotentialSpec, mu, x0: float = 0.0, x1: float = 1.0, cfg: IntegratorConfig = DEFAULT_CONFIG,
             with_mu_derivative: bool = False) -> TransferState:
    if x1 < x0:
        raise ValueError(f"transfer needs x0 <= x1, got {x0} > {x1}")
    if not (-1.0 <= x0 <= 2.0 and -1.0 <= x1 <= 2.0):
        raise ValueError("transfer endpoints must lie in [-1, 2]")
    return trajectory(q, mu, x0, [x1], cfg, with_mu_derivative)[0]


def monodromy(q: PotentialSpec, mu, cfg: IntegratorConfig = DEFAULT_CONFIG,
              with_mu_derivative: bool = False) -> TransferState:
    return transfer(q, mu, 0.0, 1.0, cfg, with_mu_derivative)


def half_transfer(q: PotentialSpec, mu, cfg: IntegratorConfig = DEFAULT_CONFIG,
                  with_mu_derivative: bool = False) -> TransferState:
    return transfer(q, mu, 0.0, 0.5, cfg, with_mu_derivative)


def discriminant(q: PotentialSpec, mu, cfg: IntegratorConfig = DEFAULT_CONFIG, with_derivative: bool = False):
    """(Delta, dDelta/dmu) with Delta = c(1) + s'(1); the derivative is None unless requested."""
    st = monodromy(q, mu, cfg, with_derivative)
    return st.trace, (st.dtrace if with_derivative else None)


def auxiliary_pair(q: PotentialSpec, mu: complex, x: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> AuxiliaryPair:
    """y1 = s'(1/2) c - c'(1/2) s and y2 = c(1/2) s - s(1/2) c evaluated at x."""
    pts = sorted({0.5, float(x)})
    states = dict(zip(pts, trajectory(q, mu, 0.0, pts, cfg))) if x >= 0 else None
    if states is None:
        raise ValueError("auxiliary_pair needs x >= 0")
    h, a = states[0.5], states[float(x)]
    y1 = h.sp * a.c - h.cp * a.s
    y1p = h.sp * a.cp - h.cp * a.sp
    y2 = h.c * a.s - h.s * a.c
    y2p = h.c * a.sp - h.s * a.cp
    return AuxiliaryPair(complex(y1), complex(y1p), complex(y2), complex(y2p))
