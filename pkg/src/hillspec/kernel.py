"""Transformation kernel K(x, t) on the triangle 0 <= x <= 1, |t| <= x.

In characteristic coordinates xi = (x + t)/2, eta = (x - t)/2 the kernel
H(xi, eta) = K(xi + eta, xi - eta) satisfies H_{xi eta} = q(xi + eta) H with
no extra factor (the 1/2 in the coordinates cancels the Jacobian), together
with H(xi, 0) = 1/2 int_0^xi q and H(0, eta) = 0.  Integrating once in each
variable gives

    H(xi, eta) = 1/2 int_0^xi q + int_0^xi int_0^eta q(a + b) H(a, b) db da,

solved by successive approximation on the uniform mesh xi = i/n, eta = j/n
(i + j <= n) with the cumulative trapezoid rule.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import ode
from .ode import DEFAULT_CONFIG, IntegratorConfig
from .potential import PotentialSpec


class KernelError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """H[i, j] = K(x, t) at x = (i + j)/n, t = (i - j)/n; zero outside the triangle."""

    n: int
    H: np.ndarray
    q_ref: PotentialSpec
    iterations: int
    last_update: float

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def row(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """(t, K(x, t)) at x = m/n, t from -x to x."""
        i = np.arange(m + 1)
        return (2 * i - m) / self.n, self.H[i, m - i]

    def diagonal(self) -> np.ndarray:
        """K(x, x) at x = i/n."""
        return self.H[:, 0].copy()

    def anti_diagonal(self) -> np.ndarray:
        """K(x, -x) at x = j/n."""
        return self.H[0, :].copy()

    def index_of(self, x: float) -> int:
        m = int(round(x * self.n))
        if not (0 <= m <= self.n) or abs(m / self.n - x) > 1e-12:
            raise ValueError(f"x = {x!r} is not a node of the kernel mesh (n = {self.n})")
        return m

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "re_K", "im_K"])
            for m in range(self.n + 1):
                t, k = self.row(m)
                x = m / self.n
                for tt, kk in zip(t, k):
                    w.writerow([repr(x), repr(float(tt)), repr(float(kk.real)), repr(float(kk.imag))])


def solve_goursat(q: PotentialSpec, n: int = 256, picard_tol: float = 1e-10, max_iter: int = 50) -> KernelGrid:
    if n < 16:
        raise ValueError(f"n must be >= 16, got {n}")
    h = 1.0 / n
    nodes = np.arange(n + 1) * h
    q_line = q(np.linspace(0.0, 2.0, 2 * n + 1))
    # q(xi + eta) on the mesh
    idx = np.add.outer(np.arange(n + 1), np.arange(n + 1))
    q_mesh = q_line[idx]
    inside = idx <= n
    diag = 0.5 * cumulative_trapezoid(q_line[: n + 1], nodes, initial=0.0)
    base = np.where(inside, diag[:, None], 0.0).astype(complex)

    H = base.copy()
    update = math.inf
    for it in range(1, max_iter + 1):
        F = np.where(inside, q_mesh * H, 0.0)
        G = cumulative_trapezoid(cumulative_trapezoid(F, dx=h, axis=0, initial=0.0), dx=h, axis=1, initial=0.0)
        H_new = np.where(inside, base + G, 0.0)
        update = float(np.max(np.abs(H_new - H)))
        H = H_new
        if update < picard_tol:
            return KernelGrid(n, H, q, it, update)
    raise KernelError(f"successive approximations did not converge in {max_iter} iterations "
                      f"(last update {update:.3e})")


def _sinc_over_lambda(lam: np.ndarray, t: np.ndarray) -> np.ndarray:
    """sin(lam t)/lam with the lam -> 0 limit t."""
    lam = np.asarray(lam, dtype=complex)
    small = np.abs(lam) < 1e-8
    safe = np.where(small, 1.0, lam)
    return np.where(small, t + 0j, np.sin(safe * t) / safe)


def represent(K: KernelGrid, mu, x: float) -> tuple[np.ndarray, np.ndarray]:
    """c(x, mu) and s(x, mu) from the integral representation."""
    mu = np.atleast_1d(np.asarray(mu, dtype=complex))
    lam = np.sqrt(mu)
    m = K.index_of(x)
    t, k = K.row(m)
    lam_c = lam[:, None]
    c = np.cos(lam * x)
    s = _sinc_over_lambda(lam, np.full(lam.shape, x))
    if m > 0:
        c = c + np.trapezoid(k * np.cos(lam_c * t), t, axis=1)
        s = s + np.trapezoid(k * _sinc_over_lambda(lam_c, t[None, :]), t, axis=1)
    return c, s


def representation_residual(q: PotentialSpec, K: KernelGrid, mu_grid, x_grid,
                            cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """max |c_ode - c_rep| and |s_ode - s_rep| over the grids."""
    if K.q_ref is not q and K.q_ref.describe() != q.describe():
        raise ValueError("kernel was solved for a different potential")
    xs = sorted(float(x) for x in x_grid)
    for x in xs:
        K.index_of(x)
    mus = np.atleast_1d(np.asarray(mu_grid, dtype=complex))
    states = ode.trajectory(q, mus, 0.0, xs, cfg)
    worst = 0.0
    for x, st in zip(xs, states):
        c_rep, s_rep = represent(K, mus, x)
        worst = max(worst, float(np.max(np.abs(np.atleast_1d(st.c) - c_rep))),
                    float(np.max(np.abs(np.atleast_1d(st.s) - s_rep))))
    return worst
