"""Complex period-1 potentials and the conditions imposed on them.

A potential is described by a :class:`PotentialSpec` (serializable to JSON)
and evaluated through :func:`evaluate`.  The reflection decompositions about
x = 1/4 (half interval) and x = 1/2 (unit interval), the residuals of the
Riccati-type conditions, and the inverse construction from an odd part all
live here.

Parameter conventions per kind (all coefficients may be complex; in JSON a
complex number is written as a number, ``[re, im]`` or ``{"re":, "im":}``)::

    zero             {}
    constant         {"value": a}
    fourier          {"cos": [a0, a1, ...], "sin": [b0, b1, ...]}
                     q = sum a_k cos(2 pi k x) + sum b_k sin(2 pi k x)
    polynomial_piece {"coeffs": [...], "span": "half" | "unit"}
                     descending powers of x; "half" defines q on [0, 1/2]
                     and fills [1/2, 1] according to ``extension_mode``
    samples          {"re": [...], "im": [...]}  grid_n + 1 nodes on [0, 1]
    b_family         {"q2": [...]}  odd part on [0, 1/2] as a polynomial;
                     q = w**2 + q2 with w(x) = int_{1/2}^{x} q2

Any kind accepts an additive ``"offset"``.  ``explicit_tail`` extension reads
``"tail_re"``/``"tail_im"``: grid_n // 2 + 1 nodes on [1/2, 1].
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

KINDS = ("zero", "constant", "fourier", "polynomial_piece", "samples", "b_family")
EXTENSION_MODES = ("half_period", "reflect_about_half", "explicit_tail")
NORMS = ("L2", "sup")

TWO_PI = 2.0 * math.pi


class PotentialError(ValueError):
    """Malformed potential specification."""


def parse_complex(value: Any, name: str = "value") -> complex:
    if isinstance(value, dict):
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise PotentialError(f"{name}: cannot read complex number {value!r}") from exc
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise PotentialError(f"{name}: complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float, complex, np.number)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise PotentialError(f"{name}: cannot read complex number {value!r}") from exc
    raise PotentialError(f"{name}: cannot read complex number {value!r}")


def _complex_list(values: Any, name: str) -> list[complex]:
    if not isinstance(values, (list, tuple, np.ndarray)):
        raise PotentialError(f"{name}: expected a list, got {type(values).__name__}")
    return [parse_complex(v, f"{name}[{i}]") for i, v in enumerate(values)]


def _real_array(values: Any, name: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise PotentialError(f"{name}: expected real numbers") from exc
    if arr.ndim != 1:
        raise PotentialError(f"{name}: expected a flat list")
    if not np.all(np.isfinite(arr)):
        raise PotentialError(f"{name}: non-finite entries")
    return arr


def _encode(z: complex) -> float | list[float]:
    z = complex(z)
    return z.real if z.imag == 0.0 else [z.real, z.imag]


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """A complex-valued potential of period 1.

    ``params`` is normalized on construction (complex coefficients, numpy
    arrays for samples).  Instances are immutable and safe to share between
    workers.
    """

    kind: str
    params: dict = field(default_factory=dict)
    grid_n: int = 256
    extension_mode: str = "half_period"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PotentialError(f"kind: unknown kind {self.kind!r}, expected one of {KINDS}")
        if not isinstance(self.grid_n, (int, np.integer)) or isinstance(self.grid_n, bool):
            raise PotentialError("grid_n: must be an integer")
        if self.grid_n < 16 or self.grid_n % 2:
            raise PotentialError(f"grid_n: must be an even integer >= 16, got {self.grid_n}")
        if self.extension_mode not in EXTENSION_MODES:
            raise PotentialError(
                f"extension_mode: unknown mode {self.extension_mode!r}, expected one of {EXTENSION_MODES}"
            )
        object.__setattr__(self, "params", self._normalized_params(dict(self.params)))

    # -- validation -------------------------------------------------------

    def _normalized_params(self, p: dict) -> dict:
        out: dict[str, Any] = {}
        out["offset"] = parse_complex(p.pop("offset", 0.0), "params.offset")
        kind = self.kind
        if kind == "constant":
            if "value" not in p:
                raise PotentialError("params.value: required for kind 'constant'")
            out["value"] = parse_complex(p.pop("value"), "params.value")
        elif kind == "fourier":
            out["cos"] = _complex_list(p.pop("cos", []), "params.cos")
            out["sin"] = _complex_list(p.pop("sin", []), "params.sin")
        elif kind in ("polynomial_piece", "b_family"):
            key = "coeffs" if kind == "polynomial_piece" else "q2"
            if key not in p:
                raise PotentialError(f"params.{key}: required for kind {kind!r}")
            coeffs = _complex_list(p.pop(key), f"params.{key}")
            if not coeffs:
                raise PotentialError(f"params.{key}: must not be empty")
            out[key] = coeffs
            if kind == "polynomial_piece":
                span = p.pop("span", "half")
                if span not in ("half", "unit"):
                    raise PotentialError(f"params.span: expected 'half' or 'unit', got {span!r}")
                out["span"] = span
        elif kind == "samples":
            if "re" not in p:
                raise PotentialError("params.re: required for kind 'samples'")
            re = _real_array(p.pop("re"), "params.re")
            im = _real_array(p.pop("im", np.zeros_like(re)), "params.im")
            if re.size != self.grid_n + 1 or im.size != self.grid_n + 1:
                raise PotentialError(
                    f"params.re/params.im: need grid_n + 1 = {self.grid_n + 1} samples, got {re.size}/{im.size}"
                )
            out["values"] = re + 1j * im
        if self._uses_tail(kind, out):
            if self.extension_mode == "explicit_tail":
                if "tail_re" not in p:
                    raise PotentialError("params.tail_re: explicit_tail extension requires tail data")
                re = _real_array(p.pop("tail_re"), "params.tail_re")
                im = _real_array(p.pop("tail_im", np.zeros_like(re)), "params.tail_im")
                m = self.grid_n // 2 + 1
                if re.size != m or im.size != m:
                    raise PotentialError(f"params.tail_re/params.tail_im: need {m} samples on [1/2, 1]")
                out["tail"] = re + 1j * im
        for key in ("tail_re", "tail_im"):
            p.pop(key, None)
        if p:
            raise PotentialError(f"params: unexpected keys {sorted(p)} for kind {self.kind!r}")
        return out

    @staticmethod
    def _uses_tail(kind: str, params: dict) -> bool:
        return kind == "b_family" or (kind == "polynomial_piece" and params.get("span") == "half")

    @property
    def is_piecewise(self) -> bool:
        return self._uses_tail(self.kind, self.params)

    @property
    def is_sampled(self) -> bool:
        return self.kind == "samples" or (self.is_piecewise and self.extension_mode == "explicit_tail")

    @property
    def offset(self) -> complex:
        return self.params["offset"]

    # -- polynomial pieces --------------------------------------------------

    def head_poly(self) -> np.poly1d | None:
        """q on [0, 1/2] as a polynomial, when it is one."""
        if self.kind == "zero":
            return np.poly1d([self.offset])
        if self.kind == "constant":
            return np.poly1d([self.params["value"] + self.offset])
        if self.kind == "polynomial_piece":
            return np.poly1d(self.params["coeffs"]) + self.offset
        if self.kind == "b_family":
            q2 = np.poly1d(self.params["q2"])
            w = q2.integ() - q2.integ()(0.5)
            return w * w + q2 + self.offset
        return None

    def tail_poly(self) -> np.poly1d | None:
        """The right piece of a piecewise kind on [1/2, 1] as a polynomial, when it is one."""
        head = self.head_poly()
        if not self.is_piecewise or head is None or self.extension_mode == "explicit_tail":
            return None
        shift = [1.0, -0.5] if self.extension_mode == "half_period" else [-1.0, 1.0]
        return head(np.poly1d(shift))

    def unit_poly(self) -> np.poly1d | None:
        """q on [0, 1] as a single polynomial, when it is one."""
        if self.kind in ("zero", "constant"):
            return self.head_poly()
        if self.kind == "polynomial_piece" and self.params["span"] == "unit":
            return self.head_poly()
        return None

    # -- evaluation ---------------------------------------------------------

    def _closed(self, x: np.ndarray) -> np.ndarray:
        """Values for x in [0, 1]; piecewise kinds use the head on [0, 1/2]."""
        x = np.asarray(x, dtype=float)
        kind, p = self.kind, self.params
        if kind == "zero":
            vals = np.zeros(x.shape, dtype=complex)
        elif kind == "constant":
            vals = np.full(x.shape, p["value"], dtype=complex)
        elif kind == "fourier":
            vals = np.zeros(x.shape, dtype=complex)
            for k, a in enumerate(p["cos"]):
                vals = vals + a * np.cos(TWO_PI * k * x)
            for k, b in enumerate(p["sin"]):
                vals = vals + b * np.sin(TWO_PI * k * x)
        elif kind == "samples":
            nodes = np.linspace(0.0, 1.0, self.grid_n + 1)
            v = p["values"]
            vals = np.interp(x, nodes, v.real) + 1j * np.interp(x, nodes, v.imag)
        elif kind == "polynomial_piece" and p["span"] == "unit":
            vals = np.polyval(np.asarray(p["coeffs"], dtype=complex), x).astype(complex)
        else:
            head = self.head_poly() - self.offset
            vals = np.empty(x.shape, dtype=complex)
            left = x <= 0.5
            vals[left] = head(x[left])
            vals[~left] = self._tail(x[~left]) - self.offset
        return vals + self.offset

    def _tail(self, x: np.ndarray) -> np.ndarray:
        """Right piece of a piecewise kind on [1/2, 1], one-sided at both ends."""
        x = np.asarray(x, dtype=float)
        head = self.head_poly()
        mode = self.extension_mode
        if mode == "half_period":
            return head(x - 0.5).astype(complex)
        if mode == "reflect_about_half":
            return head(1.0 - x).astype(complex)
        nodes = np.linspace(0.5, 1.0, self.grid_n // 2 + 1)
        t = self.params["tail"]
        return np.interp(x, nodes, t.real) + 1j * np.interp(x, nodes, t.imag) + self.offset

    def __call__(self, x):
        return evaluate(self, x)

    def compiled(self) -> tuple[int, int, np.ndarray, np.ndarray, complex]:
        """(code, mode, a, b, offset): flat numeric form read by the integrator kernel.

        code 0 constant (offset only), 1 fourier (a = cos, b = sin),
        2 polynomial on [0, 1] (a), 3 polynomial head on [0, 1/2] (a) with
        ``mode`` 0 half_period, 1 reflect_about_half, 2 tail samples (b),
        4 samples on [0, 1] (a).
        """
        kind, p, off = self.kind, self.params, self.offset
        empty = np.zeros(1, dtype=complex)
        if kind == "zero":
            return 0, 0, empty, empty, off
        if kind == "constant":
            return 0, 0, empty, empty, p["value"] + off
        if kind == "fourier":
            a = np.asarray(p["cos"] or [0.0], dtype=complex)
            b = np.asarray(p["sin"] or [0.0], dtype=complex)
            return 1, 0, a, b, off
        if kind == "samples":
            return 4, 0, p["values"].astype(complex), empty, off
        if kind == "polynomial_piece" and p["span"] == "unit":
            return 2, 0, np.asarray(p["coeffs"], dtype=complex), empty, off
        head = np.asarray((self.head_poly() - off).coeffs, dtype=complex)
        mode = EXTENSION_MODES.index(self.extension_mode)
        tail = p["tail"].astype(complex) if mode == 2 else empty
        return 3, mode, head, tail, off

    def breakpoints(self) -> list[float]:
        """Points in [0, 1) where q may fail to be smooth."""
        if self.kind == "samples":
            return list(np.arange(self.grid_n) / self.grid_n)
        if self.is_piecewise:
            if self.extension_mode == "explicit_tail":
                m = self.grid_n // 2
                return [0.0] + list(0.5 + np.arange(m) / self.grid_n)
            return [0.0, 0.5]
        return []

    def shifted(self, a: complex) -> "PotentialSpec":
        """The potential q + a."""
        return PotentialSpec(self.kind, _raw_params(self, offset=self.offset + a), self.grid_n, self.extension_mode)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": _json_params(self),
            "grid_n": int(self.grid_n),
            "extension_mode": self.extension_mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        if not isinstance(data, dict):
            raise PotentialError("potential file must hold a JSON object")
        unknown = set(data) - {"kind", "params", "grid_n", "extension_mode", "comment"}
        if unknown:
            raise PotentialError(f"unexpected keys {sorted(unknown)}")
        if "kind" not in data:
            raise PotentialError("kind: missing")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise PotentialError("params: must be an object")
        return cls(
            kind=data["kind"],
            params=params,
            grid_n=data.get("grid_n", 256),
            extension_mode=data.get("extension_mode", "half_period"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PotentialSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise PotentialError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def describe(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _raw_params(q: PotentialSpec, offset: complex | None = None) -> dict:
    p = q.params
    raw: dict[str, Any] = {"offset": q.offset if offset is None else offset}
    for key in ("value", "cos", "sin", "coeffs", "q2", "span"):
        if key in p:
            raw[key] = p[key]
    if "values" in p:
        raw["re"], raw["im"] = p["values"].real, p["values"].imag
    if "tail" in p:
        raw["tail_re"], raw["tail_im"] = p["tail"].real, p["tail"].imag
    return raw


def _json_params(q: PotentialSpec) -> dict:
    p = q.params
    out: dict[str, Any] = {}
    if q.offset != 0:
        out["offset"] = _encode(q.offset)
    if "value" in p:
        out["value"] = _encode(p["value"])
    for key in ("cos", "sin", "coeffs", "q2"):
        if key in p:
            out[key] = [_encode(c) for c in p[key]]
    if "span" in p:
        out["span"] = p["span"]
    if "values" in p:
        out["re"] = p["values"].real.tolist()
        out["im"] = p["values"].imag.tolist()
    if "tail" in p:
        out["tail_re"] = p["tail"].real.tolist()
        out["tail_im"] = p["tail"].imag.tolist()
    return out


# -- convenience constructors -------------------------------------------------

def zero(grid_n: int = 256) -> PotentialSpec:
    return PotentialSpec("zero", {}, grid_n)


def constant(a: complex, grid_n: int = 256) -> PotentialSpec:
    return PotentialSpec("constant", {"value": a}, grid_n)


def fourier(cos: Sequence[complex] = (), sin: Sequence[complex] = (), grid_n: int = 256) -> PotentialSpec:
    return PotentialSpec("fourier", {"cos": list(cos), "sin": list(sin)}, grid_n)


def cos2pi(amplitude: complex = 1.0, k: int = 1, grid_n: int = 256) -> PotentialSpec:
    """amplitude * cos(2 pi k x)"""
    return fourier(cos=[0.0] * k + [amplitude], grid_n=grid_n)


def sin2pi(amplitude: complex = 1.0, k: int = 1, grid_n: int = 256) -> PotentialSpec:
    """amplitude * sin(2 pi k x)"""
    return fourier(sin=[0.0] * k + [amplitude], grid_n=grid_n)


def polynomial(coeffs: Sequence[complex], span: str = "half", extension_mode: str = "half_period",
               grid_n: int = 256) -> PotentialSpec:
    return PotentialSpec("polynomial_piece", {"coeffs": list(coeffs), "span": span}, grid_n, extension_mode)


def samples(values: Sequence[complex]) -> PotentialSpec:
    v = np.asarray(values, dtype=complex)
    return PotentialSpec("samples", {"re": v.real, "im": v.imag}, v.size - 1)


def sampled(q: PotentialSpec, grid_n: int | None = None) -> PotentialSpec:
    """Tabulate q on a uniform grid of [0, 1]."""
    n = q.grid_n if grid_n is None else grid_n
    return samples(q._closed(np.linspace(0.0, 1.0, n + 1)))


# -- evaluation and grids -----------------------------------------------------

def evaluate(q: PotentialSpec, x):
    """q(x) for real x (scalar or array), using the period-1 extension."""
    xa = np.asarray(x, dtype=float)
    vals = q._closed(np.mod(xa, 1.0))
    if np.ndim(x) == 0:
        return complex(vals)
    return vals


def half_grid(q: PotentialSpec) -> np.ndarray:
    return np.linspace(0.0, 0.5, q.grid_n // 2 + 1)


def unit_grid(q: PotentialSpec) -> np.ndarray:
    return np.linspace(0.0, 1.0, q.grid_n + 1)


def sup_norm(q: PotentialSpec) -> float:
    x = np.linspace(0.0, 1.0, max(q.grid_n, 256) + 1)
    return float(np.max(np.abs(q._closed(x))))


def value_bounds(q: PotentialSpec) -> tuple[float, float, float, float]:
    """(min Re q, max Re q, min Im q, max Im q) over a dense grid."""
    x = np.linspace(0.0, 1.0, max(q.grid_n, 256) * 4 + 1)
    v = q._closed(x)
    return float(v.real.min()), float(v.real.max()), float(v.imag.min()), float(v.imag.max())


def norm(values: np.ndarray, x: np.ndarray, kind: str = "L2") -> float:
    if kind not in NORMS:
        raise PotentialError(f"norm: expected one of {NORMS}, got {kind!r}")
    a = np.abs(values)
    if kind == "sup":
        return float(a.max()) if a.size else 0.0
    return float(math.sqrt(np.trapezoid(a * a, x)))


# -- decompositions -----------------------------------------------------------

@dataclass(frozen=True)
class HalfDecomposition:
    """Even/odd parts of q under x -> 1/2 - x, tabulated on [0, 1/2]."""

    x: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


@dataclass(frozen=True)
class UnitDecomposition:
    """Even/odd parts of q under x -> 1 - x, tabulated on [0, 1]."""

    x: np.ndarray
    q1: np.ndarray
    q2: np.ndarray


def decompose_half(q: PotentialSpec) -> HalfDecomposition:
    x = half_grid(q)
    v = q._closed(x)
    r = v[::-1]  # q(1/2 - x) on the symmetric grid
    return HalfDecomposition(x, (v + r) / 2, (v - r) / 2)


def decompose_unit(q: PotentialSpec) -> UnitDecomposition:
    x = unit_grid(q)
    v = q._closed(x)
    # q(1) is the period-1 value q(0); the closed evaluation would give the
    # left limit, which differs for piecewise kinds.
    v_per = v.copy()
    v_per[-1] = v[0] if q.is_piecewise else v[-1]
    r = v_per[::-1]
    return UnitDecomposition(x, (v_per + r) / 2, (v_per - r) / 2)


def _odd_part_poly(p: np.poly1d, center: float) -> tuple[np.poly1d, np.poly1d]:
    reflected = p(np.poly1d([-1.0, 2.0 * center]))
    return (p + reflected) / 2, (p - reflected) / 2


def _integral_from_right(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """int_{x[-1]}^{x} of the tabulated function, composite trapezoid."""
    acc = cumulative_trapezoid(values, x, initial=0.0)
    return acc - acc[-1]


def _riccati_residual(x, q1, q2, poly: np.poly1d | None, center: float, norm_kind: str) -> float:
    if poly is not None:
        p1, p2 = _odd_part_poly(poly, center)
        anti = p2.integ()
        w = anti(x) - anti(x[-1])
        return norm(p1(x) - w * w, x, norm_kind)
    w = _integral_from_right(q2, x)
    return norm(q1 - w * w, x, norm_kind)


def residual_condition_B(q: PotentialSpec, norm_kind: str = "L2") -> float:
    """|| q1 - (int_{1/2}^{x} q2)^2 || over [0, 1/2]."""
    d = decompose_half(q)
    return _riccati_residual(d.x, d.q1, d.q2, q.head_poly(), 0.25, norm_kind)


def _unit_halves(q: PotentialSpec):
    """One-sided values of a piecewise q on [0, 1/2] and [1/2, 1].

    Returns (xl, ql, xr, qr); the reflection x -> 1 - x maps one half onto the
    other, so the odd part on the left is (ql - qr[::-1]) / 2.
    """
    m = q.grid_n // 2
    xl = np.linspace(0.0, 0.5, m + 1)
    xr = np.linspace(0.5, 1.0, m + 1)
    return xl, q._closed(xl), xr, q._tail(xr)


def _split_norm(rl: np.ndarray, rr: np.ndarray, xl: np.ndarray, xr: np.ndarray, norm_kind: str) -> float:
    nl, nr = norm(rl, xl, norm_kind), norm(rr, xr, norm_kind)
    return max(nl, nr) if norm_kind == "sup" else math.hypot(nl, nr)


def _piecewise_BB(q: PotentialSpec, norm_kind: str) -> float:
    xl, ql, xr, qr = _unit_halves(q)
    head, tail = q.head_poly(), q.tail_poly()
    if head is not None and tail is not None:
        flip = np.poly1d([-1.0, 1.0])
        o2l, o2r = (head - tail(flip)) / 2, (tail - head(flip)) / 2
        e1l, e1r = (head + tail(flip)) / 2, (tail + head(flip)) / 2
        al, ar = o2l.integ(), o2r.integ()
        wr = ar(xr) - ar(1.0)
        wl = al(xl) - al(0.5) + ar(0.5) - ar(1.0)
        return _split_norm(e1l(xl) - wl * wl, e1r(xr) - wr * wr, xl, xr, norm_kind)
    q2l, q2r = (ql - qr[::-1]) / 2, (qr - ql[::-1]) / 2
    q1l, q1r = (ql + qr[::-1]) / 2, (qr + ql[::-1]) / 2
    wr = _integral_from_right(q2r, xr)
    wl = _integral_from_right(q2l, xl) + wr[0]
    return _split_norm(q1l - wl * wl, q1r - wr * wr, xl, xr, norm_kind)


def residual_condition_BB(q: PotentialSpec, norm_kind: str = "L2") -> float:
    """|| q1 - (int_{1}^{x} q2)^2 || over [0, 1]."""
    if q.is_piecewise:
        # q may jump at 1/2; integrate each half with its own one-sided values
        return _piecewise_BB(q, norm_kind)
    d = decompose_unit(q)
    return _riccati_residual(d.x, d.q1, d.q2, q.unit_poly(), 0.5, norm_kind)


def residual_symmetry(q: PotentialSpec, scope: str = "half", norm_kind: str = "L2") -> float:
    """|| q(x) - q(c - x) || with c = 1/2 ("half") or c = 1 ("unit")."""
    if scope == "half":
        d = decompose_half(q)
    elif scope == "unit":
        if q.is_piecewise:
            xl, ql, xr, qr = _unit_halves(q)
            return _split_norm(ql - qr[::-1], qr - ql[::-1], xl, xr, norm_kind)
        d = decompose_unit(q)
    else:
        raise PotentialError(f"scope: expected 'half' or 'unit', got {scope!r}")
    return 2.0 * norm(d.q2, d.x, norm_kind)


def default_tolerance(q: PotentialSpec) -> float:
    if q.is_sampled:
        return 10.0 / q.grid_n**2
    return 1e-8


@dataclass(frozen=True)
class ConditionReport:
    residual_B: float
    residual_BB: float
    residual_sym_half: float
    residual_sym_unit: float
    norm_used: str
    tolerance: float

    @property
    def verdicts(self) -> dict[str, bool]:
        return {
            "B": self.residual_B < self.tolerance,
            "BB": self.residual_BB < self.tolerance,
            "sym_half": self.residual_sym_half < self.tolerance,
            "sym_unit": self.residual_sym_unit < self.tolerance,
        }

    def to_dict(self) -> dict:
        return {
            "residual_B": self.residual_B,
            "residual_BB": self.residual_BB,
            "residual_sym_half": self.residual_sym_half,
            "residual_sym_unit": self.residual_sym_unit,
            "norm_used": self.norm_used,
            "tolerance": self.tolerance,
            "verdicts": self.verdicts,
        }


def condition_report(q: PotentialSpec, norm_kind: str = "L2", tol: float | None = None) -> ConditionReport:
    return ConditionReport(
        residual_B=residual_condition_B(q, norm_kind),
        residual_BB=residual_condition_BB(q, norm_kind),
        residual_sym_half=residual_symmetry(q, "half", norm_kind),
        residual_sym_unit=residual_symmetry(q, "unit", norm_kind),
        norm_used=norm_kind,
        tolerance=default_tolerance(q) if tol is None else tol,
    )


# -- construction -------------------------------------------------------------

def construct_from_q2(q2, extension_mode: str = "half_period", grid_n: int = 256, tail=None,
                      antisym_tol: float = 1e-12) -> PotentialSpec:
    """Build q = (int_{1/2}^{x} q2)^2 + q2 on [0, 1/2] satisfying condition (B).

    ``q2`` is either a sequence of polynomial coefficients (descending
    powers; the result is an exact ``b_family`` spec), an array of
    grid_n // 2 + 1 samples on [0, 1/2], or a callable sampled on that grid.
    The last two produce a ``samples`` spec whose node at x = 1/2 carries the
    value from [0, 1/2]; a half_period jump there is smeared over one cell.

    Inputs not odd about x = 1/4 are antisymmetrized with a warning.
    """
    if extension_mode not in EXTENSION_MODES:
        raise PotentialError(f"extension_mode: unknown mode {extension_mode!r}")
    if extension_mode == "explicit_tail" and tail is None:
        raise PotentialError("tail: explicit_tail extension requires tail data")
    m = grid_n // 2
    params: dict[str, Any] = {}
    if tail is not None:
        t = np.asarray(tail, dtype=complex)
        params["tail_re"], params["tail_im"] = t.real, t.imag

    if callable(q2):
        q2 = np.asarray([complex(q2(x)) for x in np.linspace(0.0, 0.5, m + 1)])
    if isinstance(q2, np.ndarray) and q2.size == m + 1 and q2.size > 2:
        v = q2.astype(complex)
        odd = (v - v[::-1]) / 2
        if np.max(np.abs(v - odd), initial=0.0) > antisym_tol * (1 + np.max(np.abs(v))):
            warnings.warn("q2 is not odd about x = 1/4; using its odd part", stacklevel=2)
        x = np.linspace(0.0, 0.5, m + 1)
        w = _integral_from_right(odd, x)
        head = w * w + odd
        if extension_mode == "half_period":
            tail_vals = head.copy()
            tail_vals[0] = head[-1]
        elif extension_mode == "reflect_about_half":
            tail_vals = head[::-1]
        else:
            tail_vals = np.asarray(tail, dtype=complex)
            if tail_vals.size != m + 1:
                raise PotentialError(f"tail: need {m + 1} samples on [1/2, 1]")
            tail_vals = tail_vals.copy()
            tail_vals[0] = head[-1]
        return samples(np.concatenate([head, tail_vals[1:]]))

    coeffs = [parse_complex(c, f"q2[{i}]") for i, c in enumerate(q2)]
    p = np.poly1d(coeffs)
    _, odd = _odd_part_poly(p, 0.25)
    scale = 1.0 + float(np.max(np.abs(p.coeffs)))
    if np.max(np.abs((p - odd).coeffs)) > antisym_tol * scale:
        warnings.warn("q2 is not odd about x = 1/4; using its odd part", stacklevel=2)
        coeffs = list(odd.coeffs)
        # strip roundoff in the even-degree coefficients of the odd part
        coeffs = [0j if abs(c) < 1e-15 * scale else c for c in coeffs]
    params["q2"] = coeffs if any(c != 0 for c in coeffs) else [0.0]
    return PotentialSpec("b_family", params, grid_n, extension_mode)


def parse_q2_expression(text: str) -> list[complex]:
    """Parse ``poly:16,-4`` (descending coefficients) into a coefficient list."""
    if not text.startswith("poly:"):
        raise PotentialError(f"q2: expected 'poly:c_n,...,c_0', got {text!r}")
    body = text[len("poly:"):]
    try:
        return [parse_complex(tok, "q2") for tok in body.split(",") if tok.strip()]
    except PotentialError:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise PotentialError(f"q2: cannot parse {text!r}") from exc

