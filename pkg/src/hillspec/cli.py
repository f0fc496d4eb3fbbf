"""Command-line front end.

    hillspec spectrum --potential q.json --tags P,AP --re 0..170
    hillspec discriminant --potential q.json --re 0..100
    hillspec check q.json
    hillspec construct --q2 "poly:16,-4" --extension half_period -o bfam.json
    hillspec verify --potential bfam.json -o report.json
    hillspec kernel --potential q.json --n 256 -o kernel.csv

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 verification
left inconclusive.  Every file written starts with a header carrying the tool
version, a configuration hash and the tolerances (a ``#`` comment line for
CSV, a ``header`` / ``comment`` field for JSON).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, harness, kernel, ode, spectra
from .ode import DEFAULT_CONFIG, IntegrationError, IntegratorConfig
from .potential import PotentialError, PotentialSpec, condition_report, construct_from_q2, parse_q2_expression
from .spectra import SearchRegion, SpectrumError

log = logging.getLogger("hillspec")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 2, 3, 4

SPECTRUM_COLUMNS = ["tag", "re_mu", "im_mu", "algebraic_order", "geometric_multiplicity",
                    "char_residual", "monodromy_residual", "is_lowest"]


class UsageError(ValueError):
    """Bad command-line input (exit 2)."""


@dataclass
class RunConfig:
    """Validated settings for one invocation."""

    subcommand: str
    potential_path: str | None = None
    region: SearchRegion | None = None
    integrator: dict = field(default_factory=dict)
    output_dir: str = "."
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise UsageError(f"format: expected 'csv' or 'json', got {self.format!r}")
        out = Path(self.output_dir)
        if out.exists() and not out.is_dir():
            raise UsageError(f"output_dir: {out} is not a directory")
        known = {f.name for f in fields(IntegratorConfig)}
        unknown = set(self.integrator) - known
        if unknown:
            raise UsageError(f"integrator: unknown keys {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise UsageError(f"unknown keys {sorted(unknown)}")
        data = dict(data)
        if isinstance(data.get("region"), (list, tuple)):
            data["region"] = SearchRegion(*map(float, data["region"]))
        return cls(**data)

    @property
    def cfg(self) -> IntegratorConfig:
        try:
            return IntegratorConfig(**{**vars(DEFAULT_CONFIG), **self.integrator})
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc

    def output(self, name: str) -> Path:
        out = Path(self.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / name


# -- argument helpers ----------------------------------------------------------

def parse_range(text: str, name: str) -> tuple[float, float]:
    """'a..b' -> (a, b)."""
    try:
        lo, hi = text.split("..")
        return float(lo), float(hi)
    except ValueError as exc:
        raise UsageError(f"--{name}: expected 'lo..hi', got {text!r}") from exc


def _region(args, q: PotentialSpec) -> SearchRegion:
    base = spectra.default_region(q)
    re = parse_range(args.re, "re") if args.re else (base.re_min, base.re_max)
    im = parse_range(args.im, "im") if args.im else (base.im_min, base.im_max)
    try:
        return SearchRegion(re[0], re[1], im[0], im[1])
    except ValueError as exc:
        raise UsageError(f"region: {exc}") from exc


def _integrator_overrides(args) -> dict:
    out = {}
    for name in ("rel_tol", "abs_tol", "max_step", "min_steps_per_wave"):
        v = getattr(args, name, None)
        if v is not None:
            out[name] = v
    return out


def _load(path: str | None) -> PotentialSpec:
    if not path:
        raise UsageError("a potential file is required (--potential PATH)")
    if not Path(path).is_file():
        raise UsageError(f"potential file not found: {path}")
    return PotentialSpec.load(path)


def _run_config(args, q: PotentialSpec | None, region: SearchRegion | None = None) -> RunConfig:
    return RunConfig(subcommand=args.command, potential_path=getattr(args, "potential", None),
                     region=region, integrator=_integrator_overrides(args),
                     output_dir=args.output_dir, format=getattr(args, "format", "csv"))


def _header(q: PotentialSpec, region: SearchRegion | None, cfg: IntegratorConfig) -> dict:
    return harness.make_header(q, region or spectra.default_region(q), cfg)


def header_line(header: dict) -> str:
    tol = ",".join(f"{k}={v:g}" for k, v in sorted(header["tolerances"].items()))
    return f"# {header['tool']} {header['version']} config_hash={header['config_hash']} tolerances={tol}"


def _write_csv(path: Path, header: dict, columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header_line(header) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=harness._jsonable) + "\n")


# -- subcommands ---------------------------------------------------------------

def spectrum_rows(reports) -> list[list]:
    rows = []
    for rep in reports:
        for e in rep.eigenvalues:
            rows.append([e.tag, e.mu.real, e.mu.imag, e.algebraic_order, e.geometric_multiplicity,
                         e.char_residual, e.monodromy_residual, e.is_lowest])
    return rows


def cmd_spectrum(args) -> int:
    q = _load(args.potential)
    region = _region(args, q)
    rc = _run_config(args, q, region)
    cfg = rc.cfg
    tags = [t.strip() for t in args.tags.split(",") if t.strip()]
    for t in tags:
        if t not in spectra.TAGS:
            raise UsageError(f"--tags: unknown tag {t!r}, expected some of {list(spectra.TAGS)}")
    reports = harness._pmap(lambda t: spectra.find_eigenvalues(q, t, region, cfg), tags)
    header = _header(q, region, cfg)
    if rc.format == "json":
        payload = {"header": header, "spectra": {r.tag: [dict(zip(SPECTRUM_COLUMNS, row))
                                                         for row in spectrum_rows([r])] for r in reports}}
        path = rc.output("spectrum.json")
        _write_json(path, payload)
        print(path)
    else:
        for rep in reports:
            path = rc.output(f"spectrum_{rep.tag}.csv")
            _write_csv(path, header, SPECTRUM_COLUMNS, spectrum_rows([rep]))
            print(path)
    incomplete = [r.tag for r in reports if not r.complete]
    if incomplete:
        log.warning("unresolved search boxes for %s", ",".join(incomplete))
    return EXIT_OK


def cmd_discriminant(args) -> int:
    q = _load(args.potential)
    re_lo, re_hi = parse_range(args.re, "re")
    if not re_lo < re_hi:
        raise UsageError(f"--re: degenerate segment {args.re!r} (need lo < hi)")
    if args.n < 2 or args.map_n < 2:
        raise UsageError("--n and --map-n must be at least 2")
    im_lo, im_hi = parse_range(args.map_im, "map-im")
    if not im_lo < im_hi:
        raise UsageError(f"--map-im: degenerate range {args.map_im!r}")
    region = SearchRegion(re_lo, re_hi, im_lo, im_hi)
    rc = _run_config(args, q, region)
    cfg = rc.cfg
    header = _header(q, region, cfg)

    mus = np.linspace(re_lo, re_hi, args.n).astype(complex)
    delta, _ = ode.discriminant(q, mus, cfg)
    path = rc.output("discriminant_trace.csv")
    _write_csv(path, header, ["re_mu", "re_delta", "im_delta"],
               zip(mus.real, np.real(delta), np.imag(delta)))
    print(path)

    re_g = np.linspace(re_lo, re_hi, args.map_n)
    im_g = np.linspace(im_lo, im_hi, args.map_n)
    grid = (re_g[None, :] + 1j * im_g[:, None]).ravel()
    dg, _ = ode.discriminant(q, grid, cfg)
    f = np.asarray(dg) ** 2 - 4.0
    path = rc.output("discriminant_map.csv")
    with np.errstate(divide="ignore"):
        logabs = np.log10(np.abs(f))
    _write_csv(path, header, ["re_mu", "im_mu", "re_f", "im_f", "log10_abs_f"],
               zip(grid.real, grid.imag, f.real, f.imag, logabs))
    print(path)
    return EXIT_OK


def cmd_check(args) -> int:
    path = args.file or args.potential
    q = _load(path)
    rep = condition_report(q, args.norm, args.tol)
    header = _header(q, None, DEFAULT_CONFIG)
    payload = {"header": header, "potential_id": q.describe(), **rep.to_dict()}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_construct(args) -> int:
    coeffs = parse_q2_expression(args.q2)
    tail = None
    if args.tail:
        data = json.loads(Path(args.tail).read_text())
        tail = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", np.zeros(len(data["re"]))))
    q = construct_from_q2(coeffs, args.extension, args.grid_n, tail)
    d = q.to_dict()
    d["comment"] = header_line(_header(q, None, DEFAULT_CONFIG)).lstrip("# ")
    out = Path(args.output)
    out.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    q = _load(args.potential)
    region = _region(args, q) if (args.re or args.im) else None
    rc = _run_config(args, q, region)
    rep = harness.verify(q, region, rc.cfg, potential_id=Path(args.potential).stem)
    out = Path(args.output) if args.output else rc.output("verification.json")
    out.write_text(rep.to_json() + "\n")
    print(rep.summary())
    print(out)
    if any(v.verdict == harness.INCONCLUSIVE for v in rep.verdict_per_theorem.values()):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_kernel(args) -> int:
    q = _load(args.potential)
    rc = _run_config(args, q)
    K = kernel.solve_goursat(q, args.n, args.picard_tol)
    out = Path(args.output) if args.output else rc.output("kernel.csv")
    header = _header(q, None, rc.cfg)
    rows = []
    for m in range(K.n + 1):
        t, k = K.row(m)
        rows.extend((m / K.n, tt, kk.real, kk.imag) for tt, kk in zip(t, k))
    _write_csv(out, header, ["x", "t", "re_K", "im_K"], rows)
    mus = np.array([0.0, 10.0, 50.0, 5.0 + 5.0j])
    res = kernel.representation_residual(q, K, mus, [(K.n // 4) / K.n, (K.n // 2) / K.n, 1.0], rc.cfg)
    print(f"picard iterations: {K.iterations}  representation residual: {res:.3e}")
    print(out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hillspec", description="Spectral analysis of Hill's equation.")
    p.add_argument("--version", action="version", version=f"hillspec {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, region=True, potential=True):
        if potential:
            sp.add_argument("--potential", help="potential spec (JSON)")
        if region:
            sp.add_argument("--re", help="real range of the search region, 'lo..hi'")
            sp.add_argument("--im", help="imaginary range of the search region, 'lo..hi'")
        sp.add_argument("--output-dir", default=".", help="directory for output files")
        sp.add_argument("--rel-tol", dest="rel_tol", type=float)
        sp.add_argument("--abs-tol", dest="abs_tol", type=float)
        sp.add_argument("--max-step", dest="max_step", type=float)
        sp.add_argument("--min-steps-per-wave", dest="min_steps_per_wave", type=int)

    sp = sub.add_parser("spectrum", help="eigenvalues per boundary-condition tag")
    common(sp)
    sp.add_argument("--tags", default="P,AP", help="comma separated, e.g. D,N,P,AP")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("discriminant", help="trace along a real segment and a map of Delta^2 - 4")
    common(sp, region=False)
    sp.add_argument("--re", required=True, help="real segment 'lo..hi'")
    sp.add_argument("--n", type=int, default=201, help="samples along the segment")
    sp.add_argument("--map-im", default="-5..5", help="imaginary range of the map")
    sp.add_argument("--map-n", type=int, default=41, help="map resolution per axis")
    sp.set_defaults(func=cmd_discriminant)

    sp = sub.add_parser("check", help="condition residuals of a potential")
    sp.add_argument("file", nargs="?", help="potential spec (JSON)")
    sp.add_argument("--potential", help="potential spec (JSON)")
    sp.add_argument("--norm", choices=("L2", "sup"), default="L2")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("-o", "--output", help="also write the JSON here")
    sp.set_defaults(func=cmd_check, output_dir=".")

    sp = sub.add_parser("construct", help="build a (B) potential from its odd part")
    sp.add_argument("--q2", required=True, help="odd part as 'poly:c_n,...,c_0'")
    sp.add_argument("--extension", default="half_period",
                    choices=("half_period", "reflect_about_half", "explicit_tail"))
    sp.add_argument("--tail", help="JSON file with 're' (and 'im') tail values on [1/2, 1]")
    sp.add_argument("--grid-n", type=int, default=256)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_construct, output_dir=".")

    sp = sub.add_parser("verify", help="full verification report")
    common(sp)
    sp.add_argument("-o", "--output", help="report path (default OUTPUT_DIR/verification.json)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("kernel", help="transformation kernel on the triangle")
    common(sp, region=False)
    sp.add_argument("--n", type=int, default=256)
    sp.add_argument("--picard-tol", type=float, default=1e-10)
    sp.add_argument("-o", "--output", help="CSV path (default OUTPUT_DIR/kernel.csv)")
    sp.set_defaults(func=cmd_kernel)
    return p


RANGE_FLAGS = ("--re", "--im", "--map-im")


def _glue_ranges(argv: list[str]) -> list[str]:
    """'--re -1..170' -> '--re=-1..170' so argparse does not read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_ranges(list(sys.argv[1:] if argv is None else argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, PotentialError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationError, SpectrumError, kernel.KernelError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
