"""Batch front door: seeded, configured runs of every experiment.

Every subcommand validates its configuration up front, computes, and
writes CSV.  Floats are printed with 17 significant digits, so re-reading
a CSV loses nothing and two runs with the same configuration and seed
produce byte-identical CSV bodies.  When ``--output PATH`` is given, a
JSON manifest ``PATH.manifest.json`` records the resolved configuration,
package version, and seed (the manifest carries a timestamp and is not
part of the byte-identical contract).

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O failure.

Path CSV format (``write_path_csv``): header ``time,state_0,...``, one row
for the initial state at time 0 and one row per jump with the post-jump
state; times are printed like every other float.

Subcommands: spectrum, trace-table, fk-kernel, fk-trace, weak-convergence,
padic-density, padic-fk, padic-checks, selfcheck.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import re
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, feynman_kac as fk, lattice, qops
from .padic import (
    PadicNumber,
    RadialDensitySpec,
    moment_and_bound_checks,
    padic_fk_kernel,
    positive_definiteness_check,
    radial_density,
    semigroup_convolution_check,
    sphere_mass,
)
from .paths import CadlagPath, WalkParams
from .rng import RngStreams, generator

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """A fully validated run: command, parameters, seed, output target."""

    command: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    substreams: int = 16
    output: str | None = None
    threads: int = 1

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "substreams": self.substreams,
            "output": self.output,
            "threads": self.threads,
            "version": __version__,
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(stream, header: list[str], rows: list[list]) -> None:
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\n")


def write_path_csv(path: CadlagPath, stream) -> None:
    """Export a step path: columns time,state_0,...; one row per jump."""
    first = np.atleast_1d(np.asarray(path.states[0], dtype=np.float64))
    header = ["time"] + [f"state_{i}" for i in range(len(first))]
    rows = [[0.0, *first]]
    for t, s in zip(path.jump_times, path.states[1:]):
        rows.append([t, *np.atleast_1d(np.asarray(s, dtype=np.float64))])
    write_csv(stream, header, rows)


def parse_potential(text: str) -> qops.PotentialSpec:
    """Parse a potential: 'harmonic', 'abs', 'zero', c, or a polynomial in x.

    Polynomials accept terms like ``0.5*x^2``, ``x^4``, ``2*x``, ``1.5``
    joined by + or -.  ``q`` is accepted as a synonym for ``x``.
    """
    s = text.strip().lower().replace("q", "x").replace("**", "^")
    if s in ("harmonic", "0.5*x^2", "x^2/2"):
        return qops.PotentialSpec.harmonic()
    if s in ("abs", "|x|"):
        return qops.PotentialSpec.radial_power(1.0, 1.0)
    if s in ("zero", "0"):
        return qops.PotentialSpec.zero()
    try:
        return qops.PotentialSpec.constant(float(s))
    except ValueError:
        pass
    coeffs: dict[int, float] = {}
    term_re = re.compile(
        r"^([+-]?\d*\.?\d*(?:e[+-]?\d+)?)?(\*?x(?:\^(\d+))?)?$")
    pos = re.sub(r"\s+", "", s)
    pieces = re.findall(r"[+-]?[^+-]+", pos)
    if not pieces:
        raise ConfigError(f"cannot parse potential {text!r}")
    for piece in pieces:
        m = term_re.match(piece)
        if not m or (m.group(1) in (None, "", "+", "-") and not m.group(2)):
            raise ConfigError(f"cannot parse potential term {piece!r} in {text!r}")
        coef_s, xpart, power_s = m.group(1), m.group(2), m.group(3)
        coef = {None: 1.0, "": 1.0, "+": 1.0, "-": -1.0}.get(coef_s)
        if coef is None:
            coef = float(coef_s)
        power = 0 if not xpart else (1 if power_s is None else int(power_s))
        coeffs[power] = coeffs.get(power, 0.0) + coef
    top = max(coeffs)
    return qops.PotentialSpec.polynomial([coeffs.get(j, 0.0) for j in range(top + 1)])


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse integer list {text!r}") from e


def _parse_range(text: str) -> list[int]:
    """'a..b' inclusive, or a comma list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return _parse_int_list(text)


def _parse_padic_point(text: str, p: int, precision: int = 32) -> PadicNumber:
    """Parse 'n' or 'n*p^v' as the p-adic number n * p**v."""
    s = text.strip().lower().replace("**", "^")
    m = re.match(r"^([+-]?\d+)(?:\*p\^([+-]?\d+))?$", s)
    if not m:
        raise ConfigError(f"cannot parse p-adic point {text!r} (use 'n' or 'n*p^v')")
    n = int(m.group(1))
    v = int(m.group(2)) if m.group(2) else 0
    return PadicNumber.from_unit(p, v, n, precision) if n else PadicNumber.zero(p, precision)


# ---------------------------------------------------------------------------
# subcommand implementations: each returns (header, rows)
# ---------------------------------------------------------------------------


def _run_spectrum(cfg: RunConfig):
    p = cfg.parameters
    g = lattice.make_grid(p["N"], p["d"])
    V = parse_potential(p["V"])
    builder = {"schwinger": qops.schwinger_hamiltonian,
               "stochastic": qops.stochastic_hamiltonian}[p["hamiltonian"]]
    dec = qops.eigendecompose(builder(g, V))
    count = min(p["count"], g.size)
    rows = [[n, dec.eigenvalues[n]] for n in range(count)]
    return ["n", "eigenvalue"], rows


def _run_trace_table(cfg: RunConfig):
    p = cfg.parameters
    V = parse_potential(p["V"])
    streams = RngStreams(cfg.seed, cfg.substreams)
    rows_out = []
    rows = fk.convergence_experiment(V, p["t"], p["N_list"], p["samples"],
                                     streams, marginal_samples=p["marginal_samples"])
    for r in rows:
        rows_out.append([r.N, r.epsilon, r.exact_trace, r.mc_trace.mean,
                         r.mc_trace.stderr, r.trace_norm_gap, r.marginal_gap])
    header = ["N", "epsilon", "exact_trace", "mc_trace", "mc_stderr",
              "trace_norm_gap", "marginal_gap"]
    return header, rows_out


def _run_fk_kernel(cfg: RunConfig):
    p = cfg.parameters
    g = lattice.make_grid(p["N"], p["d"])
    V = parse_potential(p["V"])
    w = WalkParams(epsilon=g.epsilon, d=g.d)
    streams = RngStreams(cfg.seed, cfg.substreams)
    a = p["a"] if p["a"] is not None else [0] * g.d
    b = p["b"] if p["b"] is not None else [0] * g.d
    est = fk.fk_kernel_lattice(w, V, p["T"], a, b, p["samples"], streams)
    header = ["N", "T", "a", "b", "mean", "stderr", "n_samples", "seed", "substreams"]
    row = [p["N"], p["T"], " ".join(map(str, a)), " ".join(map(str, b)),
           est.mean, est.stderr, est.n_samples, est.seed, est.substreams]
    return header, [row]


def _run_fk_trace(cfg: RunConfig):
    p = cfg.parameters
    g = lattice.make_grid(p["N"], p["d"])
    V = parse_potential(p["V"])
    streams = RngStreams(cfg.seed, cfg.substreams)
    est = fk.fk_trace(g, V, p["t"], p["samples"], streams)
    exact = qops.semigroup(qops.stochastic_hamiltonian(g, V), p["t"]).trace()
    header = ["N", "t", "mc_trace", "mc_stderr", "exact_trace",
              "n_samples", "seed", "substreams"]
    return header, [[p["N"], p["t"], est.mean, est.stderr, exact,
                     est.n_samples, est.seed, est.substreams]]


def _run_weak_convergence(cfg: RunConfig):
    p = cfg.parameters
    streams = RngStreams(cfg.seed, cfg.substreams)
    rows = []
    for N in p["N_list"]:
        g = lattice.make_grid(N, 1)
        gap = fk.bridge_midpoint_gap(g, p["t"], p["samples"], streams)
        rows.append([N, g.epsilon, gap])
    return ["N", "epsilon", "kolmogorov_gap"], rows


def _run_padic_density(cfg: RunConfig):
    p = cfg.parameters
    spec = RadialDensitySpec(p=p["p"], b=p["b"], t=p["t"])
    rows = []
    for m in p["m_list"]:
        f = radial_density(spec, m)
        vol = float(spec.p) ** m * (1.0 - 1.0 / spec.p)
        rows.append([m, f, vol, sphere_mass(spec, m)])
    return ["m", "f", "sphere_volume", "probability"], rows


def _run_padic_fk(cfg: RunConfig):
    p = cfg.parameters
    spec = RadialDensitySpec(p=p["p"], b=p["b"], t=p["T"])
    V = parse_potential(p["V"])
    x = _parse_padic_point(p["x"], spec.p)
    y = _parse_padic_point(p["y"], spec.p)
    streams = RngStreams(cfg.seed, cfg.substreams)
    est = padic_fk_kernel(spec, V, p["T"], x, y, p["samples"], p["J"], streams)
    header = ["p", "b", "T", "J", "mean", "stderr", "n_samples", "seed", "substreams"]
    return header, [[p["p"], p["b"], p["T"], p["J"], est.mean, est.stderr,
                     est.n_samples, est.seed, est.substreams]]


def _run_padic_checks(cfg: RunConfig):
    p = cfg.parameters
    spec = RadialDensitySpec(p=p["p"], b=p["b"], t=p["t"])
    rows = []
    rep = moment_and_bound_checks(spec, p["k"])
    rows.append(["moment_sup_ratio", rep.sup_moment_ratio, "finite",
                 bool(np.isfinite(rep.sup_moment_ratio))])
    rows.append(["density_scaling_sup", rep.sup_density_scaling, "finite",
                 bool(np.isfinite(rep.sup_density_scaling))])
    dev = semigroup_convolution_check(spec, p["s"], p["t"])
    rows.append(["convolution_deviation", dev, "< 1e-8", bool(dev < 1e-8)])
    rng = generator(cfg.seed)
    pts = []
    seen = set()
    while len(pts) < p["points"]:
        cand = PadicNumber.from_unit(spec.p, int(rng.integers(-4, 5)),
                                     int(rng.integers(1, spec.p ** 6)), 32)
        if cand.is_zero or (cand.valuation, cand.unit) in seen:
            continue
        seen.add((cand.valuation, cand.unit))
        pts.append(cand)
    mineig = positive_definiteness_check(spec, pts)
    rows.append(["gram_min_eigenvalue", mineig, ">= -1e-10", bool(mineig >= -1e-10)])
    return ["check", "value", "requirement", "passed"], rows


def _run_selfcheck(cfg: RunConfig):
    from .selfcheck import run_selfcheck

    results = run_selfcheck(fast=cfg.parameters["fast"], log=print)
    # keep the CSV one value per cell: details may carry commas
    rows = [[r.name, r.passed, r.detail.replace(",", ";")] for r in results]
    if not all(r.passed for r in results):
        raise ArithmeticError("selfcheck failed")
    return ["check", "passed", "detail"], rows


_RUNNERS = {
    "spectrum": _run_spectrum,
    "trace-table": _run_trace_table,
    "fk-kernel": _run_fk_kernel,
    "fk-trace": _run_fk_trace,
    "weak-convergence": _run_weak_convergence,
    "padic-density": _run_padic_density,
    "padic-fk": _run_padic_fk,
    "padic-checks": _run_padic_checks,
    "selfcheck": _run_selfcheck,
}


# ---------------------------------------------------------------------------
# argument parsing and config assembly
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fklab",
        description="Finite and p-adic semigroup experiments, seeded and CSV-emitting.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--seed", type=int, default=None, help="64-bit master seed")
        sp.add_argument("--substreams", type=int, default=None)
        sp.add_argument("--output", default=None,
                        help="CSV path ('-' or omitted: stdout, no manifest)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads; results are independent of it")

    sp = sub.add_parser("spectrum", help="eigenvalues of a finite Hamiltonian")
    sp.add_argument("--N", type=int)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--V", default=None)
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--hamiltonian", choices=["schwinger", "stochastic"], default=None)
    common(sp)

    sp = sub.add_parser("trace-table", help="convergence table across grid sizes")
    sp.add_argument("--N", dest="N_list", default=None, help="comma list, e.g. 9,21,41")
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--V", default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--marginal-samples", type=int, default=None)
    common(sp)

    sp = sub.add_parser("fk-kernel", help="lattice Feynman-Kac kernel entry")
    sp.add_argument("--N", type=int)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--V", default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--a", default=None, help="comma list of integer coords")
    sp.add_argument("--b", default=None)
    sp.add_argument("--samples", type=int, default=None)
    common(sp)

    sp = sub.add_parser("fk-trace", help="confined-walk Feynman-Kac trace")
    sp.add_argument("--N", type=int)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--V", default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--samples", type=int, default=None)
    common(sp)

    sp = sub.add_parser("weak-convergence", help="bridge midpoint Kolmogorov gaps")
    sp.add_argument("--N", dest="N_list", default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--samples", type=int, default=None)
    common(sp)

    sp = sub.add_parser("padic-density", help="radial density table")
    sp.add_argument("--p", type=int)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--m", dest="m_range", default=None, help="'lo..hi' or comma list")
    common(sp)

    sp = sub.add_parser("padic-fk", help="p-adic Feynman-Kac kernel estimate")
    sp.add_argument("--p", type=int)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--V", default=None)
    sp.add_argument("--x", default=None, help="p-adic point, 'n' or 'n*p^v'")
    sp.add_argument("--y", default=None)
    sp.add_argument("--J", type=int, default=None)
    sp.add_argument("--samples", type=int, default=None)
    common(sp)

    sp = sub.add_parser("padic-checks",
                        help="moment bounds, convolution identity, positive type")
    sp.add_argument("--p", type=int)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--k", type=float, default=None)
    sp.add_argument("--points", type=int, default=None)
    common(sp)

    sp = sub.add_parser("selfcheck", help="run the oracle comparison suite")
    sp.add_argument("--fast", action="store_true", default=None,
                    help="skip the long Monte Carlo oracle comparisons")
    common(sp)

    return ap


_DEFAULTS: dict[str, dict] = {
    "spectrum": {"N": None, "d": 1, "V": "harmonic", "count": 5,
                 "hamiltonian": "schwinger"},
    "trace-table": {"N_list": "9,21,41", "t": 1.0, "V": "harmonic",
                    "samples": 2000, "marginal_samples": 20000},
    "fk-kernel": {"N": None, "d": 1, "V": "zero", "T": 0.5, "a": None, "b": None,
                  "samples": 10000},
    "fk-trace": {"N": None, "d": 1, "V": "harmonic", "t": 1.0, "samples": 2000},
    "weak-convergence": {"N_list": "9,21,41,81", "t": 1.0, "samples": 100000},
    "padic-density": {"p": None, "b": 1.0, "t": 1.0, "m_range": "-10..10"},
    "padic-fk": {"p": None, "b": 2.0, "T": 1.0, "V": "abs", "x": "0", "y": "0",
                 "J": 7, "samples": 100000},
    "padic-checks": {"p": None, "b": 1.0, "t": 1.0, "s": 0.5, "k": 0.5,
                     "points": 16},
    "selfcheck": {"fast": False},
}

_REQUIRED: dict[str, list[str]] = {
    "spectrum": ["N"],
    "trace-table": [],
    "fk-kernel": ["N"],
    "fk-trace": ["N"],
    "weak-convergence": [],
    "padic-density": ["p"],
    "padic-fk": ["p"],
    "padic-checks": ["p"],
    "selfcheck": [],
}


def _assemble_config(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    params = dict(_DEFAULTS[cmd])
    seed, substreams, output = 0, 16, None
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in file_cfg.items():
            if key == "seed":
                seed = val
            elif key == "substreams":
                substreams = val
            elif key == "output":
                output = val
            elif key in params:
                params[key] = val
            else:
                raise ConfigError(f"unknown config key {key!r} for {cmd!r}")
    for key in params:
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    if args.seed is not None:
        seed = args.seed
    if args.substreams is not None:
        substreams = args.substreams
    if args.output is not None:
        output = args.output

    # worker count: flag, else the FKLAB_THREADS environment default.
    # Substream determinism makes every result independent of it.
    threads = args.threads
    if threads is None:
        try:
            threads = int(os.environ.get("FKLAB_THREADS", "1"))
        except ValueError as e:
            raise ConfigError("FKLAB_THREADS must be an integer") from e
    if threads < 1:
        raise ConfigError("thread count must be >= 1")

    missing = [k for k in _REQUIRED[cmd] if params.get(k) is None]
    if missing:
        raise ConfigError(f"{cmd} requires {', '.join('--' + m for m in missing)}")

    # normalize compound parameters
    if "N_list" in params and isinstance(params["N_list"], str):
        params["N_list"] = _parse_int_list(params["N_list"])
    if "m_range" in params:
        params["m_list"] = _parse_range(str(params["m_range"]))
        del params["m_range"]
    for key in ("a", "b"):
        if key in params and isinstance(params[key], str):
            params[key] = _parse_int_list(params[key])
    try:
        cfg = RunConfig(command=cmd, parameters=params, seed=int(seed),
                        substreams=int(substreams),
                        output=None if output in (None, "-") else str(output),
                        threads=int(threads))
        RngStreams(cfg.seed, cfg.substreams)  # validates seed and substreams
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    _validate_parameters(cfg)
    return cfg


def _validate_parameters(cfg: RunConfig) -> None:
    p = cfg.parameters
    positive = {"t": "t", "T": "T"}
    for key, name in positive.items():
        if key in p and p[key] is not None and not float(p[key]) > 0:
            raise ConfigError(f"{name} must be positive")
    for key in ("samples", "count", "points", "J", "marginal_samples"):
        if key in p and p[key] is not None and int(p[key]) < 1:
            raise ConfigError(f"{key} must be a positive integer")
    if "N" in p and p["N"] is not None:
        if int(p["N"]) < 3 or int(p["N"]) % 2 == 0:
            raise ConfigError("N must be an odd integer >= 3")
    if "N_list" in p:
        for N in p["N_list"]:
            if N < 3 or N % 2 == 0:
                raise ConfigError("every N must be an odd integer >= 3")
        if any(b <= a for a, b in zip(p["N_list"], p["N_list"][1:])):
            raise ConfigError("N list must be strictly increasing")
    if "p" in p and p["p"] is not None:
        from .padic.numbers import _is_prime

        if not _is_prime(int(p["p"])):
            raise ConfigError("p must be a prime")
    if "k" in p and p["k"] is not None and p["k"] < 0:
        raise ConfigError("k must be nonnegative")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else 0
    try:
        cfg = _assemble_config(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        header, rows = _RUNNERS[cfg.command](cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    body = io.StringIO()
    write_csv(body, header, rows)
    try:
        if cfg.output is None:
            sys.stdout.write(body.getvalue())
        else:
            with open(cfg.output, "w") as fh:
                fh.write(body.getvalue())
            with open(cfg.output + ".manifest.json", "w") as fh:
                json.dump(cfg.manifest(), fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as e:
        print(f"i/o failure: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
