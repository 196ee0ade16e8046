"""Batch driver for depth-bound computations.

Subcommands
-----------
* ``bound`` — one criterion evaluation and verdict record.
* ``scan`` — a (beta, x) grid swept into a CSV dataset plus a JSON sidecar.
* ``fig2`` — the standard g ∈ {0.5, 1.0, 1.5} ratio/depth datasets.
* ``selftest`` — condensed oracle and property suites.

The dense backend measures projectively or weakly on small chains; the
freefermion backend evaluates the weak-X second-order proxy at n ≈ 300;
the cft backend evaluates the continuum closed forms (unit-velocity units),
fitting the two-point amplitude from lattice data rather than hardcoding it.

Exit codes: 0 success, 2 configuration error, 3 backend-capability error,
4 numerical-consistency failure.  ``DEPTHBOUND_THREADS`` overrides
``--threads``.  Output floats are printed with 12 significant digits and a
fixed row order (beta outer, x inner), so identical configurations produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import approx_verdict, exact_verdict, invert_k, k_func
from .cft import CftParams, chi2_E_cft, depth_bound_cft, c_constant, fit_kappa, k2_cft
from .fermion import (
    bdg_diagonalize,
    chi2_E_quadratic,
    connected_xx,
    thermal_covariance,
    x_expectation,
)
from .models import SpinHamiltonian, build_tfim, gibbs_state
from .perturbative import chi2_general, correlator_lb_value
from .purification import (
    MeasurementSpec,
    apply_measurement,
    canonical_purification,
    holevo_information,
)
from .states import (
    DENSE_QUBIT_CAP,
    NumericalConsistencyError,
    QubitGraph,
    embed_operator,
    graph_distance,
    von_neumann_entropy,
)

COLUMNS = (
    "beta",
    "g",
    "n",
    "x_ab",
    "chi_B",
    "chi_E",
    "ratio",
    "criterion",
    "threshold",
    "epsilon",
    "depth_lb",
    "backend",
)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])

#: Spin velocity of the chain normalization H = -sum(ZZ + gX) at criticality;
#: used only when translating lattice data into continuum parameters.
LATTICE_VELOCITY = 2.0


class ConfigError(Exception):
    """Invalid or inconsistent configuration (exit code 2)."""


class CapabilityError(Exception):
    """Requested combination unsupported by the chosen backend (exit code 3)."""


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return "%d" % int(value)
    return "%.12g" % float(value)


def _parse_grid(text: str, *, integer: bool = False) -> list[float] | list[int]:
    """Parse '1,2,3' or 'start:stop[:step]' (inclusive stop) grids."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                start, stop, step = parts[0], parts[1], 1.0
            elif len(parts) == 3:
                start, stop, step = parts
            else:
                raise ValueError("too many ':' fields")
            if step <= 0 or stop < start:
                raise ValueError("need start <= stop and step > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
        if not values:
            raise ValueError("empty grid")
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from None
    if integer:
        out = []
        for v in values:
            if abs(v - round(v)) > 1e-9:
                raise ConfigError(f"grid value {v} is not an integer")
            out.append(int(round(v)))
        return out
    return values


def _parse_sites(text: str) -> tuple[int, ...]:
    try:
        sites = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"cannot parse site list {text!r}") from None
    if not sites:
        raise ConfigError("empty site list")
    return sites


def _parse_terms(raw: dict[str, str]) -> tuple[tuple[float, tuple[tuple[int, str], ...]], ...]:
    """Custom Hamiltonian terms: each value like '-1.0 Z0 Z1' or '0.5 X2'."""
    terms = []
    for key in sorted(raw):
        tokens = raw[key].split()
        if len(tokens) < 2:
            raise ConfigError(f"term {key!r} needs a coefficient and at least one Pauli")
        try:
            coeff = float(tokens[0])
        except ValueError:
            raise ConfigError(f"term {key!r}: bad coefficient {tokens[0]!r}") from None
        ops = []
        for tok in tokens[1:]:
            letter = tok[0].upper()
            if letter not in ("X", "Y", "Z") or not tok[1:].isdigit():
                raise ConfigError(f"term {key!r}: bad Pauli token {tok!r}")
            ops.append((int(tok[1:]), letter))
        terms.append((coeff, tuple(ops)))
    return tuple(terms)


def _load_config_file(path: str) -> tuple[dict[str, str], dict[str, str]]:
    """Flat key=value sections; returns (flag values, custom terms)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")
    flags: dict[str, str] = {}
    terms: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if section.lower() == "terms":
                terms[key] = value
            else:
                flags[key.replace("_", "-")] = value
    return flags, terms


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthbound",
        description="Correlation-based lower bounds on mixed-state preparation depth.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI-style config file; flags override its keys")
        p.add_argument("--model", choices=("tfim", "custom"), help="Hamiltonian family")
        p.add_argument("--n", type=int, help="number of chain sites")
        p.add_argument("--g", type=float, help="transverse field strength")
        p.add_argument("--beta", type=float, help="single inverse temperature")
        p.add_argument("--beta-grid", help="inverse-temperature grid: a,b,c or start:stop[:step]")
        p.add_argument("--x-grid", help="A-B distance grid (integers)")
        p.add_argument("--backend", choices=("dense", "freefermion", "cft"), help="compute backend")
        p.add_argument("--measure", choices=("projective-x", "weak-x"), help="measurement family")
        p.add_argument("--site", type=int, help="measured site (default: chain center)")
        p.add_argument("--region-b", help="explicit region-B site list (dense bound only)")
        p.add_argument("--epsilon", type=float, help="preparation error epsilon")
        p.add_argument("--k-eps", type=float, help="threshold k(eps); inverted to epsilon")
        p.add_argument("--out", help="output file path (scan/fig2) or record destination")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
        p.add_argument("--threads", type=int, help="worker threads (default 1)")
        p.add_argument("--seed", type=int, help="seed for randomized suites")

    for name, doc in (
        ("bound", "compute a single criterion/verdict record"),
        ("scan", "sweep a (beta, x) grid into a CSV dataset"),
        ("fig2", "emit the standard ratio/depth datasets"),
        ("selftest", "run condensed oracle and property suites"),
    ):
        p = sub.add_parser(name, help=doc)
        add_common(p)
    return parser


def _merged_options(args: argparse.Namespace) -> tuple[dict, dict[str, str]]:
    """Merge config-file keys with CLI flags (flags win)."""
    file_flags: dict[str, str] = {}
    terms: dict[str, str] = {}
    if args.config:
        file_flags, terms = _load_config_file(args.config)
    known = {
        "model": str,
        "n": int,
        "g": float,
        "beta": float,
        "beta-grid": str,
        "x-grid": str,
        "backend": str,
        "measure": str,
        "site": int,
        "region-b": str,
        "epsilon": float,
        "k-eps": float,
        "out": str,
        "format": str,
        "threads": int,
        "seed": int,
    }
    merged: dict = {}
    for key, caster in known.items():
        if key in file_flags:
            try:
                merged[key] = caster(file_flags[key])
            except ValueError:
                raise ConfigError(f"config key {key!r}: bad value {file_flags[key]!r}") from None
    for key in known:
        cli_value = getattr(args, key.replace("-", "_"), None)
        if cli_value is not None:
            merged[key] = cli_value
    unknown = set(file_flags) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return merged, terms


def _resolve_epsilon(opts: dict) -> tuple[float, float | None]:
    """Return (epsilon, k_eps or None), inverting --k-eps with d_A' = 2."""
    eps = opts.get("epsilon")
    k_eps = opts.get("k-eps")
    if eps is not None and k_eps is not None:
        raise ConfigError("give either --epsilon or --k-eps, not both")
    if k_eps is not None:
        if k_eps < 0:
            raise ConfigError("--k-eps must be non-negative")
        return float(invert_k(float(k_eps), 2)), float(k_eps)
    if eps is None:
        return 0.0, None
    if eps < 0:
        raise ConfigError("--epsilon must be non-negative")
    return float(eps), None


def _threads(opts: dict) -> int:
    env = os.environ.get("DEPTHBOUND_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"DEPTHBOUND_THREADS={env!r} is not an integer") from None
    else:
        value = int(opts.get("threads", 1))
    if value < 1:
        raise ConfigError("thread count must be at least 1")
    return value


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise CapabilityError(message)


def _center_site(n: int) -> int:
    return (n - 1) // 2


def _region_b_for_distance(n: int, x: int) -> tuple[int, ...]:
    """Fig.-2 geometry: B is the first (n+1)//2 - x sites of the chain."""
    count = (n + 1) // 2 - x
    if count < 1:
        raise ConfigError(f"x = {x} leaves region B empty on an n = {n} chain")
    return tuple(range(count))


def _build_hamiltonian(opts: dict, terms_raw: dict[str, str]) -> SpinHamiltonian:
    model = opts.get("model", "tfim")
    if model == "tfim":
        n = opts.get("n")
        if n is None:
            raise ConfigError("--n is required for the tfim model")
        g = opts.get("g")
        if g is None:
            raise ConfigError("--g is required for the tfim model")
        return build_tfim(int(n), float(g))
    if not terms_raw:
        raise ConfigError("custom model needs a [terms] section in the config file")
    terms = _parse_terms(terms_raw)
    n = opts.get("n")
    if n is None:
        n = 1 + max(site for _, ops in terms for site, _ in ops)
    return SpinHamiltonian(int(n), terms)


class _DenseContext:
    """Per-(H, beta) dense pipeline shared across the x grid."""

    def __init__(self, ham: SpinHamiltonian, beta: float, measure: str, site: int, epsilon: float):
        self.ham = ham
        self.beta = beta
        self.measure = measure
        self.site = site
        self.epsilon = epsilon
        self.rho = gibbs_state(ham, beta)
        self.psi = canonical_purification(self.rho)
        if measure == "projective-x":
            self.spec = MeasurementSpec.projective(PAULI_X, (site,))
            self.ensemble = apply_measurement(self.psi, self.spec)
            self.chi_e = holevo_information(self.ensemble, self.psi.env_sites)
            self.n_outcomes = self.spec.n_outcomes
        else:
            self.chi_e = chi2_general(self.psi, PAULI_X, (site,), self.psi.env_sites).value
            self.n_outcomes = 2

    def chi_b(self, region: tuple[int, ...]) -> float:
        if self.measure == "projective-x":
            return holevo_information(self.ensemble, region)
        return chi2_general(self.psi, PAULI_X, (self.site,), region).value

    def verdict(self, chi_b: float, x_ab: int):
        criterion = chi_b - self.chi_e
        if self.measure == "projective-x":
            if self.epsilon == 0.0:
                return exact_verdict(criterion, x_ab)
            return approx_verdict(criterion, x_ab, self.epsilon, d_aprime=self.n_outcomes)
        return approx_verdict(criterion, x_ab, self.epsilon, weak=True)


class _FermionContext:
    """Per-(n, g, beta) free-fermion pipeline shared across the x grid."""

    def __init__(self, spectrum, beta: float, site: int, epsilon: float):
        self.spectrum = spectrum
        self.beta = beta
        self.site = site
        self.epsilon = epsilon
        self.cov = thermal_covariance(spectrum, beta)
        self.chi_e = chi2_E_quadratic(spectrum, beta, site).value

    def chi_b(self, x: int) -> float:
        j_b = self.site - x
        if j_b < 0:
            raise ConfigError(f"x = {x} walks off the chain")
        conn = connected_xx(self.cov, self.site, j_b)
        mean_b = x_expectation(self.cov, j_b)
        return correlator_lb_value(conn, mean_b)

    def verdict(self, chi_b: float, x_ab: int):
        return approx_verdict(chi_b - self.chi_e, x_ab, self.epsilon, weak=True)


_KAPPA_CACHE: dict[tuple[int, float], float] = {}


def _fit_lattice_kappa(n: int, g: float) -> float:
    """Two-point amplitude of the X correlator from near-ground-state data."""
    key = (n, g)
    if key not in _KAPPA_CACHE:
        spectrum = bdg_diagonalize(n, g)
        beta0 = 50.0 * n  # beta eps_min >> 1 even at the critical gap ~ 1/n
        cov = thermal_covariance(spectrum, beta0)
        center = _center_site(n)
        seps = np.arange(10, min(51, center))
        cors = np.array([connected_xx(cov, center, center - int(s)) for s in seps])
        _KAPPA_CACHE[key] = fit_kappa(seps, cors, 1.0).kappa
    return _KAPPA_CACHE[key]


class _CftContext:
    """Continuum closed forms (unit-velocity units) with a lattice-fitted amplitude."""

    def __init__(self, n: int, g: float, beta: float, epsilon: float):
        _require(abs(g - 1.0) < 1e-12, "cft backend is defined at the critical point g = 1")
        kappa_lat = _fit_lattice_kappa(n, g)
        self.delta = 1.0
        self.kappa = kappa_lat / LATTICE_VELOCITY ** (2.0 * self.delta)
        self.beta = beta
        self.epsilon = epsilon
        self.params = CftParams(self.delta, self.kappa, 1.0 / beta)
        self.chi_e = chi2_E_cft(self.params)

    def chi_b(self, x: float) -> float:
        return self.chi_e + k2_cft(self.params, float(x))

    def verdict(self, chi_b: float, x_ab: float):
        return approx_verdict(chi_b - self.chi_e, x_ab, self.epsilon, weak=True)

    def depth_closed_form(self) -> float:
        c = c_constant(self.delta, self.kappa)
        return depth_bound_cft(self.beta, self.epsilon, self.delta, c)


def _check_capabilities(opts: dict) -> None:
    backend = opts.get("backend", "dense")
    measure = opts.get("measure")
    model = opts.get("model", "tfim")
    if backend == "dense":
        n = opts.get("n")
        if n is not None:
            _require(int(n) <= DENSE_QUBIT_CAP, f"dense backend capped at {DENSE_QUBIT_CAP} sites")
    elif backend == "freefermion":
        _require(model == "tfim", "freefermion backend supports only the tfim model")
        _require(measure in (None, "weak-x"), "freefermion backend supports only weak-x measurement")
    elif backend == "cft":
        _require(model == "tfim", "cft backend is parameterized by the critical tfim chain")
        _require(measure in (None, "weak-x"), "cft backend models the weak-x family only")


# ---------------------------------------------------------------------------
# Row assembly
# ---------------------------------------------------------------------------


def _row(beta, g, n, x_ab, chi_b, chi_e, verdict, backend) -> list:
    ratio = chi_b / chi_e if chi_e > 0 else float("nan")
    return [
        beta,
        g,
        n,
        x_ab,
        chi_b,
        chi_e,
        ratio,
        verdict.criterion_value,
        verdict.threshold,
        verdict.epsilon,
        verdict.depth_lower_bound,
        backend,
    ]


def _write_rows(path: Path, rows: list[list], errors: list[str | None]) -> None:
    has_errors = any(e is not None for e in errors)
    header = ", ".join(COLUMNS) + (", error" if has_errors else "")
    lines = [header]
    for row, err in zip(rows, errors):
        cells = [_fmt(v) for v in row]
        if has_errors:
            cells.append("" if err is None else err.replace(",", ";"))
        lines.append(", ".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _sidecar(path: Path, opts: dict, elapsed: float, n_rows: int) -> None:
    payload = {
        "config": {k: opts[k] for k in sorted(opts)},
        "version": __version__,
        "timing_seconds": round(elapsed, 6),
        "rows": n_rows,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _scan_beta_task(opts, terms_raw, beta: float, xs: list[int], epsilon: float):
    """Rows and per-row errors for one beta (deterministic inner order)."""
    backend = opts.get("backend", "dense")
    n = int(opts.get("n"))
    g = float(opts.get("g", 1.0))
    site = int(opts.get("site", _center_site(n)))
    measure = opts.get("measure", "weak-x")
    rows: list[list] = []
    errors: list[str | None] = []
    if backend == "dense":
        ham = _build_hamiltonian(opts, terms_raw)
        ctx = _DenseContext(ham, beta, measure, site, epsilon)
        graph = QubitGraph.path(ham.n_sites)
        for x in xs:
            try:
                region = _region_b_for_distance(ham.n_sites, x)
                x_ab = graph_distance(graph, (site,), region)
                chi_b = ctx.chi_b(region)
                verdict = ctx.verdict(chi_b, int(x_ab))
                rows.append(_row(beta, g, n, x, chi_b, ctx.chi_e, verdict, backend))
                errors.append(None)
            except (ValueError, ConfigError) as exc:
                rows.append([beta, g, n, x] + [float("nan")] * 7 + [backend])
                errors.append(str(exc))
    elif backend == "freefermion":
        spectrum = bdg_diagonalize(n, g)
        ctx = _FermionContext(spectrum, beta, site, epsilon)
        for x in xs:
            try:
                _region_b_for_distance(n, x)
                chi_b = ctx.chi_b(x)
                verdict = ctx.verdict(chi_b, x)
                rows.append(_row(beta, g, n, x, chi_b, ctx.chi_e, verdict, backend))
                errors.append(None)
            except (ValueError, ConfigError) as exc:
                rows.append([beta, g, n, x] + [float("nan")] * 7 + [backend])
                errors.append(str(exc))
    else:
        ctx = _CftContext(n, g, beta, epsilon)
        for x in xs:
            try:
                chi_b = ctx.chi_b(x)
                verdict = ctx.verdict(chi_b, float(x))
                rows.append(_row(beta, g, 0, x, chi_b, ctx.chi_e, verdict, backend))
                errors.append(None)
            except (ValueError, ConfigError) as exc:
                rows.append([beta, g, 0, x] + [float("nan")] * 7 + [backend])
                errors.append(str(exc))
    return rows, errors


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_bound(opts: dict, terms_raw: dict[str, str]) -> int:
    backend = opts.get("backend", "dense")
    epsilon, k_eps = _resolve_epsilon(opts)
    start = time.perf_counter()
    extras: dict = {}
    if backend == "cft":
        n = int(opts.get("n", 301))
        beta = opts.get("beta")
        if beta is None:
            raise ConfigError("--beta is required for bound")
        ctx = _CftContext(n, float(opts.get("g", 1.0)), float(beta), epsilon)
        xs = _parse_grid(opts["x-grid"], integer=True) if "x-grid" in opts else []
        if xs:
            x = float(xs[0])
            chi_b = ctx.chi_b(x)
            verdict = ctx.verdict(chi_b, x)
            row = _row(float(beta), 1.0, 0, x, chi_b, ctx.chi_e, verdict, backend)
        else:
            depth = ctx.depth_closed_form()
            row = [
                float(beta), 1.0, 0, float("nan"), float("nan"), ctx.chi_e,
                float("nan"), float("nan"), 12.0 * epsilon, epsilon, depth, backend,
            ]
        extras["kappa"] = ctx.kappa
    else:
        beta = opts.get("beta")
        if beta is None:
            raise ConfigError("--beta is required for bound")
        beta = float(beta)
        if backend == "dense":
            ham = _build_hamiltonian(opts, terms_raw)
            n = ham.n_sites
            g = float(opts.get("g", 0.0))
            site = int(opts.get("site", _center_site(n)))
            measure = opts.get("measure", "projective-x")
            if "region-b" in opts:
                region = _parse_sites(opts["region-b"])
            elif "x-grid" in opts:
                region = _region_b_for_distance(n, _parse_grid(opts["x-grid"], integer=True)[0])
            else:
                raise ConfigError("dense bound needs --region-b or --x-grid")
            if site in region:
                raise ConfigError("measured site must lie outside region B")
            graph = QubitGraph.path(n)
            x_ab = graph_distance(graph, (site,), region)
            ctx = _DenseContext(ham, beta, measure, site, epsilon)
            chi_b = ctx.chi_b(region)
            verdict = ctx.verdict(chi_b, int(x_ab))
            row = _row(beta, g, n, int(x_ab), chi_b, ctx.chi_e, verdict, backend)
            extras["s_b"] = float(von_neumann_entropy(ctx.rho.reduced(region)))
            extras["s_abc"] = float(von_neumann_entropy(ctx.rho))
        else:
            n = opts.get("n")
            if n is None:
                raise ConfigError("--n is required for the tfim model")
            n = int(n)
            g = opts.get("g")
            if g is None:
                raise ConfigError("--g is required for the tfim model")
            g = float(g)
            site = int(opts.get("site", _center_site(n)))
            if "x-grid" not in opts:
                raise ConfigError("freefermion bound needs --x-grid with a single distance")
            x = _parse_grid(opts["x-grid"], integer=True)[0]
            spectrum = bdg_diagonalize(n, g)
            ctx = _FermionContext(spectrum, beta, site, epsilon)
            chi_b = ctx.chi_b(x)
            verdict = ctx.verdict(chi_b, x)
            row = _row(beta, g, n, x, chi_b, ctx.chi_e, verdict, backend)
    elapsed = time.perf_counter() - start
    record = dict(zip(COLUMNS, row))
    record["wall_time_seconds"] = round(elapsed, 6)
    record["version"] = __version__
    if k_eps is not None:
        record["k_eps"] = k_eps
    record.update(extras)
    fmt = opts.get("format", "csv")
    if fmt == "json":
        text = json.dumps({k: (v if isinstance(v, str) else _json_num(v)) for k, v in record.items()},
                          indent=2, sort_keys=True) + "\n"
    else:
        text = ", ".join(COLUMNS) + "\n" + ", ".join(_fmt(v) for v in row) + "\n"
    out = opts.get("out")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _json_num(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _cmd_scan(opts: dict, terms_raw: dict[str, str]) -> int:
    if "out" not in opts:
        raise ConfigError("scan requires --out")
    if opts.get("n") is None:
        if opts.get("backend") == "cft":
            opts["n"] = 301  # continuum rows; n only sizes the amplitude fit
        else:
            raise ConfigError("scan requires --n")
    epsilon, _ = _resolve_epsilon(opts)
    if "beta-grid" in opts:
        betas = _parse_grid(opts["beta-grid"])
    elif "beta" in opts:
        betas = [float(opts["beta"])]
    else:
        raise ConfigError("scan requires --beta-grid or --beta")
    if "x-grid" not in opts:
        raise ConfigError("scan requires --x-grid")
    xs = _parse_grid(opts["x-grid"], integer=True)
    start = time.perf_counter()
    workers = _threads(opts)
    tasks = [(beta, xs) for beta in betas]
    results = []
    if workers == 1:
        for beta, xgrid in tasks:
            results.append(_scan_beta_task(opts, terms_raw, beta, xgrid, epsilon))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda t: _scan_beta_task(opts, terms_raw, t[0], t[1], epsilon), tasks)
            )
    rows: list[list] = []
    errors: list[str | None] = []
    for r, e in results:
        rows.extend(r)
        errors.extend(e)
    out = Path(opts["out"])
    fmt = opts.get("format", "csv")
    elapsed = time.perf_counter() - start
    if fmt == "json":
        payload = {
            "config": {k: opts[k] for k in sorted(opts)},
            "version": __version__,
            "timing_seconds": round(elapsed, 6),
            "rows": [dict(zip(COLUMNS, [_json_num(v) if not isinstance(v, str) else v for v in row]))
                     for row in rows],
            "errors": [e for e in errors if e] or None,
        }
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        _write_rows(out, rows, errors)
        _sidecar(out.with_suffix(".json"), opts, elapsed, len(rows))
    return 0


def _cmd_fig2(opts: dict, terms_raw: dict[str, str]) -> int:
    if "out" not in opts:
        raise ConfigError("fig2 requires --out (dataset stem)")
    n = int(opts.get("n", 301))
    betas = _parse_grid(opts["beta-grid"]) if "beta-grid" in opts else [10.0 * i for i in range(1, 11)]
    xs = _parse_grid(opts["x-grid"], integer=True) if "x-grid" in opts else list(range(1, 61))
    k_eps = float(opts.get("k-eps", 1e-5))
    eps_approx = invert_k(k_eps, 2)
    gs = (0.5, 1.0, 1.5)
    site = int(opts.get("site", _center_site(n)))
    start = time.perf_counter()
    workers = _threads(opts)

    def g_task(g: float):
        spectrum = bdg_diagonalize(n, g)
        ratio_rows: list[list] = []
        depth_rows: list[list] = []
        for beta in betas:
            ctx = _FermionContext(spectrum, beta, site, 0.0)
            best = {0.0: 0, eps_approx: 0}
            for x in xs:
                try:
                    _region_b_for_distance(n, x)
                    chi_b = ctx.chi_b(x)
                except (ValueError, ConfigError):
                    continue
                v0 = approx_verdict(chi_b - ctx.chi_e, x, 0.0, weak=True)
                ratio_rows.append(_row(beta, g, n, x, chi_b, ctx.chi_e, v0, "freefermion"))
                if v0.bound_active:
                    best[0.0] = max(best[0.0], v0.depth_lower_bound)
                va = approx_verdict(chi_b - ctx.chi_e, x, eps_approx, weak=True)
                if va.bound_active:
                    best[eps_approx] = max(best[eps_approx], va.depth_lower_bound)
            for eps in (0.0, eps_approx):
                depth_rows.append([beta, g, n, eps, best[eps], "freefermion"])
        return ratio_rows, depth_rows

    if workers == 1:
        per_g = [g_task(g) for g in gs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_g = list(pool.map(g_task, gs))
    ratio_rows = [row for rr, _ in per_g for row in rr]
    depth_rows = [row for _, dr in per_g for row in dr]
    stem = Path(opts["out"])
    ratio_path = stem.parent / (stem.name + "_ratio.csv")
    depth_path = stem.parent / (stem.name + "_depth.csv")
    _write_rows(ratio_path, ratio_rows, [None] * len(ratio_rows))
    depth_header = "beta, g, n, epsilon, depth_lb, backend"
    lines = [depth_header] + [", ".join(_fmt(v) for v in row) for row in depth_rows]
    depth_path.write_text("\n".join(lines) + "\n")
    _sidecar(stem.parent / (stem.name + ".json"), opts, time.perf_counter() - start, len(ratio_rows))
    return 0


def _cmd_selftest(opts: dict) -> int:
    from .models import holevo_finite_difference
    from .fermion import MajoranaCovariance, gaussian_entropy, many_body_energies, pfaffian
    from .perturbative import build_xi, chi2_E_eigensum, lieb_R_map, lieb_T_map
    from .bounds import g_func
    from .cft import alpha_delta, h_delta
    from .states import DensityOperator, von_neumann_entropy

    rng = np.random.default_rng(int(opts.get("seed", 0)))
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        line = f"[{status}] {name}"
        if detail:
            line += f" ({detail})"
        print(line)

    worst = 0.0
    for val, ref in (
        (h_delta(1.0), 2.0 / 3.0),
        (h_delta(0.5), math.pi / 4.0),
        (alpha_delta(1.0), 8.0 / 3.0),
        (g_func(1.0), 2.0 * math.log(2.0)),
        (k_func(0.0, 2), 0.0),
    ):
        worst = max(worst, abs(val - ref))
    report("special values", worst < 1e-12, f"max |err| = {worst:.2e}")

    worst = 0.0
    for _ in range(3):
        n = 3
        ham = build_tfim(n, float(rng.uniform(0.4, 1.6)))
        beta = float(rng.uniform(0.5, 3.0))
        site = int(rng.integers(0, n))
        psi = canonical_purification(gibbs_state(ham, beta))
        general = chi2_general(psi, PAULI_X, (site,), psi.env_sites).value
        oracle = holevo_finite_difference(ham, beta, PAULI_X, (site,), "env")
        worst = max(worst, abs(general - oracle.value) / max(abs(oracle.value), 1e-12))
    report("finite-difference oracle", worst < 1e-4, f"max rel err = {worst:.2e}")

    ham = build_tfim(6, 1.0)
    eig = chi2_E_eigensum(ham, 2.0, embed_operator(PAULI_X, (3,), ham.sites))
    psi = canonical_purification(gibbs_state(ham, 2.0))
    gen = chi2_general(psi, PAULI_X, (3,), psi.env_sites).value
    report("route equality (n=6)", abs(eig.value - gen) < 1e-8, f"|diff| = {abs(eig.value - gen):.2e}")

    worst = 0.0
    for _ in range(100):
        dim = 4
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho_m = a @ a.conj().T
        rho_m /= np.trace(rho_m).real
        rho = DensityOperator(rho_m, (0, 1))
        h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = h + h.conj().T
        h /= np.linalg.norm(h, 2)
        w, v = np.linalg.eigh(rho_m)
        xi = rho_m @ (v @ np.diag(rng.uniform(-1, 1, dim)) @ v.conj().T)
        xi = 0.5 * (xi + xi.conj().T)
        t_norm = np.linalg.norm(lieb_T_map(rho, xi), 2)
        r_norm = np.linalg.norm(lieb_R_map(rho, xi), 2)
        worst = max(worst, t_norm - 1.0, r_norm - 1.0)
    report("map contraction", worst < 1e-9, f"max excess = {worst:.2e}")

    worst = 0.0
    for _ in range(20):
        dim = 2 * int(rng.integers(2, 5))
        a = rng.normal(size=(dim, dim))
        a = a - a.T
        pf = pfaffian(a)
        det = np.linalg.det(a)
        worst = max(worst, abs(pf * pf - det) / max(abs(det), 1e-12))
    report("pfaffian consistency", worst < 1e-8, f"max rel err = {worst:.2e}")

    n = 8
    spectrum = bdg_diagonalize(n, 1.0)
    dense_spec = np.sort(np.linalg.eigvalsh(build_tfim(n, 1.0).to_matrix()))
    ff_spec = np.sort(many_body_energies(spectrum))
    err = float(np.max(np.abs(dense_spec - ff_spec)))
    cov = thermal_covariance(spectrum, 2.0)
    rho = gibbs_state(build_tfim(n, 1.0), 2.0)
    err2 = abs(x_expectation(cov, 3) - rho.expectation(PAULI_X, (3,)))
    err3 = abs(gaussian_entropy(cov, range(4)) - von_neumann_entropy(rho.reduced(tuple(range(4)))))
    ok = err < 1e-9 and err2 < 1e-9 and err3 < 1e-8
    report("cross-backend (n=8)", ok, f"spec {err:.1e}, <X> {err2:.1e}, S {err3:.1e}")

    print(f"selftest: {6 - failures}/6 suites passed")
    return 0 if failures == 0 else 4


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts, terms_raw = _merged_options(args)
        if args.command == "fig2":
            backend = opts.setdefault("backend", "freefermion")
            _require(backend == "freefermion", "fig2 is a freefermion pipeline")
            opts.setdefault("model", "tfim")
        _check_capabilities(opts)
        if args.command == "bound":
            return _cmd_bound(opts, terms_raw)
        if args.command == "scan":
            return _cmd_scan(opts, terms_raw)
        if args.command == "fig2":
            return _cmd_fig2(opts, terms_raw)
        return _cmd_selftest(opts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 3
    except NumericalConsistencyError as exc:
        print(f"numerical-consistency failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
