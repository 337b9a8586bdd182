"""Command-line runner: TOML config in, plot-ready table out.

Usage::

    iohoem run CONFIG [--out PATH] [--format csv|json] [--nmax K] [--seed N]

Every physical key carries its unit in the name (``gamma_per_time``,
``x_in_length``) with ``hbar = 1``. Tables have the fixed columns
``t,x,observable,re,im``; ``x`` is ``nan`` for observables without a
position.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .correlations import ExponentialSeries, WavePacket, single_mode_correlation
from .hierarchy import (DynamicField, Hierarchy, HierarchySpec, SolverError,
                        StaticField, SystemModel, bath_terms)
from .markovian import ScatteringConfig, density_grid
from .operators import SIGMA_X, SIGMA_Z, trace_distance
from .oracles import (DampedMode, DephasingParams, EmitterWaveguide,
                      analytic_density, dephasing_rho, fock_brute_force)

SCENARIOS = ("heom", "io-heom", "markov-scatter", "oracle-compare")
COLUMNS = ("t", "x", "observable", "re", "im")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TOLERANCE = 0, 2, 3, 4

INITIAL_STATES = {
    "excited": np.array([[1, 0], [0, 0]], dtype=complex),
    "ground": np.array([[0, 0], [0, 1]], dtype=complex),
    "plus": 0.5 * np.ones((2, 2), dtype=complex),
}
COUPLING_OPERATORS = {"sigma_x": SIGMA_X, "sigma_z": SIGMA_Z}


class ConfigError(ValueError):
    pass


class ToleranceError(RuntimeError):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class ModeParams:
    coupling_per_time: float
    frequency_per_time: float
    decay_per_time: float


@dataclass(frozen=True)
class HeomParams:
    splitting_per_time: float = 1.0
    coupling_operator: str = "sigma_x"
    modes: tuple = (ModeParams(0.3, 1.0, 1.0),)
    n_max: int = 8
    representation: str = "direct"
    scaled: bool = False
    initial_state: str = "excited"
    input_photon: bool = False
    mode_occupation: bool = False


@dataclass(frozen=True)
class MarkovParams:
    x_in_length: float = -1.0
    c_length_per_time: float = 1.0
    omega_s_per_time: float | None = None
    gamma_per_time: float | None = None
    p_in_per_length: float | None = None
    sigma_in_per_length: float | None = None
    dx_length: float = 1e-3
    initial_state: str = "ground"

    def resolved(self) -> "MarkovParams":
        """Fill unset values with the reference scattering setup."""
        c = self.c_length_per_time
        omega_s = self.omega_s_per_time if self.omega_s_per_time is not None else 4.5 * c / abs(self.x_in_length)
        gamma = self.gamma_per_time if self.gamma_per_time is not None else 0.4 * omega_s
        p_in = self.p_in_per_length if self.p_in_per_length is not None else omega_s / c
        sigma = self.sigma_in_per_length if self.sigma_in_per_length is not None else p_in / 2
        return dataclasses.replace(self, omega_s_per_time=omega_s, gamma_per_time=gamma,
                                   p_in_per_length=p_in, sigma_in_per_length=sigma)

    def scattering_config(self) -> ScatteringConfig:
        r = self.resolved()
        wp = WavePacket(r.x_in_length, r.p_in_per_length, r.sigma_in_per_length,
                        r.c_length_per_time, r.gamma_per_time)
        return ScatteringConfig(r.omega_s_per_time, r.gamma_per_time, wp, dx=r.dx_length)


@dataclass(frozen=True)
class OracleParams:
    kind: str = "pseudomode"
    tolerance: float = 1e-5
    fock_cut: int = 8


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    t_grid: tuple
    x_grid: tuple = ()
    heom: HeomParams | None = None
    markov: MarkovParams | None = None
    oracle: OracleParams | None = None
    output_path: str | None = None
    output_format: str = "csv"
    seed: int = 0

    def canonical(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical, defaults-filled config (output location excluded)."""
        data = self.canonical()
        data.pop("output_path")
        data.pop("output_format")
        text = json.dumps(data, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()


def _finite(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return float(value)


def _grid(section: dict, stem: str, unit: str, default: tuple) -> tuple:
    explicit = f"{stem}_{unit}"
    if explicit in section:
        values = section[explicit]
        if not isinstance(values, list):
            raise ConfigError(f"grid.{explicit}: expected a list")
        out = tuple(_finite(f"grid.{explicit}", v) for v in values)
    elif f"{stem}_start_{unit}" in section:
        lo = _finite(f"grid.{stem}_start_{unit}", section[f"{stem}_start_{unit}"])
        hi = _finite(f"grid.{stem}_stop_{unit}", section.get(f"{stem}_stop_{unit}"))
        n = section.get(f"{stem}_points", 2)
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"grid.{stem}_points: must be a positive integer")
        out = tuple(float(v) for v in np.linspace(lo, hi, n))
    else:
        out = default
    if not out:
        raise ConfigError(f"grid.{stem}: grid must be non-empty")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"grid.{stem}: grid must be strictly increasing")
    return out


def _dataclass_from(cls, section: dict, prefix: str, overrides: dict | None = None):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(f"{prefix}.{key}: unknown key")
        kwargs[key] = value
    kwargs.update(overrides or {})
    return cls(**kwargs)


def _check_heom(p: HeomParams) -> HeomParams:
    _finite("heom.splitting_per_time", p.splitting_per_time)
    if p.coupling_operator not in COUPLING_OPERATORS:
        raise ConfigError(f"heom.coupling_operator: one of {sorted(COUPLING_OPERATORS)}")
    if p.representation not in ("direct", "causal", "real"):
        raise ConfigError("heom.representation: one of direct, causal, real")
    if not isinstance(p.n_max, int) or p.n_max < 0:
        raise ConfigError("heom.n_max: must be a non-negative integer")
    if p.initial_state not in INITIAL_STATES:
        raise ConfigError(f"heom.initial_state: one of {sorted(INITIAL_STATES)}")
    if not p.modes:
        raise ConfigError("heom.modes: at least one mode is required")
    if p.input_photon and p.mode_occupation:
        raise ConfigError("heom.mode_occupation: cannot be combined with input_photon")
    for m in p.modes:
        _finite("heom.modes.coupling_per_time", m.coupling_per_time)
        _finite("heom.modes.frequency_per_time", m.frequency_per_time)
        if _finite("heom.modes.decay_per_time", m.decay_per_time) < 0:
            raise ConfigError("heom.modes.decay_per_time: must be non-negative")
    return p


def _check_markov(p: MarkovParams) -> MarkovParams:
    for f in dataclasses.fields(p):
        val = getattr(p, f.name)
        if f.name != "initial_state" and val is not None:
            _finite(f"markov.{f.name}", val)
    if p.x_in_length == 0:
        raise ConfigError("markov.x_in_length: must be non-zero")
    if p.c_length_per_time <= 0:
        raise ConfigError("markov.c_length_per_time: must be positive")
    if p.gamma_per_time is not None and p.gamma_per_time <= 0:
        raise ConfigError("markov.gamma_per_time: must be positive")
    if p.sigma_in_per_length is not None and p.sigma_in_per_length <= 0:
        raise ConfigError("markov.sigma_in_per_length: must be positive")
    if p.dx_length <= 0:
        raise ConfigError("markov.dx_length: must be positive")
    if p.initial_state not in ("ground", "excited"):
        raise ConfigError("markov.initial_state: one of excited, ground")
    return p.resolved()


def config_from_dict(doc: dict, nmax: int | None = None, seed: int = 0) -> RunConfig:
    if "scenario" not in doc:
        raise ConfigError("scenario: missing required key")
    scenario = doc["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {', '.join(SCENARIOS)}, got {scenario!r}")
    known = {"scenario", "grid", "heom", "markov", "oracle", "output"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown section")
    grid = doc.get("grid", {})
    output = doc.get("output", {})
    fmt = output.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format: one of csv, json")

    heom = markov = oracle = None
    if scenario == "markov-scatter" or (scenario == "oracle-compare"
                                        and doc.get("oracle", {}).get("kind") == "scattering"):
        markov = _check_markov(_dataclass_from(MarkovParams, doc.get("markov", {}), "markov"))
        span = abs(markov.x_in_length)
        t_default = tuple(float(v) for v in np.linspace(span / markov.c_length_per_time / 4,
                                                        2 * span / markov.c_length_per_time, 8))
        x_default = tuple(float(v) for v in np.linspace(-2 * span, 2 * span, 81))
        t_grid = _grid(grid, "t", "time", t_default)
        x_grid = _grid(grid, "x", "length", x_default)
        if t_grid[0] < 0:
            raise ConfigError("grid.t: observation times must be non-negative")
    else:
        section = dict(doc.get("heom", {}))
        modes = section.pop("modes", None)
        overrides = {}
        if modes is not None:
            if not isinstance(modes, list):
                raise ConfigError("heom.modes: expected an array of tables")
            overrides["modes"] = tuple(_dataclass_from(ModeParams, m, "heom.modes") for m in modes)
        if nmax is not None:
            overrides["n_max"] = nmax
        heom = _check_heom(_dataclass_from(HeomParams, section, "heom", overrides))
        t_grid = _grid(grid, "t", "time", tuple(float(v) for v in np.linspace(0.0, 5.0, 51)))
        x_grid = ()
        if t_grid[0] < 0:
            raise ConfigError("grid.t: times must be non-negative")
    if scenario == "oracle-compare":
        oracle = _dataclass_from(OracleParams, doc.get("oracle", {}), "oracle")
        if oracle.kind not in ("pseudomode", "dephasing-input", "scattering"):
            raise ConfigError("oracle.kind: one of pseudomode, dephasing-input, scattering")
        if _finite("oracle.tolerance", oracle.tolerance) <= 0:
            raise ConfigError("oracle.tolerance: must be positive")
    try:
        return RunConfig(scenario, t_grid, x_grid, heom, markov, oracle, output.get("path"), fmt, seed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path, nmax: int | None = None, seed: int = 0) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return config_from_dict(doc, nmax, seed)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ tables

@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, t: float, x: float, observable: str, value: complex):
        value = complex(value)
        self.rows.append((float(t), float(x), observable, value.real, value.imag))

    def column(self, name: str) -> list:
        k = COLUMNS.index(name)
        return [r[k] for r in self.rows]


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def emit(table: ResultTable, path=None, fmt: str = "csv") -> str:
    """Serialize ``table``; writes to ``path`` when given and returns the text."""
    if fmt == "csv":
        buf = io.StringIO()
        for key in sorted(table.metadata):
            buf.write(f"# {key}: {json.dumps(table.metadata[key], sort_keys=True)}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for t, x, obs, re, im in table.rows:
            buf.write(f"{_fmt(t)},{_fmt(x)},{obs},{_fmt(re)},{_fmt(im)}\n")
        text = buf.getvalue()
    elif fmt == "json":
        rows = [{"t": t, "x": None if math.isnan(x) else x, "observable": obs, "re": re, "im": im}
                for t, x, obs, re, im in table.rows]
        text = json.dumps({"metadata": table.metadata, "columns": list(COLUMNS), "rows": rows},
                          sort_keys=True, indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_table(path) -> ResultTable:
    """Inverse of :func:`emit` for either format (chosen by content)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    table = ResultTable()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        table.metadata = doc["metadata"]
        for r in doc["rows"]:
            x = math.nan if r["x"] is None else r["x"]
            table.rows.append((r["t"], x, r["observable"], r["re"], r["im"]))
        return table
    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    for ln in lines:
        if ln.startswith("# "):
            key, _, val = ln[2:].partition(": ")
            table.metadata[key] = json.loads(val)
    if not body or body[0] != ",".join(COLUMNS):
        raise ValueError("missing or unexpected header row")
    for ln in body[1:]:
        t, x, obs, re, im = ln.split(",")
        table.rows.append((float(t), float(x), obs, float(re), float(im)))
    return table


# ------------------------------------------------------------------ scenarios

def _system(p: HeomParams) -> tuple[SystemModel, dict]:
    sysm = SystemModel(0.5 * p.splitting_per_time * SIGMA_Z, [COUPLING_OPERATORS[p.coupling_operator]])
    series = ExponentialSeries()
    for m in p.modes:
        series = series + single_mode_correlation(m.coupling_per_time, m.frequency_per_time, m.decay_per_time)
    return sysm, {(0, 0): series}


def _mode_rate(m: ModeParams) -> complex:
    return m.decay_per_time + 1j * m.frequency_per_time


def _input_fields(p: HeomParams) -> list:
    """Static fields that put one excitation into the first mode at ``t = 0``."""
    m = p.modes[0]
    lam, z = m.coupling_per_time, _mode_rate(m)

    def create(t):
        return lam * np.exp(-z * t)

    def annihilate(t):
        return lam * np.exp(-np.conj(z) * t)

    return [StaticField("in_create", {0: create, 1: create}, 0.0),
            StaticField("in_annihilate", {0: annihilate, 1: annihilate}, 0.0)]


def _occupation_fields(p: HeomParams) -> list:
    """Running-time fields whose correlation is the occupation of the first mode."""
    m = p.modes[0]
    lam, z = m.coupling_per_time, _mode_rate(m)
    return [DynamicField("out_create", {1: ExponentialSeries((lam,), (np.conj(z),))}),
            DynamicField("out_annihilate", {0: ExponentialSeries((lam,), (z,))})]


def _hierarchy(p: HeomParams) -> Hierarchy:
    sysm, corr = _system(p)
    statics = _input_fields(p) if p.input_photon else []
    dynamics = _occupation_fields(p) if p.mode_occupation else []
    spec = HierarchySpec(sysm, bath_terms(sysm, corr, p.representation), p.n_max,
                         dynamic_fields=dynamics, static_fields=statics, scaled=p.scaled)
    return Hierarchy(spec)


def _pairings(p: HeomParams) -> dict:
    # free vacuum-plus-photon correlations among the configured fields
    pairs = {}
    if p.input_photon:
        pairs[("in_create", "in_annihilate")] = 1.0
    return pairs


def _heom_states(p: HeomParams, t_grid) -> tuple[np.ndarray, dict, np.ndarray | None]:
    hier = _hierarchy(p)
    ys = hier.integrate(INITIAL_STATES[p.initial_state], np.asarray(t_grid))
    diag = {"n_adms": len(hier.indices), "n_max": p.n_max}
    if p.input_photon:
        labels = ("in_create", "in_annihilate")
        rhos = np.array([hier.field_series(y, _pairings(p), labels) for y in ys])
    else:
        rhos = hier.root(ys)
    occ = None
    if p.mode_occupation:
        occ = np.array([np.trace(hier.field_series(y, {}, ("out_create", "out_annihilate"))) for y in ys])
    return rhos, diag, occ


def _add_rho(table: ResultTable, t_grid, rhos, prefix: str = ""):
    for t, rho in zip(t_grid, rhos):
        for a in range(2):
            for b in range(2):
                table.add(t, math.nan, f"{prefix}rho_{a}{b}", rho[a, b])


def _run_heom(cfg: RunConfig, table: ResultTable):
    rhos, diag, occ = _heom_states(cfg.heom, cfg.t_grid)
    table.metadata["diagnostics"] = diag
    _add_rho(table, cfg.t_grid, rhos)
    if occ is not None:
        for t, v in zip(cfg.t_grid, occ):
            table.add(t, math.nan, "mode_occupation", v)


def _run_markov(cfg: RunConfig, table: ResultTable):
    mp = cfg.markov
    sc = mp.scattering_config()
    rho0 = INITIAL_STATES[mp.initial_state]
    dens = density_grid(sc, cfg.x_grid, cfg.t_grid, rho0)
    for a, t in enumerate(cfg.t_grid):
        for b, x in enumerate(cfg.x_grid):
            table.add(t, x, "density", dens[a, b])


def _compare(table: ResultTable, tol: float, diff: float, what: str):
    table.metadata["max_abs_diff"] = diff
    table.metadata["tolerance"] = tol
    table.metadata["compared"] = what
    if not diff <= tol:
        raise ToleranceError(f"{what}: max difference {diff:.3e} exceeds tolerance {tol:.1e}")


def _run_oracle(cfg: RunConfig, table: ResultTable):
    op = cfg.oracle
    t_grid = np.asarray(cfg.t_grid)
    if op.kind == "scattering":
        sc = cfg.markov.scattering_config()
        if cfg.markov.initial_state != "ground":
            raise ConfigError("oracle: scattering comparison needs markov.initial_state = ground")
        dens = density_grid(sc, cfg.x_grid, cfg.t_grid)
        ref = np.array([analytic_density(EmitterWaveguide.from_config(sc), cfg.x_grid, t) for t in t_grid])
        for a, t in enumerate(t_grid):
            for b, x in enumerate(cfg.x_grid):
                table.add(t, x, "io_lindblad:density", dens[a, b])
                table.add(t, x, "analytic:density", ref[a, b])
        peak = float(np.max(ref))
        _compare(table, op.tolerance, float(np.max(np.abs(dens - ref))) / peak, "density relative to peak")
        return
    p = cfg.heom
    sysm, _ = _system(p)
    rho0 = INITIAL_STATES[p.initial_state]
    if op.kind == "pseudomode":
        if p.input_photon or p.mode_occupation:
            raise ConfigError("oracle: pseudomode comparison uses the plain hierarchy")
        rhos, diag, _ = _heom_states(p, t_grid)
        modes = [DampedMode(m.frequency_per_time, m.coupling_per_time, m.decay_per_time) for m in p.modes]
        ref = fock_brute_force(sysm.hamiltonian, sysm.couplings, modes, rho0, t_grid, op.fock_cut)
        diff = max(trace_distance(a, b) for a, b in zip(rhos, ref))
        what = "trace distance"
    else:
        if p.coupling_operator != "sigma_z" or len(p.modes) != 1:
            raise ConfigError("oracle: dephasing comparison needs sigma_z coupling and one mode")
        p = dataclasses.replace(p, input_photon=True)
        rhos, diag, _ = _heom_states(p, t_grid)
        m = p.modes[0]
        params = DephasingParams(m.coupling_per_time, m.frequency_per_time, m.decay_per_time)
        ref = np.array([dephasing_rho(SIGMA_Z, rho0, t, params, sysm.hamiltonian, with_input=True)
                        for t in t_grid])
        diff = float(np.max(np.abs(rhos - ref)))
        what = "entrywise difference"
    table.metadata["diagnostics"] = diag
    _add_rho(table, t_grid, rhos, "hierarchy:")
    _add_rho(table, t_grid, ref, "oracle:")
    _compare(table, op.tolerance, float(diff), what)


def run_scenario(cfg: RunConfig) -> ResultTable:
    """Run one scenario. Raises :class:`ToleranceError` from a failed comparison
    after the table has been filled; the partial table is attached to it."""
    table = ResultTable(metadata={
        "config_hash": cfg.digest(),
        "scenario": cfg.scenario,
        "versions": {"iohoem": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    })
    runner = {"heom": _run_heom, "io-heom": _run_heom, "markov-scatter": _run_markov,
              "oracle-compare": _run_oracle}[cfg.scenario]
    if cfg.scenario == "io-heom" and not (cfg.heom.input_photon or cfg.heom.mode_occupation):
        cfg = dataclasses.replace(cfg, heom=dataclasses.replace(cfg.heom, input_photon=True))
    try:
        runner(cfg, table)
    except ToleranceError as exc:
        exc.table = table
        raise
    except (SolverError, ArithmeticError, MemoryError) as exc:
        raise SolverError(f"scenario {cfg.scenario}: {exc}") from exc
    return table


# ------------------------------------------------------------------ entry point

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="iohoem")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario from a TOML config")
    run.add_argument("config")
    run.add_argument("--out", default=None)
    run.add_argument("--format", choices=("csv", "json"), default=None)
    run.add_argument("--nmax", type=int, default=None)
    run.add_argument("--seed", type=int, default=0, help="reserved for randomized suites")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config, args.nmax, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else cfg.output_path
    fmt = args.format or cfg.output_format
    code = EXIT_OK
    try:
        table = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        table, code = exc.table, EXIT_TOLERANCE
    except (SolverError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    text = emit(table, out, fmt)
    if out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
