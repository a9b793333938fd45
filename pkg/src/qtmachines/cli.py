"""Command-line front end: parameter sweeps, inequality suites, ledgers.

Every subcommand reads an optional JSON config and lets flags override it.
Output is CSV (12 significant digits) or JSON; CSV tables start with a
``# config:`` comment holding the fully resolved configuration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import BathChannel, evolve, stable_time_step
from .errors import DomainError, NumericalError
from .ledger import LEDGER_COLUMNS, build_ledger, check_inequalities
from .machines import (
    MinimalMachineParams,
    OttoParams,
    minimal_machine_steady_state,
    otto_cycle,
)
from .operators import (
    bose_occupancy,
    coherent_state,
    fock_space,
    fock_state,
    gibbs_state,
    random_density_matrix,
)
from .passivity import passive_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SCENARIOS = {
    "minimal": "minimal-machine",
    "otto": "otto",
    "inequalities": "inequalities",
    "trajectory": "trajectory",
}

DEFAULTS = {
    "minimal-machine": {
        "fixed": {"omega0": 3.0, "delta": 0.5, "T_H": 2.0, "T_C": 1.0,
                  "gamma_H": 1.0, "gamma_C": 1.0, "method": "rates"},
        "grid": {"delta": {"start": 0.25, "stop": 2.75, "count": 11}},
    },
    "otto": {
        "fixed": {"omega_cold": 1.0, "omega_hot": 2.0, "T_H": 4.0, "T_C": 1.0,
                  "r": 0.0, "rate": 1.0, "fock_dim": None, "method": "auto"},
        "grid": {"r": {"start": 0.0, "stop": 2.0, "count": 9}},
    },
    "inequalities": {
        "fixed": {"count": 500, "system": "qubit", "dim": 5, "T": 1.0, "omega": 1.0,
                  "gamma": 1.0, "t_end": 30.0, "dt": None},
        "grid": {},
    },
    "trajectory": {
        "fixed": {"preset": "coherent-decay", "alpha": 2.0, "omega": 1.0, "gamma": 1.0,
                  "T": 0.0, "dim": 40, "t_end": 12.0, "dt": None, "stride": 1},
        "grid": {},
    },
}

GRIDDABLE = {
    "minimal-machine": {"delta", "omega0", "T_H", "T_C", "gamma_H", "gamma_C"},
    "otto": {"r", "omega_cold", "omega_hot", "T_H", "T_C", "rate"},
    "inequalities": set(),
    "trajectory": set(),
}

HELP_DEFAULTS = "\n".join(
    f"  {name}: fixed={json.dumps(d['fixed'])} grid={json.dumps(d['grid'])}"
    for name, d in DEFAULTS.items())


class ConfigError(Exception):
    pass


@dataclass
class SweepConfig:
    scenario: str
    grid: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        unknown = set(data) - {"scenario", "grid", "fixed", "out", "format", "seed", "workers"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "scenario" not in data:
            raise ConfigError("config is missing 'scenario'")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        return cls.from_dict(json.loads(text))

    def resolved(self) -> "SweepConfig":
        """Fill defaults and validate; returns a new config."""
        if self.scenario not in DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        base = DEFAULTS[self.scenario]
        unknown = set(self.fixed) - set(base["fixed"])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.scenario}: {sorted(unknown)}")
        fixed = {**base["fixed"], **self.fixed}
        grid = dict(self.grid) if self.grid else dict(base["grid"])
        for name, axis in grid.items():
            if name not in GRIDDABLE[self.scenario]:
                raise ConfigError(f"parameter {name!r} cannot be swept in {self.scenario}")
            if not isinstance(axis, dict) or set(axis) != {"start", "stop", "count"}:
                raise ConfigError(f"grid axis {name!r} needs exactly start, stop, count")
            if int(axis["count"]) < 1:
                raise ConfigError(f"grid axis {name!r} has count < 1")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        return SweepConfig(self.scenario, grid, fixed, self.out, self.format,
                           int(self.seed), int(self.workers))

    def points(self) -> list[dict]:
        names = list(self.grid)
        axes = [np.linspace(float(a["start"]), float(a["stop"]), int(a["count"]))
                for a in self.grid.values()]
        return [{**self.fixed, **{n: float(v) for n, v in zip(names, combo)}}
                for combo in itertools.product(*axes)]


# --- scenario workers (module level so they pickle) --------------------------------

def _minimal_row(p: dict) -> dict:
    params = MinimalMachineParams(p["omega0"], p["delta"], p["T_H"], p["T_C"],
                                  p["gamma_H"], p["gamma_C"])
    rep = minimal_machine_steady_state(params, method=p["method"])
    return {"delta": params.delta, "regime": rep.regime, "p_excited": rep.p_excited,
            "J_H": rep.J_H, "J_C": rep.J_C, "power": rep.power,
            "efficiency": rep.efficiency, "cop": rep.cop, "carnot": rep.carnot,
            "delta_cr": rep.delta_cr}


def _otto_row(p: dict) -> dict:
    params = OttoParams(p["omega_cold"], p["omega_hot"], p["T_H"], p["T_C"], p["r"],
                        p["fock_dim"], p["rate"])
    rep = otto_cycle(params, method=p["method"])
    return {"r": params.squeezing, "regime": rep.regime, "eta": rep.eta,
            "eta_max": rep.eta_max, "carnot": rep.carnot,
            "exchange_hot": rep.exchange_hot, "counterfactual_heat": rep.counterfactual_heat,
            "method": rep.method, "fock_dim": rep.fock_dim}


def relaxation_setup(system: str, dim: int, omega: float, T: float, gamma: float):
    """Constant Hamiltonian and thermal channel for the relaxation suites."""
    if system == "qubit":
        dim = 2
    elif system != "oscillator":
        raise DomainError(f"unknown system {system!r}")
    a, number = fock_space(dim)
    H = omega * number
    return H, [BathChannel.thermal(a, gamma, omega, T)]


def inequality_case(index: int, seed: int, system: str, dim: int, T: float,
                    omega: float, gamma: float, t_end: float, dt: float | None) -> dict:
    H, channels = relaxation_setup(system, dim, omega, T, gamma)
    rng = np.random.default_rng([seed, index])
    rho0 = random_density_matrix(H.shape[0], rng)
    step = dt if dt else stable_time_step(H, channels)
    ledger = build_ledger(evolve(rho0, H, channels, t_end, step))
    rep = check_inequalities(ledger, T)
    erg = passive_state(rho0, H).ergotropy
    tol = 1e-8
    return {
        "index": index, "initial_ergotropy": erg, "delta_S": rep.delta_S,
        "Q_over_T": rep.Q_over_T, "E_over_T": rep.E_over_T,
        "slack_tight": rep.slack_tight, "slack_spohn": rep.slack_spohn,
        "diss_ergotropy": float(ledger.dissipated_ergotropy[-1]),
        "pass_tight": rep.slack_tight >= -tol,
        "pass_spohn": rep.slack_spohn >= -tol,
        "pass_order": rep.slack_tight <= rep.slack_spohn + tol,
    }


def _inequality_row(args: tuple) -> dict:
    index, seed, p = args
    return inequality_case(index, seed, p["system"], int(p["dim"]), p["T"], p["omega"],
                           p["gamma"], p["t_end"], p["dt"])


def trajectory_setup(p: dict):
    """Initial state, Hamiltonian and channels for a trajectory preset."""
    preset = p["preset"]
    if preset == "coherent-decay":
        dim = int(p["dim"])
        a, number = fock_space(dim)
        rho0 = coherent_state(p["alpha"], dim)
    elif preset == "fock-decay":
        dim = max(2, int(p["dim"])) if p["dim"] else 2
        a, number = fock_space(dim)
        rho0 = fock_state(1, dim)
    elif preset == "thermal":
        dim = int(p["dim"])
        a, number = fock_space(dim)
        rho0 = gibbs_state(p["omega"] * number, p["T"]) if p["T"] > 0 else fock_state(0, dim)
    else:
        raise DomainError(f"unknown preset {preset!r}")
    H = p["omega"] * number
    channels = [BathChannel.thermal(a, p["gamma"], p["omega"], p["T"])]
    return rho0, H, channels


def run_trajectory(config: SweepConfig):
    p = config.fixed
    rho0, H, channels = trajectory_setup(p)
    dt = p["dt"] or min(stable_time_step(H, channels), 1e-2 / p["gamma"])
    traj = evolve(rho0, H, channels, p["t_end"], dt, stride=int(p["stride"]))
    return build_ledger(traj)


def _map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps grid order whatever the completion order
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def run_minimal_sweep(config: SweepConfig) -> list[dict]:
    return _map(_minimal_row, config.points(), config.workers)


def run_otto_sweep(config: SweepConfig) -> list[dict]:
    return _map(_otto_row, config.points(), config.workers)


def run_inequality_suite(config: SweepConfig) -> list[dict]:
    count = config.fixed["count"]
    if count is None or int(count) < 1:
        raise ConfigError("inequality suite needs count >= 1")
    jobs = [(i, config.seed, config.fixed) for i in range(int(count))]
    return _map(_inequality_row, jobs, config.workers)


def inequality_summary(rows: list[dict]) -> dict:
    return {
        "states": len(rows),
        "min_slack_tight": min(r["slack_tight"] for r in rows),
        "min_slack_spohn": min(r["slack_spohn"] for r in rows),
        "all_pass": all(r["pass_tight"] and r["pass_spohn"] and r["pass_order"] for r in rows),
    }


# --- output ------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _jsonable(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def render_table(rows: list[dict], config: SweepConfig, summary: dict | None = None) -> str:
    if config.format == "json":
        doc = {"config": config.to_dict(),
               "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
        if summary is not None:
            doc["summary"] = {k: _jsonable(v) for k, v in summary.items()}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    out = io.StringIO()
    out.write(f"# config: {config.to_json()}\n")
    writer = csv.writer(out, lineterminator="\n")
    if rows:
        writer.writerow(list(rows[0]))
        for r in rows:
            writer.writerow([_fmt(v) for v in r.values()])
    if summary is not None:
        out.write("# summary: " + " ".join(f"{k}={_fmt(v)}" for k, v in summary.items()) + "\n")
    return out.getvalue()


def render_ledger(ledger, config: SweepConfig) -> str:
    if config.format == "json":
        doc = {"config": config.to_dict(),
               "rows": [dict(zip(LEDGER_COLUMNS, map(float, row))) for row in ledger.rows()]}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    return ledger.to_csv(header_comment=f"config: {config.to_json()}")


# --- argument handling --------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_grid(text: str) -> tuple[str, dict]:
    try:
        name, spec = text.split("=", 1)
        start, stop, count = spec.split(":")
        return name, {"start": float(start), "stop": float(stop), "count": int(count)}
    except ValueError as exc:
        raise ConfigError(f"bad --grid {text!r}; expected name=start:stop:count") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtmachines",
        description=__doc__.splitlines()[0],
        epilog="defaults per scenario:\n" + HELP_DEFAULTS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, epilog=f"defaults: {json.dumps(DEFAULTS[SCENARIOS[name]])}")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                       help="override a fixed parameter (value parsed as JSON)")
        p.add_argument("--grid", action="append", default=[], metavar="NAME=START:STOP:COUNT",
                       help="sweep a parameter; replaces the default grid")
    return parser


def load_config(args) -> SweepConfig:
    scenario = SCENARIOS[args.command]
    data = {"scenario": scenario}
    if args.config:
        try:
            with open(args.config) as fh:
                data.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if data["scenario"] != scenario:
            raise ConfigError(f"config scenario {data['scenario']!r} does not match "
                              f"subcommand {args.command!r}")
    cfg = SweepConfig.from_dict(data)
    for flag in ("out", "format", "seed", "workers"):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, flag, value)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"bad --set {item!r}; expected NAME=VALUE")
        name, value = item.split("=", 1)
        cfg.fixed = {**cfg.fixed, name: _parse_value(value)}
    if args.grid:
        cfg.grid = dict(_parse_grid(g) for g in args.grid)
    return cfg.resolved()


def execute(cfg: SweepConfig) -> str:
    if cfg.scenario == "minimal-machine":
        return render_table(run_minimal_sweep(cfg), cfg)
    if cfg.scenario == "otto":
        return render_table(run_otto_sweep(cfg), cfg)
    if cfg.scenario == "inequalities":
        rows = run_inequality_suite(cfg)
        return render_table(rows, cfg, inequality_summary(rows))
    return render_ledger(run_trajectory(cfg), cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        text = execute(cfg)
    except (ConfigError, DomainError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
