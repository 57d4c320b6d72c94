"""Command-line front end: seeded scenarios, machine-readable outputs.

Subcommands map one-to-one onto the experiment harness:

    estimate            one adaptive estimation against a simulated qubit
    campaign            Monte Carlo estimation-error campaign
    validate-gaussian   KL sweep of the Gaussian approximation vs probe time
    track               closed-loop fringe tracking with/without feedback
    compare-frequentist adaptive vs fixed-evolution-time baseline

Every output file starts with a header that reproduces the fully resolved
scenario, so reruns are verifiable.  Exit codes: 0 success, 1 invalid
scenario, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, experiments, qubitsim
from .estimator import GaussianBelief, LikelihoodModel, optimal_tau, run_estimation
from .qubitsim import NoiseProcess, sample_outcome

OUTDIR_ENV = "FREQTRACK_OUTDIR"

COMMANDS = ("estimate", "campaign", "validate-gaussian", "track", "compare-frequentist")


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass(frozen=True)
class Scenario:
    """Fully resolved run configuration for one subcommand."""

    command: str
    params: dict
    seed: int
    output_path: str
    format: str

    def header_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "format": self.format,
        }


# Per-command parameter schema: name -> (type, default).  "inf" is accepted
# for coherence times.
_MODEL_KEYS = {"alpha": (float, -0.02), "beta": (float, 0.6), "coherence_time": (float, 10e-6)}

_SCHEMAS: dict[str, dict] = {
    "estimate": {
        "mu0": (float, 0.0),
        "sigma0": (float, 1e6),
        "n": (int, 15),
        "eps_true": (float, None),
        **_MODEL_KEYS,
    },
    "campaign": {
        "runs": (int, 5000),
        "n": (int, 15),
        "mu0": (float, 0.0),
        "sigma0": (float, 1e6),
        "truth_alpha": (float, -0.02),
        "truth_beta": (float, 0.6),
        "truth_coherence_time": (float, 10e-6),
        **_MODEL_KEYS,
    },
    "validate-gaussian": {
        "mu0": (float, 0.0),
        "sigma0": (float, 1e6),
        "multipliers": (list, [0.25, 0.5, 1.0, 2.0, 3.0, 4.0]),
        **_MODEL_KEYS,
    },
    "track": {
        "n": (int, 8),
        "cycles": (int, 50),
        "tau_max": (float, 7e-6),
        "sigma_eps": (float, 30e3),
        "sigma0": (float, 30e3),
        "repetitions": (int, 200),
        "target_detuning": (float, 1e6),
        **_MODEL_KEYS,
    },
    "compare-frequentist": {
        "shots": (int, 15),
        "runs": (int, 400),
        "sigma0": (float, 1e6),
        "tau_multipliers": (list, [0.5, 1.0, 2.0, 4.0]),
        "alpha": (float, 0.0),
        "beta": (float, 1.0),
        "coherence_time": (float, math.inf),
    },
}


def _coerce(name: str, kind, value):
    if value is None:
        return None
    try:
        if kind is list:
            if isinstance(value, str):
                value = [float(v) for v in value.split(",") if v]
            return [float(v) for v in value]
        if kind is float and isinstance(value, str) and value.lower() in ("inf", "infinity"):
            return math.inf
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"parameter '{name}': cannot interpret {value!r} as {kind.__name__}")


def resolve_scenario(command: str, flag_values: dict, config_path: str | None) -> Scenario:
    """Merge defaults, config-file values and flags (flags win) into a Scenario."""
    if command not in _SCHEMAS:
        raise ScenarioError(f"unknown command {command!r}; choose from {COMMANDS}")
    schema = _SCHEMAS[command]
    params = {k: default for k, (_, default) in schema.items()}

    config: dict = {}
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ScenarioError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(config, dict):
            raise ScenarioError(f"config file {config_path} must hold a JSON object")

    reserved = {"seed", "output", "format"}
    for key, value in config.items():
        if key in reserved:
            continue
        if key not in schema:
            raise ScenarioError(f"unknown config key '{key}' for command '{command}'")
        params[key] = _coerce(key, schema[key][0], value)

    for key, value in flag_values.items():
        if key in schema and value is not None:
            params[key] = _coerce(key, schema[key][0], value)

    seed = flag_values.get("seed")
    if seed is None:
        seed = config.get("seed", 0)
    fmt = flag_values.get("format") or config.get("format") or "csv"
    if fmt not in ("csv", "json"):
        raise ScenarioError(f"format must be 'csv' or 'json', got {fmt!r}")

    output = flag_values.get("output") or config.get("output")
    if output is None:
        outdir = os.environ.get(OUTDIR_ENV, ".")
        output = str(Path(outdir) / f"{command}.{fmt}")

    _validate_params(command, params)
    return Scenario(
        command=command, params=params, seed=int(seed), output_path=output, format=fmt
    )


def _model_from(params: dict, prefix: str = "") -> LikelihoodModel:
    try:
        return LikelihoodModel(
            alpha=params[f"{prefix}alpha"],
            beta=params[f"{prefix}beta"],
            T=params[f"{prefix}coherence_time"],
        )
    except ValueError as exc:
        raise ScenarioError(str(exc))


def _validate_params(command: str, params: dict) -> None:
    _model_from(params)
    if command == "campaign":
        _model_from(params, "truth_")
        if params["runs"] < 1:
            raise ScenarioError("runs must be >= 1")
    for key in ("sigma0", "sigma_eps", "tau_max", "target_detuning"):
        if key in params and params[key] is not None and params[key] <= 0 and key != "sigma_eps":
            raise ScenarioError(f"{key} must be positive")
    if params.get("sigma_eps") is not None and params.get("sigma_eps", 0.0) < 0:
        raise ScenarioError("sigma_eps must be >= 0")
    for key in ("n", "shots", "cycles", "repetitions"):
        if key in params and params[key] < 0:
            raise ScenarioError(f"{key} must be >= 0")
    for key in ("multipliers", "tau_multipliers"):
        if key in params and any(m <= 0 for m in params[key]):
            raise ScenarioError(f"all {key} must be positive")


# ---------------------------------------------------------------------------
# Output writing
# ---------------------------------------------------------------------------


def _write_output(scenario: Scenario, columns: list[str], rows: list[list]) -> None:
    path = Path(scenario.output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(scenario.header_dict(), sort_keys=True)
    if scenario.format == "csv":
        lines = [f"# freqtrack {__version__}", f"# scenario {header}", ",".join(columns)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
    else:
        doc = {
            "tool": f"freqtrack {__version__}",
            "scenario": scenario.header_dict(),
            "columns": columns,
            "rows": rows,
        }
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_summary(scenario: Scenario, summary: dict) -> Path:
    path = Path(scenario.output_path).with_suffix(".summary.json")
    doc = {
        "tool": f"freqtrack {__version__}",
        "scenario": scenario.header_dict(),
        "summary": summary,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def read_header(path: str) -> dict:
    """Recover the scenario header from an output file."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return json.loads(text)["scenario"]
    for line in text.splitlines():
        if line.startswith("# scenario "):
            return json.loads(line[len("# scenario "):])
    raise ValueError(f"no scenario header found in {path}")


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _run_estimate(scenario: Scenario) -> None:
    p = scenario.params
    model = _model_from(p)
    prior = GaussianBelief(p["mu0"], p["sigma0"])
    rng = np.random.default_rng(scenario.seed)
    eps_true = p["eps_true"]
    if eps_true is None:
        eps_true = prior.mu + prior.sigma * float(rng.standard_normal())
    _, trace = run_estimation(
        prior, p["n"], model, lambda probe: sample_outcome(eps_true, probe, model, rng)
    )
    rows = [[r.step, r.tau, r.delta_f, r.outcome, r.mu, r.sigma] for r in trace]
    _write_output(
        scenario, ["step", "tau_s", "delta_f_hz", "outcome", "mu_hz", "sigma_hz"], rows
    )


def _run_campaign(scenario: Scenario) -> None:
    p = scenario.params
    cfg = experiments.CampaignConfig(
        run_count=p["runs"],
        n_shots=p["n"],
        prior=GaussianBelief(p["mu0"], p["sigma0"]),
        truth_model=_model_from(p, "truth_"),
        update_model=_model_from(p),
        master_seed=scenario.seed,
    )
    runs = experiments.campaign_runs(cfg)
    stats = experiments.ErrorStats.from_runs(runs)
    rows = [[i, r.eps_true, r.eps_hat, r.final_sigma] for i, r in enumerate(runs)]
    _write_output(scenario, ["run", "eps_true_hz", "eps_hat_hz", "final_sigma_hz"], rows)
    _write_summary(
        scenario,
        {
            "n_runs": len(runs),
            "mean_final_sigma_hz": stats.mean_final_sigma,
            "std_hz": stats.std,
            "mad_hz": stats.mad,
            "outlier_fraction": stats.outlier_fraction,
            "calibration_fraction": stats.calibration_fraction,
        },
    )


def _run_validate_gaussian(scenario: Scenario) -> None:
    p = scenario.params
    rows = experiments.gaussian_validity_sweep(
        GaussianBelief(p["mu0"], p["sigma0"]), _model_from(p), p["multipliers"]
    )
    _write_output(
        scenario,
        ["tau_multiplier", "tau_s", "m", "posterior_sigma_hz", "kl_bits", "n_modes"],
        [[r.tau_multiplier, r.tau, r.m, r.posterior_sigma, r.kl_bits, r.n_modes] for r in rows],
    )


def _run_track(scenario: Scenario) -> None:
    p = scenario.params
    fb, open_loop = experiments.closed_loop_track(
        noise=NoiseProcess(kind=qubitsim.QUASISTATIC, sigma_eps=p["sigma_eps"]),
        n_shots=p["n"],
        m_cycles=p["cycles"],
        tau_max=p["tau_max"],
        model=_model_from(p),
        seed=scenario.seed,
        repetitions=p["repetitions"],
        sigma0=p["sigma0"],
        target_detuning=p["target_detuning"],
    )
    rows = [
        [float(t), float(f), float(o)]
        for t, f, o in zip(fb.tau_values, fb.flip_fractions, open_loop.flip_fractions)
    ]
    _write_output(
        scenario,
        ["tau_s", "flip_fraction_feedback", "flip_fraction_no_feedback"],
        rows,
    )
    summary = {}
    for label, rec in (("feedback", fb), ("no_feedback", open_loop)):
        fit = experiments.fit_fringe(rec)
        summary[label] = {
            "t2_s": fit.t2,
            "frequency_hz": fit.frequency,
            "amplitude": fit.amplitude,
            "t2_err_s": fit.t2_err,
            "frequency_err_hz": fit.frequency_err,
            "identifiable": fit.identifiable,
        }
    _write_summary(scenario, summary)


def _run_compare_frequentist(scenario: Scenario) -> None:
    p = scenario.params
    model = _model_from(p)
    sigma0 = p["sigma0"]
    tau_opt = optimal_tau(sigma0, model.T)
    rows = []
    for mult in p["tau_multipliers"]:
        tau = mult * tau_opt
        fbs_err = []
        freq_err = []
        for i in range(p["runs"]):
            rng = qubitsim.rng_for_run(scenario.seed, i)
            eps_true = sigma0 * float(rng.standard_normal())
            belief, _ = experiments._run_single_estimation(
                GaussianBelief(0.0, sigma0), p["shots"], model, model, eps_true, rng
            )
            fbs_err.append(abs(belief.mu - eps_true))
            est = experiments.frequentist_estimate(eps_true, tau, p["shots"], model, rng)
            freq_err.append(abs(est - eps_true))
        rows.append(
            [mult, tau, float(np.median(fbs_err)), float(np.median(freq_err))]
        )
    _write_output(
        scenario,
        ["tau_multiplier", "tau_s", "fbs_median_abs_error_hz", "frequentist_median_abs_error_hz"],
        rows,
    )


_RUNNERS = {
    "estimate": _run_estimate,
    "campaign": _run_campaign,
    "validate-gaussian": _run_validate_gaussian,
    "track": _run_track,
    "compare-frequentist": _run_compare_frequentist,
}


# ---------------------------------------------------------------------------
# Argument parsing and entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # Argument errors are scenario-validation failures (exit 1, not argparse's 2).
    def error(self, message):
        raise ScenarioError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="freqtrack",
        description="Adaptive Bayesian qubit-frequency estimation experiments",
    )
    parser.add_argument("--version", action="version", version=f"freqtrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        sp = sub.add_parser(command)
        sp.add_argument("--config", help="JSON config file (flags take precedence)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--output", default=None, help="output file path")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        for key, (kind, default) in schema.items():
            flag = "--" + key.replace("_", "-")
            if kind is list:
                sp.add_argument(flag, default=None, help=f"comma-separated (default {default})")
            else:
                sp.add_argument(flag, default=None, help=f"default {default}")
    return parser


def parse_scenario(argv: list[str]) -> Scenario:
    """Parse command-line arguments (and optional config file) into a Scenario."""
    args = build_parser().parse_args(argv)
    flag_values = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    return resolve_scenario(args.command, flag_values, args.config)


def execute(scenario: Scenario) -> int:
    """Run the scenario; returns the process exit code."""
    try:
        _RUNNERS[scenario.command](scenario)
    except ScenarioError:
        raise
    except OSError as exc:
        print(f"freqtrack: I/O failure for {scenario.output_path}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"freqtrack: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        scenario = parse_scenario(argv)
    except ScenarioError as exc:
        print(f"freqtrack: {exc}", file=sys.stderr)
        return 1
    try:
        return execute(scenario)
    except ScenarioError as exc:
        print(f"freqtrack: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
