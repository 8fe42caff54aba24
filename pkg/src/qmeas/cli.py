"""Command-line front end: config ingestion, run orchestration, report emission.

Reports have a stable schema: every run emits the same top-level field set
and analyses a subcommand does not perform are explicit nulls.  Floats are
serialized with 17 significant digits so a fixed (config, seed) pair yields
byte-identical report files; wall-clock timing goes to stderr, never into
the file.

Exit codes: 0 success, 1 usage or configuration error, 2 model invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from .discrimination import (
    SamplingPlan,
    channel_information,
    interference_analysis,
    interference_phase_scan,
    nogo_search,
    optimal_phase,
    overlap,
    purity_rate,
)
from .ensembles import (
    Gemenge,
    mixture_density,
    restrict_statistical,
    restrict_stochastic,
    run_ensemble,
)
from .hilbert import InvariantViolation, partial_trace
from .model import (
    ModelConfig,
    branch_state,
    decohere,
    measurement_chain_state,
    ms_layout,
    prepare_system,
    zoo,
)

SEED_ENV_VAR = "QMEAS_SEED"
MIN_NOGO_EVENTS = 10_000
AMPLITUDE_REJECT = 1e-6
AMPLITUDE_WARN = 1e-9

REPORT_SECTIONS = (
    "frequency",
    "restriction",
    "overlaps",
    "purity",
    "interference",
    "channel",
    "nogo",
    "decoherence",
)


class ConfigError(Exception):
    """Unusable configuration or command line."""


@dataclass
class ExperimentConfig:
    a1_re: float = 1.0 / math.sqrt(2.0)
    a1_im: float = 0.0
    a2_re: float = 1.0 / math.sqrt(2.0)
    a2_im: float = 0.0
    gamma: float = 0.0
    c_phase: float = 0.0
    n_env: int = 5
    env_overlap: float = 0.5
    n_events: int = 100_000
    rng_seed: int = 0
    output_path: str | None = None
    output_format: str = "json"

    @property
    def a1(self) -> complex:
        return complex(self.a1_re, self.a1_im)

    @property
    def a2(self) -> complex:
        return complex(self.a2_re, self.a2_im)

    @property
    def c1(self) -> complex:
        return complex(np.exp(1j * self.c_phase))

    def model(self) -> ModelConfig:
        return ModelConfig(
            a1=self.a1,
            a2=self.a2,
            n_env=self.n_env,
            env_overlap=self.env_overlap,
            rng_seed=self.rng_seed,
        )


_INT_FIELDS = {"n_env", "n_events", "rng_seed"}
_FLOAT_FIELDS = {
    "a1_re", "a1_im", "a2_re", "a2_im", "gamma", "c_phase", "env_overlap",
}


def _parse_amplitude(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) not in (1, 2):
        raise ConfigError(f"{flag} expects RE or RE,IM, got {text!r}")
    try:
        re_part = float(parts[0])
        im_part = float(parts[1]) if len(parts) == 2 else 0.0
    except ValueError:
        raise ConfigError(f"{flag} expects numeric RE[,IM], got {text!r}") from None
    return re_part, im_part


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path!r} must hold a flat JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> tuple[ExperimentConfig, list[str]]:
    """Merge defaults, config file, environment seed, and flags (flag wins)."""
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))

    if "rng_seed" not in values and os.environ.get(SEED_ENV_VAR):
        try:
            values["rng_seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(
                f"{SEED_ENV_VAR} must be an integer, got {os.environ[SEED_ENV_VAR]!r}"
            ) from None

    if args.a1 is not None:
        values["a1_re"], values["a1_im"] = _parse_amplitude(args.a1, "--a1")
    if args.a2 is not None:
        values["a2_re"], values["a2_im"] = _parse_amplitude(args.a2, "--a2")
    for flag, key in (
        ("seed", "rng_seed"),
        ("events", "n_events"),
        ("gamma", "gamma"),
        ("c_phase", "c_phase"),
        ("n_env", "n_env"),
        ("env_overlap", "env_overlap"),
        ("out", "output_path"),
        ("format", "output_format"),
    ):
        flag_value = getattr(args, flag)
        if flag_value is not None:
            values[key] = flag_value

    for key in _INT_FIELDS & set(values):
        try:
            values[key] = int(values[key])
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be an integer") from None
    for key in _FLOAT_FIELDS & set(values):
        try:
            values[key] = float(values[key])
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be a number") from None

    config = ExperimentConfig(**values)
    warnings: list[str] = []

    norm = math.sqrt(abs(config.a1) ** 2 + abs(config.a2) ** 2)
    deviation = abs(norm - 1.0)
    if deviation > AMPLITUDE_REJECT:
        raise ConfigError(
            f"amplitudes deviate from normalization by {deviation:.3e} "
            f"(limit {AMPLITUDE_REJECT:.0e})"
        )
    if deviation > AMPLITUDE_WARN:
        warnings.append(
            f"amplitudes renormalized; deviation was {deviation:.3e}"
        )
    config.a1_re /= norm
    config.a1_im /= norm
    config.a2_re /= norm
    config.a2_im /= norm

    if config.n_events < 1:
        raise ConfigError("n_events must be >= 1")
    if config.n_env < 0:
        raise ConfigError("n_env must be >= 0")
    if not 0.0 <= config.env_overlap <= 1.0:
        raise ConfigError("env_overlap must lie in [0, 1]")
    if config.output_format not in ("json", "csv"):
        raise ConfigError("output_format must be 'json' or 'csv'")
    return config, warnings


# ------------------------------------------------------------------ reports

def metric(value, target=None, tolerance=None) -> dict:
    passed = None
    if target is not None and tolerance is not None:
        passed = bool(abs(float(value) - float(target)) <= float(tolerance))
    return {
        "value": float(value),
        "target": None if target is None else float(target),
        "tolerance": None if tolerance is None else float(tolerance),
        "passed": passed,
    }


def _config_echo(config: ExperimentConfig) -> dict:
    # experiment parameters only; the output destination is not part of them
    return {
        "a1_re": config.a1_re,
        "a1_im": config.a1_im,
        "a2_re": config.a2_re,
        "a2_im": config.a2_im,
        "gamma": config.gamma,
        "c_phase": config.c_phase,
        "n_env": config.n_env,
        "env_overlap": config.env_overlap,
        "n_events": config.n_events,
        "rng_seed": config.rng_seed,
    }


def empty_report(config: ExperimentConfig, command: str) -> dict:
    report = {
        "schema": "qmeas-report/1",
        "command": command,
        "config": _config_echo(config),
    }
    for section in REPORT_SECTIONS:
        report[section] = None
    return report


def _frequency_section(config: ExperimentConfig) -> dict:
    model = config.model()
    report = run_ensemble(model, config.n_events)
    branches = []
    for i in range(2):
        p = report.born_probabilities[i]
        branches.append(
            {
                "branch": i + 1,
                "count": report.counts[i],
                "born_probability": p,
                "frequency": metric(
                    report.frequencies[i],
                    target=p,
                    tolerance=4.0 * report.standard_errors[i],
                ),
            }
        )
    return {
        "n_events": report.n_events,
        "rng_seed": config.rng_seed,
        "gate": "four sigma binomial",
        "branches": branches,
    }


def _restriction_section(config: ExperimentConfig) -> dict:
    psi = measurement_chain_state(config.a1, config.a2)
    statistical = restrict_statistical(psi)
    stochastic = restrict_stochastic(psi)
    diff = float(
        np.max(np.abs(mixture_density(stochastic).matrix - statistical.matrix))
    )
    p1, p2 = config.model().born_weights
    return {
        "observer_weights": [
            metric(statistical.matrix[0, 0].real, target=p1, tolerance=1e-12),
            metric(statistical.matrix[1, 1].real, target=p2, tolerance=1e-12),
        ],
        "gemenge_vs_partial_trace_max_diff": metric(diff, target=0.0, tolerance=1e-12),
    }


def _overlaps_section(config: ExperimentConfig) -> dict:
    a1, a2 = config.a1, config.a2
    pure = prepare_system(a1, a2)
    p1, p2 = config.model().born_weights
    mixed = mixture_density(
        Gemenge(((prepare_system(1, 0), p1), (prepare_system(0, 1), p2)))
    )
    system_zoo = zoo(pure.layout, gamma=config.gamma)
    target_min = 1.0 - abs(a1) * abs(a2)

    chain_pure = measurement_chain_state(a1, a2, include_observer=False)
    chain_layout = chain_pure.layout
    chain_mixed = mixture_density(
        Gemenge(
            (
                (branch_state(1, chain_layout), p1),
                (branch_state(2, chain_layout), p2),
            )
        )
    )
    detector_zoo = zoo(chain_layout)

    channel = channel_information((a1, a2))
    return {
        "system_side": {
            "K_S_x": metric(overlap(system_zoo["S_x"], pure, mixed).k_value),
            "K_S_y": metric(overlap(system_zoo["S_y"], pure, mixed).k_value),
            "K_S_a_at_gamma": metric(
                overlap(system_zoo["S_a"], pure, mixed).k_value
            ),
            "K_min_over_gamma_sweep": metric(
                channel.pre_channel_k_min, target=target_min, tolerance=1e-9
            ),
            "gamma_at_min": channel.pre_channel_gamma,
        },
        "detector_side": {
            "K_Q": metric(
                overlap(detector_zoo["Q"], chain_pure, chain_mixed).k_value,
                target=1.0,
                tolerance=1e-9,
            ),
            "K_Q_x": metric(
                overlap(detector_zoo["Q_x"], chain_pure, chain_mixed).k_value,
                target=1.0,
                tolerance=1e-9,
            ),
            "K_Q_y": metric(
                overlap(detector_zoo["Q_y"], chain_pure, chain_mixed).k_value,
                target=1.0,
                tolerance=1e-9,
            ),
            "K_min_over_direction_sweep": metric(
                channel.post_channel_k_min, target=1.0, tolerance=1e-9
            ),
            "n_directions": channel.n_directions,
        },
        "input_eigenstate_pair_K_S_z": metric(
            channel.k_sz_eigenstates, target=0.0, tolerance=1e-12
        ),
    }


def _purity_section(config: ExperimentConfig) -> dict:
    a1, a2 = config.a1, config.a2
    pure = prepare_system(a1, a2)
    p1, p2 = config.model().born_weights
    mixed = mixture_density(
        Gemenge(((prepare_system(1, 0), p1), (prepare_system(0, 1), p2)))
    )
    scan = optimal_phase(pure)
    return {
        "pure_r_p_at_gamma": metric(purity_rate(pure, config.gamma)),
        "pure_r_p_optimal": metric(
            scan.purity, target=2.0 * abs(a1) * abs(a2), tolerance=1e-9
        ),
        "optimal_gamma": scan.gamma,
        "mixture_r_p_at_gamma": metric(
            purity_rate(mixed, config.gamma), target=0.0, tolerance=1e-12
        ),
    }


def _interference_section(config: ExperimentConfig) -> dict:
    a = (config.a1, config.a2)
    target_min = 1.0 - abs(config.a1) * abs(config.a2)
    sections = {}
    for scope in ("MS", "SD"):
        report = interference_analysis(config.c1, a, scope=scope)
        phase, k_min = interference_phase_scan(a, scope=scope)
        sections[scope] = {
            "c_phase": config.c_phase,
            "eigenvalues": list(report.b_eigenvalues),
            "expectation_pure": metric(report.expectation_pure),
            "expectation_mixed": metric(
                report.expectation_mixed, target=0.0, tolerance=1e-12
            ),
            "K_at_c_phase": metric(report.k_value),
            "phase_scan": {
                "phase_at_min": phase,
                "K_min": metric(k_min, target=target_min, tolerance=1e-4),
            },
        }
    return sections


def _channel_section(config: ExperimentConfig) -> dict:
    report = channel_information((config.a1, config.a2))
    target_min = 1.0 - abs(config.a1) * abs(config.a2)
    return {
        "K_S_z_eigenstate_pair": metric(
            report.k_sz_eigenstates, target=0.0, tolerance=1e-12
        ),
        "pre_channel_K_min": metric(
            report.pre_channel_k_min, target=target_min, tolerance=1e-9
        ),
        "pre_channel_gamma": report.pre_channel_gamma,
        "post_channel_K_min": metric(
            report.post_channel_k_min, target=1.0, tolerance=1e-9
        ),
        "n_gamma": report.n_gamma,
        "n_directions": report.n_directions,
    }


def _verdict_dict(verdict) -> dict:
    witness = None
    if verdict.witness is not None:
        params, g0, g1, g2 = verdict.witness
        witness = {"parameters": str(params), "g0": g0, "g1": g1, "g2": g2}
    forcing = None
    if verdict.forcing is not None:
        forcing = {
            "n_samples": verdict.forcing.n_samples,
            "max_substitution_residual": metric(
                verdict.forcing.max_substitution_residual,
                target=0.0,
                tolerance=1e-12,
            ),
            "max_forced_gap": metric(
                verdict.forcing.max_forced_gap, target=0.0, tolerance=1e-8
            ),
        }
    return {
        "family": verdict.family_description,
        "n_candidates_tested": verdict.n_candidates_tested,
        "found": verdict.found,
        "witness": witness,
        "max_min_gap": metric(verdict.max_min_gap, target=0.0, tolerance=1e-8),
        "out_of_regime": verdict.out_of_regime,
        "forcing": forcing,
    }


def _nogo_section(config: ExperimentConfig, warn) -> dict:
    if config.n_events < MIN_NOGO_EVENTS:
        raise ConfigError(
            f"the no-go search needs at least {MIN_NOGO_EVENTS} samples; "
            f"got n_events={config.n_events}"
        )
    a1, a2 = config.a1, config.a2
    if abs(a1 * a2) <= 1e-12:
        warn("a1*a2 = 0: out of the no-go regime, scans are skipped")
    layout = ms_layout()
    states = (
        measurement_chain_state(a1, a2),
        branch_state(1, layout),
        branch_state(2, layout),
    )
    half = config.n_events // 2
    plans = {
        "O": SamplingPlan(half, config.n_events - half),
        "D": SamplingPlan(half, config.n_events - half),
        "MS": SamplingPlan(0, config.n_events),
    }
    scopes = {}
    for scope, plan in plans.items():
        verdict = nogo_search(scope, states, plan, seed=config.rng_seed)
        scopes[scope] = _verdict_dict(verdict)
    return {"sample_count": config.n_events, "scopes": scopes}


def _decoherence_section(config: ExperimentConfig) -> dict:
    if config.n_env < 1:
        raise ConfigError("decoherence analysis needs n_env >= 1")
    a1, a2 = config.a1, config.a2
    predicted = config.env_overlap**config.n_env
    psi = measurement_chain_state(a1, a2)
    tagged = decohere(psi, config.n_env, config.env_overlap)
    reduced = partial_trace(tagged, ["S", "D", "O"])
    if abs(a1 * a2) > 1e-12:
        factor = reduced.matrix[0, 7] / (a1 * np.conj(a2))
        coherence = metric(factor.real, target=predicted, tolerance=1e-10)
        coherence_imag = metric(factor.imag, target=0.0, tolerance=1e-10)
    else:
        coherence = None
        coherence_imag = None

    purities = []
    for amplitudes in ((1, 0), (0, 1)):
        branch_chain = measurement_chain_state(*amplitudes)
        branch_tagged = decohere(branch_chain, config.n_env, config.env_overlap)
        branch_reduced = partial_trace(branch_tagged, ["S", "D", "O"])
        purities.append(metric(branch_reduced.purity(), target=1.0, tolerance=1e-10))

    return {
        "n_env": config.n_env,
        "env_overlap": config.env_overlap,
        "predicted_factor": predicted,
        "coherence_factor": coherence,
        "coherence_factor_imag": coherence_imag,
        "branch_purities": purities,
    }


def cmd_simulate(config: ExperimentConfig, warn) -> dict:
    report = empty_report(config, "simulate")
    report["frequency"] = _frequency_section(config)
    report["restriction"] = _restriction_section(config)
    return report


def cmd_discriminate(config: ExperimentConfig, warn) -> dict:
    report = empty_report(config, "discriminate")
    report["overlaps"] = _overlaps_section(config)
    report["purity"] = _purity_section(config)
    report["interference"] = _interference_section(config)
    report["channel"] = _channel_section(config)
    return report


def cmd_nogo(config: ExperimentConfig, warn) -> dict:
    report = empty_report(config, "nogo")
    report["nogo"] = _nogo_section(config, warn)
    return report


def cmd_decohere(config: ExperimentConfig, warn) -> dict:
    report = empty_report(config, "decohere")
    report["decoherence"] = _decoherence_section(config)
    return report


def cmd_all(config: ExperimentConfig, warn) -> dict:
    report = empty_report(config, "all")
    report["frequency"] = _frequency_section(config)
    report["restriction"] = _restriction_section(config)
    report["overlaps"] = _overlaps_section(config)
    report["purity"] = _purity_section(config)
    report["interference"] = _interference_section(config)
    report["channel"] = _channel_section(config)
    report["nogo"] = _nogo_section(config, warn)
    report["decoherence"] = _decoherence_section(config)
    return report


_COMMANDS = {
    "simulate": cmd_simulate,
    "discriminate": cmd_discriminate,
    "nogo": cmd_nogo,
    "decohere": cmd_decohere,
    "all": cmd_all,
}


# ------------------------------------------------------------- serialization

def _format_float(value: float) -> str:
    if not math.isfinite(value):
        raise InvariantViolation(f"non-finite value {value!r} in report")
    return format(value, ".17g")


def render_json(value, indent: int = 0) -> str:
    pad = "  " * indent
    child_pad = "  " * (indent + 1)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            f"{child_pad}{json.dumps(str(key))}: {render_json(item, indent + 1)}"
            for key, item in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = ",\n".join(
            f"{child_pad}{render_json(item, indent + 1)}" for item in value
        )
        return "[\n" + items + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value).__name__} into a report")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    return str(value)


def render_csv(report: dict) -> str:
    rows: list[tuple[str, object, object, object]] = []

    def walk(prefix: str, value) -> None:
        if isinstance(value, dict):
            if set(value) == {"value", "target", "tolerance", "passed"}:
                rows.append((prefix, value["value"], value["tolerance"], value["passed"]))
                return
            for key, item in value.items():
                walk(f"{prefix}.{key}" if prefix else str(key), item)
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                walk(f"{prefix}[{i}]", item)
        else:
            rows.append((prefix, value, None, None))

    walk("", report)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "value", "tolerance", "passed"])
    for name, value, tolerance, passed in rows:
        writer.writerow([name, _csv_cell(value), _csv_cell(tolerance), _csv_cell(passed)])
    return buffer.getvalue()


def render_report(report: dict, output_format: str) -> str:
    if output_format == "csv":
        return render_csv(report)
    return render_json(report) + "\n"


# --------------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qmeas",
        description="Simulate a qubit measurement chain and its information metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "sample collapse events and check the restriction maps"),
        ("discriminate", "overlap table, purity rates, interference terms"),
        ("nogo", "scan observable families for a discriminating operator"),
        ("decohere", "environment coupling: coherence factor and branch purity"),
        ("all", "run every analysis"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="PATH", help="flat JSON config file")
        cmd.add_argument("--seed", type=int, default=None, help="RNG seed (u64)")
        cmd.add_argument("--events", type=int, default=None, metavar="N",
                         help="event / sample count")
        cmd.add_argument("--a1", default=None, metavar="RE[,IM]",
                         help="first amplitude")
        cmd.add_argument("--a2", default=None, metavar="RE[,IM]",
                         help="second amplitude")
        cmd.add_argument("--gamma", type=float, default=None, metavar="RAD",
                         help="conjugate-spin phase")
        cmd.add_argument("--c-phase", dest="c_phase", type=float, default=None,
                         metavar="RAD", help="interference-term phase")
        cmd.add_argument("--n-env", dest="n_env", type=int, default=None,
                         metavar="N", help="environment qubit count")
        cmd.add_argument("--env-overlap", dest="env_overlap", type=float,
                         default=None, metavar="X",
                         help="per-qubit environment overlap in [0, 1]")
        cmd.add_argument("--out", default=None, metavar="PATH",
                         help="output file (default: stdout)")
        cmd.add_argument("--format", default=None, choices=("json", "csv"),
                         help="output format")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    started = time.perf_counter()
    try:
        args = parser.parse_args(argv)
        config, warnings = resolve_config(args)

        def warn(message: str) -> None:
            print(f"qmeas: warning: {message}", file=sys.stderr)

        for message in warnings:
            warn(message)
        report = _COMMANDS[args.command](config, warn)
        text = render_report(report, config.output_format)
        if config.output_path:
            with open(config.output_path, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"qmeas: error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, ValueError) as exc:
        print(f"qmeas: invariant violation: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - started
    destination = config.output_path or "stdout"
    print(
        f"qmeas: {args.command} finished in {elapsed:.2f}s, report -> {destination}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
