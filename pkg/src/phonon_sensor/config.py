"""Declarative run configuration: YAML schema, validation and hashing.

The file mirrors the simulation types section by section.  Keys carry unit
suffixes (hz, mv, um, ...) and are converted to SI/angular units at load
time; unknown keys are rejected.  Every run stamps its outputs with the
sha256 hash of the canonical configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

import yaml

from .constants import (
    ATOMIC_MASS_UNIT,
    DEFAULT_FREE_RUNNING_AMPLITUDE,
    ELEMENTARY_CHARGE,
    TWO_PI,
)
from .dynamics import ElectricNoise, NoiseModel
from .photons import PipelineConfig
from .physics import DriveConfig, LaserBeam, TrapConfig


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Campaign grids, trial counts and seeds."""

    seed: int = 20260809
    reference_phase: float = 0.03  # rad, stop-reference offset of the TAC
    amplitude_voltages: tuple[float, ...] = (
        5e-3,
        7.5e-3,
        10e-3,
        12.5e-3,
        15e-3,
        18.25e-3,
    )
    amplitude_trials: int = 4
    squeeze_gains: tuple[float, ...] = (0.0, 0.3, 0.6, 0.9)
    squeeze_phases: tuple[float, ...] = (0.0, math.pi / 4, math.pi / 2)
    squeeze_trials: int = 50
    squeeze_periods: int = 10000
    lower_bound_voltages: tuple[float, ...] = tuple(
        0.04e-3 * (1.2e-3 / 0.04e-3) ** (i / 11) for i in range(12)
    )
    lower_bound_trials: int = 32
    lock_threshold: float = 0.3  # rad
    repetitions: int = 50  # measurement repetitions of the sensitivity run

    def __post_init__(self):
        if self.amplitude_trials < 1 or self.squeeze_trials < 1:
            raise ConfigError("trial counts must be >= 1")
        if self.lower_bound_trials < 20:
            raise ConfigError("lower-bound protocol needs >= 20 trials per point")
        if self.lock_threshold <= 0:
            raise ConfigError("lock_threshold must be > 0")
        if self.repetitions < 2:
            raise ConfigError("repetitions must be >= 2")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    emit_svg: bool = True

    def resolve_directory(self) -> str:
        return os.environ.get("PHONON_SENSOR_OUTDIR", self.directory)


@dataclass(frozen=True)
class RunConfig:
    beams: tuple[LaserBeam, ...]
    trap: TrapConfig
    drive: DriveConfig
    noise: NoiseModel
    electric_noise: ElectricNoise
    pipeline: PipelineConfig
    experiment: ExperimentConfig
    output: OutputConfig
    free_running_amplitude: float = DEFAULT_FREE_RUNNING_AMPLITUDE

    @property
    def amplitude_per_force(self) -> float:
        """Locked-oscillator amplitude response, 1/(m zeta w_z), in m/N."""
        return 1.0 / (self.noise.mass * self.noise.damping * self.trap.secular_z)


def default_config() -> RunConfig:
    red = LaserBeam(detuning=TWO_PI * -75e6, saturation=0.8)
    blue = LaserBeam(detuning=TWO_PI * 30e6, saturation=0.4)
    return RunConfig(
        beams=(red, blue),
        trap=TrapConfig(),
        drive=DriveConfig(injection_voltage=18.25e-3),
        noise=NoiseModel(),
        electric_noise=ElectricNoise(),
        pipeline=PipelineConfig(),
        experiment=ExperimentConfig(),
        output=OutputConfig(),
    )


# ---------------------------------------------------------------------------
# dict <-> RunConfig with unit conversion


def _round12(value):
    """Stabilize unit-converted floats so dict round trips are exact."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return value
    if isinstance(value, int):
        return value
    return float(f"{value:.12g}")


def _round_tree(node):
    if isinstance(node, dict):
        return {k: _round_tree(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_round_tree(v) for v in node]
    return _round12(node)


def config_to_dict(config: RunConfig) -> dict:
    return _round_tree(_config_to_dict_raw(config))


def _config_to_dict_raw(config: RunConfig) -> dict:
    return {
        "physics": {
            "beams": [
                {
                    "detuning_hz": beam.detuning / TWO_PI,
                    "saturation": beam.saturation,
                    "wavelength_nm": TWO_PI / beam.wave_number * 1e9,
                    "linewidth_hz": beam.linewidth / TWO_PI,
                }
                for beam in config.beams
            ],
            "trap": {
                "mass_amu": config.trap.mass / ATOMIC_MASS_UNIT,
                "charge_e": config.trap.charge / ELEMENTARY_CHARGE,
                "axial_hz": config.trap.secular_z / TWO_PI,
                "radial_x_hz": config.trap.secular_x / TWO_PI,
                "radial_y_hz": config.trap.secular_y / TWO_PI,
                "drift_hz_per_s": config.trap.drift_rate,
            },
            "drive": {
                "injection_voltage_mv": config.drive.injection_voltage * 1e3,
                "injection_frequency_hz": config.drive.injection_frequency / TWO_PI,
                "force_per_volt_yn_per_mv": config.drive.force_per_volt * 1e24 * 1e-3,
                "squeeze_gain": config.drive.squeeze_gain,
                "squeeze_phase_rad": config.drive.squeeze_phase,
                "squeeze_enabled": config.drive.squeeze_enabled,
            },
            "noise": {
                "temperature_mk": config.noise.temperature * 1e3,
                "damping_rate_per_s": config.noise.damping,
                "electric_rms_mv": config.electric_noise.rms_voltage * 1e3,
                "electric_correlation_us": config.electric_noise.correlation_time * 1e6,
            },
            "free_running_amplitude_um": config.free_running_amplitude * 1e6,
        },
        "pipeline": {
            "efficiency": config.pipeline.efficiency,
            "snr": config.pipeline.snr,
            "bin_width_ns": config.pipeline.bin_width * 1e9,
            "gate_time_s": config.pipeline.gate_time,
            "timing_jitter_us": config.pipeline.timing_jitter * 1e6,
        },
        "experiment": {
            "seed": config.experiment.seed,
            "reference_phase_rad": config.experiment.reference_phase,
            "amplitude_voltages_mv": [v * 1e3 for v in config.experiment.amplitude_voltages],
            "amplitude_trials": config.experiment.amplitude_trials,
            "squeeze_gains": list(config.experiment.squeeze_gains),
            "squeeze_phases_rad": list(config.experiment.squeeze_phases),
            "squeeze_trials": config.experiment.squeeze_trials,
            "squeeze_periods": config.experiment.squeeze_periods,
            "lower_bound_voltages_mv": [
                v * 1e3 for v in config.experiment.lower_bound_voltages
            ],
            "lower_bound_trials": config.experiment.lower_bound_trials,
            "lock_threshold_rad": config.experiment.lock_threshold,
            "repetitions": config.experiment.repetitions,
        },
        "output": {
            "directory": config.output.directory,
            "emit_svg": config.output.emit_svg,
        },
    }


def _take(section: dict, key: str, default):
    return section.pop(key, default)


def _no_leftovers(section: dict, where: str):
    if section:
        raise ConfigError(f"unknown keys in {where}: {sorted(section)}")


def _expect_mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return dict(value)


def config_from_dict(data: dict) -> RunConfig:
    base = default_config()
    data = _expect_mapping(data, "top level")

    physics = _expect_mapping(_take(data, "physics", None), "physics")
    pipeline = _expect_mapping(_take(data, "pipeline", None), "pipeline")
    experiment = _expect_mapping(_take(data, "experiment", None), "experiment")
    output = _expect_mapping(_take(data, "output", None), "output")
    _no_leftovers(data, "top level")

    try:
        beams_raw = _take(physics, "beams", None)
        if beams_raw is None:
            beams = base.beams
        else:
            beams = []
            for i, entry in enumerate(beams_raw):
                entry = _expect_mapping(entry, f"physics.beams[{i}]")
                detuning = TWO_PI * float(_take(entry, "detuning_hz", 0.0))
                saturation = float(_take(entry, "saturation", 0.0))
                wavelength_nm = _take(entry, "wavelength_nm", None)
                if wavelength_nm is None:
                    wave_number = base.beams[0].wave_number
                else:
                    wave_number = TWO_PI / (float(wavelength_nm) * 1e-9)
                linewidth_hz = _take(entry, "linewidth_hz", None)
                linewidth = (
                    base.beams[0].linewidth
                    if linewidth_hz is None
                    else TWO_PI * float(linewidth_hz)
                )
                _no_leftovers(entry, f"physics.beams[{i}]")
                beams.append(
                    LaserBeam(
                        detuning=detuning,
                        saturation=saturation,
                        wave_number=wave_number,
                        linewidth=linewidth,
                    )
                )
            beams = tuple(beams)
            if not beams:
                raise ConfigError("physics.beams must not be empty")

        trap_raw = _expect_mapping(_take(physics, "trap", None), "physics.trap")
        trap = TrapConfig(
            mass=float(_take(trap_raw, "mass_amu", base.trap.mass / ATOMIC_MASS_UNIT))
            * ATOMIC_MASS_UNIT,
            charge=float(
                _take(trap_raw, "charge_e", base.trap.charge / ELEMENTARY_CHARGE)
            )
            * ELEMENTARY_CHARGE,
            secular_z=TWO_PI
            * float(_take(trap_raw, "axial_hz", base.trap.secular_z / TWO_PI)),
            secular_x=TWO_PI
            * float(_take(trap_raw, "radial_x_hz", base.trap.secular_x / TWO_PI)),
            secular_y=TWO_PI
            * float(_take(trap_raw, "radial_y_hz", base.trap.secular_y / TWO_PI)),
            drift_rate=float(_take(trap_raw, "drift_hz_per_s", base.trap.drift_rate)),
        )
        _no_leftovers(trap_raw, "physics.trap")

        drive_raw = _expect_mapping(_take(physics, "drive", None), "physics.drive")
        drive = DriveConfig(
            injection_voltage=float(
                _take(drive_raw, "injection_voltage_mv", base.drive.injection_voltage * 1e3)
            )
            * 1e-3,
            injection_frequency=TWO_PI
            * float(
                _take(
                    drive_raw,
                    "injection_frequency_hz",
                    base.drive.injection_frequency / TWO_PI,
                )
            ),
            force_per_volt=float(
                _take(
                    drive_raw,
                    "force_per_volt_yn_per_mv",
                    base.drive.force_per_volt * 1e21,
                )
            )
            * 1e-21,
            squeeze_gain=float(_take(drive_raw, "squeeze_gain", base.drive.squeeze_gain)),
            squeeze_phase=float(
                _take(drive_raw, "squeeze_phase_rad", base.drive.squeeze_phase)
            ),
            squeeze_enabled=bool(
                _take(drive_raw, "squeeze_enabled", base.drive.squeeze_enabled)
            ),
        )
        _no_leftovers(drive_raw, "physics.drive")

        noise_raw = _expect_mapping(_take(physics, "noise", None), "physics.noise")
        noise = NoiseModel(
            temperature=float(
                _take(noise_raw, "temperature_mk", base.noise.temperature * 1e3)
            )
            * 1e-3,
            damping=float(_take(noise_raw, "damping_rate_per_s", base.noise.damping)),
            mass=trap.mass,
        )
        electric = ElectricNoise(
            rms_voltage=float(
                _take(noise_raw, "electric_rms_mv", base.electric_noise.rms_voltage * 1e3)
            )
            * 1e-3,
            correlation_time=float(
                _take(
                    noise_raw,
                    "electric_correlation_us",
                    base.electric_noise.correlation_time * 1e6,
                )
            )
            * 1e-6,
        )
        _no_leftovers(noise_raw, "physics.noise")

        free_amp = (
            float(
                _take(
                    physics,
                    "free_running_amplitude_um",
                    base.free_running_amplitude * 1e6,
                )
            )
            * 1e-6
        )
        _no_leftovers(physics, "physics")

        pipe = PipelineConfig(
            efficiency=float(_take(pipeline, "efficiency", base.pipeline.efficiency)),
            snr=float(_take(pipeline, "snr", base.pipeline.snr)),
            bin_width=float(_take(pipeline, "bin_width_ns", base.pipeline.bin_width * 1e9))
            * 1e-9,
            gate_time=float(_take(pipeline, "gate_time_s", base.pipeline.gate_time)),
            timing_jitter=float(
                _take(pipeline, "timing_jitter_us", base.pipeline.timing_jitter * 1e6)
            )
            * 1e-6,
        )
        _no_leftovers(pipeline, "pipeline")

        exp_base = base.experiment
        exp = ExperimentConfig(
            seed=int(_take(experiment, "seed", exp_base.seed)),
            reference_phase=float(
                _take(experiment, "reference_phase_rad", exp_base.reference_phase)
            ),
            amplitude_voltages=tuple(
                float(v) * 1e-3
                for v in _take(
                    experiment,
                    "amplitude_voltages_mv",
                    [v * 1e3 for v in exp_base.amplitude_voltages],
                )
            ),
            amplitude_trials=int(
                _take(experiment, "amplitude_trials", exp_base.amplitude_trials)
            ),
            squeeze_gains=tuple(
                float(g) for g in _take(experiment, "squeeze_gains", exp_base.squeeze_gains)
            ),
            squeeze_phases=tuple(
                float(p)
                for p in _take(experiment, "squeeze_phases_rad", exp_base.squeeze_phases)
            ),
            squeeze_trials=int(
                _take(experiment, "squeeze_trials", exp_base.squeeze_trials)
            ),
            squeeze_periods=int(
                _take(experiment, "squeeze_periods", exp_base.squeeze_periods)
            ),
            lower_bound_voltages=tuple(
                float(v) * 1e-3
                for v in _take(
                    experiment,
                    "lower_bound_voltages_mv",
                    [v * 1e3 for v in exp_base.lower_bound_voltages],
                )
            ),
            lower_bound_trials=int(
                _take(experiment, "lower_bound_trials", exp_base.lower_bound_trials)
            ),
            lock_threshold=float(
                _take(experiment, "lock_threshold_rad", exp_base.lock_threshold)
            ),
            repetitions=int(_take(experiment, "repetitions", exp_base.repetitions)),
        )
        _no_leftovers(experiment, "experiment")

        out = OutputConfig(
            directory=str(_take(output, "directory", base.output.directory)),
            emit_svg=bool(_take(output, "emit_svg", base.output.emit_svg)),
        )
        _no_leftovers(output, "output")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        beams=beams,
        trap=trap,
        drive=drive,
        noise=noise,
        electric_noise=electric,
        pipeline=pipe,
        experiment=exp,
        output=out,
        free_running_amplitude=free_amp,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data or {})


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)


def canonicalize(config: RunConfig) -> RunConfig:
    """One dict round trip, pinning parameters to their serialized values.

    Campaigns canonicalize on entry so a run and its record-driven re-run
    start from bit-identical parameters.
    """
    return config_from_dict(config_to_dict(config))


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
