"""Scenario files: flat ``section.key = value`` text with units in the key names.

Lines are read with python-dotenv's stream parser, which keeps the source
line of every binding so that errors can point at it.
"""

import io
import math
import re
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from dotenv.parser import parse_stream
from pydantic import ValidationError

from app.core.exceptions import ScenarioParseError, ScenarioValidationError
from app.core.logging import logger
from app.models.schemas import (
    Attack,
    Detection,
    ExtinctionModel,
    LinkGeometry,
    NoiseModel,
    ProtocolConfig,
    Scenario,
    SweepSpec,
    TurbulenceInputs,
)
from app.services.beam_optics import check_tx_aperture


# -----------------------------------------------------
# Value converters
# -----------------------------------------------------
_POWER = re.compile(r"^\s*(\d+(?:\.\d*)?)\s*\^\s*([+-]?\d+)\s*$")


def _number(text: str) -> float:
    """Float, also accepting ``b^e`` (e.g. 2^-33)."""
    match = _POWER.match(text)
    if match:
        return float(match.group(1)) ** int(match.group(2))
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN is not a valid input")
    return value


def _integer(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text}")
    return int(value)


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text}")


def _scaled(factor: float) -> Callable[[str], float]:
    return lambda text: _number(text) * factor


def _curvature(text: str) -> Optional[float]:
    if text.strip().lower() in ("collimated", "inf", "infinity", "none"):
        return None
    return _number(text)


def _word(text: str) -> str:
    return text.strip().lower()


# key -> (section, field, converter)
KEYS: Dict[str, Tuple[str, str, Callable[[str], Any]]] = {
    "geometry.wavelength_nm": ("geometry", "wavelength", _scaled(1e-9)),
    "geometry.z_m": ("geometry", "z", _number),
    "geometry.altitude_m": ("geometry", "altitude", _number),
    "geometry.w0_m": ("geometry", "w0", _number),
    "geometry.curvature_m": ("geometry", "curvature", _curvature),
    "geometry.tx_aperture_m": ("geometry", "tx_aperture", _number),
    "geometry.rx_aperture_m": ("geometry", "rx_aperture", _number),
    "extinction.alpha0_per_m": ("extinction", "alpha0", _number),
    "extinction.scale_height_m": ("extinction", "scale_height", _number),
    "turbulence.cn2": ("turbulence", "cn2", _number),
    "turbulence.hv_a": ("turbulence", "hv_a", _number),
    "turbulence.wind_ms": ("turbulence", "wind", _number),
    "turbulence.pointing_rad": ("turbulence", "pointing_jitter", _number),
    "noise.sky_brightness": ("noise", "sky_brightness", _number),
    "noise.filter_nm": ("noise", "filter_nm", _number),
    "noise.gate_ns": ("noise", "gate", _scaled(1e-9)),
    "noise.fov_sr": ("noise", "fov", _number),
    "noise.eta_eff": ("noise", "eta_eff", _number),
    "noise.n_ex": ("noise", "n_ex", _number),
    "noise.n_background": ("noise", "n_background_override", _number),
    "protocol.N": ("protocol", "N", _number),
    "protocol.m": ("protocol", "m", _number),
    "protocol.d": ("protocol", "d", _integer),
    "protocol.beta": ("protocol", "beta", _number),
    "protocol.p_ec": ("protocol", "p_ec", _number),
    "protocol.eps_s": ("protocol", "eps_s", _number),
    "protocol.eps_h": ("protocol", "eps_h", _number),
    "protocol.eps_cor": ("protocol", "eps_cor", _number),
    "protocol.eps_pe": ("protocol", "eps_pe", _number),
    "protocol.f_et": ("protocol", "f_et", _number),
    "protocol.d_T": ("protocol", "d_T", _number),
    "protocol.d_R": ("protocol", "d_R", _number),
    "protocol.detection": ("protocol", "detection", _word),
    "protocol.pilot": ("protocol", "pilot", _boolean),
    "protocol.estimated_parameters": ("protocol", "estimated_parameters", _integer),
    "protocol.trusted_setup": ("scenario", "trusted_setup", _boolean),
    "protocol.mu_max": ("protocol", "mu_max", _number),
    "protocol.strategy": ("protocol", "strategy", _word),
    "protocol.slots": ("protocol", "slots", _integer),
    "general.p_ec": ("general", "p_ec", _number),
    "general.eps_s": ("general", "eps_s", _number),
    "general.eps_h": ("general", "eps_h", _number),
    "general.eps_cor": ("general", "eps_cor", _number),
    "general.eps_pe": ("general", "eps_pe", _number),
    "general.f_et": ("general", "f_et", _number),
    "general.d_T": ("general", "d_T", _number),
    "general.d_R": ("general", "d_R", _number),
    "general.eps_prime_max": ("general", "eps_prime_max", _number),
    "sweep.variable": ("sweep", "variable", str.strip),
    "sweep.start": ("sweep", "start", _number),
    "sweep.stop": ("sweep", "stop", _number),
    "sweep.points": ("sweep", "points", _integer),
    "sweep.scale": ("sweep", "scale", _word),
    "oracle.samples": ("scenario", "oracle_samples", _integer),
    "output.path": ("scenario", "output_path", str.strip),
    "preset": ("scenario", "preset", _word),
}


# -----------------------------------------------------
# Presets (link parameters of the night/day reference links)
# -----------------------------------------------------
_COMMON_PRESET: Dict[str, str] = {
    "geometry.wavelength_nm": "800",
    "geometry.z_m": "200",
    "geometry.altitude_m": "30",
    "geometry.w0_m": "0.05",
    "geometry.curvature_m": "collimated",
    "geometry.rx_aperture_m": "0.05",
    "extinction.alpha0_per_m": "5e-6",
    "extinction.scale_height_m": "6600",
    "turbulence.pointing_rad": "1e-6",
    "noise.filter_nm": "1",
    "noise.gate_ns": "10",
    "noise.fov_sr": "1e-10",
    "noise.eta_eff": "0.5",
    "noise.n_ex": "0",
    "protocol.N": "5e7",
    "protocol.m": "7.5e6",
    "protocol.d": "32",
    "protocol.beta": "0.98",
    "protocol.p_ec": "0.9",
    "protocol.eps_s": "2^-33",
    "protocol.eps_h": "2^-33",
    "protocol.eps_cor": "2^-33",
    "protocol.eps_pe": "2^-33",
    "protocol.detection": "het",
    "protocol.pilot": "true",
    "general.p_ec": "0.1",
    "general.eps_s": "1e-43",
    "general.eps_h": "1e-43",
    "general.eps_cor": "1e-43",
    "general.eps_pe": "1e-43",
    "general.f_et": "0.9",
    "general.eps_prime_max": "2.4e-10",
    "sweep.variable": "z",
    "sweep.start": "50",
    "sweep.stop": "1000",
    "sweep.points": "20",
    "sweep.scale": "linear",
}

PRESETS: Dict[str, Dict[str, str]] = {
    "night": {
        **_COMMON_PRESET,
        "turbulence.hv_a": "1.7e-14",
        "turbulence.wind_ms": "21",
        "noise.sky_brightness": "1e-6",
        "sweep.stop": "1300",
    },
    "day": {
        **_COMMON_PRESET,
        "turbulence.hv_a": "2.75e-14",
        "turbulence.wind_ms": "57",
        "noise.sky_brightness": "0.1",
    },
}


def preset_text(name: str) -> str:
    """key = value rendering of a preset, loadable as a scenario file."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset '{name}' (available: {', '.join(sorted(PRESETS))})")
    lines = [f"# preset: {name}"] + [f"{key} = {value}" for key, value in PRESETS[name].items()]
    return "\n".join(lines) + "\n"


# -----------------------------------------------------
# Parsing
# -----------------------------------------------------
def _leading(text: str) -> int:
    return len(text) - len(text.lstrip())


def _error_column(line_text: str) -> int:
    """1-based column of the first character the key = value grammar rejects."""
    body = line_text.rstrip("\r\n")
    start = _leading(body)
    if "=" not in body:
        match = re.match(r"[^=#\s]*\s*", body[start:])
        return start + (match.end() if match else 0) + 1
    after = body.index("=") + 1
    for offset, char in enumerate(body[after:]):
        if char in "'\"":
            return after + offset + 1
    return after + 1


def _value_column(line_text: str, raw: str) -> int:
    eq = line_text.find("=")
    pos = line_text.find(raw, eq + 1 if eq >= 0 else 0)
    return (pos if pos >= 0 else max(eq + 1, 0)) + 1


def _read_bindings(text: str) -> List[Tuple[str, str, int, str]]:
    """(key, value, line, line_text) for every binding, in file order."""
    out: List[Tuple[str, str, int, str]] = []
    for binding in parse_stream(io.StringIO(text)):
        line_text = binding.original.string
        # a binding may start on a blank/comment line and begin later
        offset = 0
        for piece in line_text.splitlines():
            if piece.strip() and not piece.strip().startswith("#"):
                line_text = piece
                break
            offset += 1
        line = binding.original.line + offset

        if binding.error:
            raise ScenarioParseError("malformed line (expected key = value)", line, _error_column(line_text))
        if binding.key is None:
            continue
        if binding.value is None:
            raise ScenarioParseError(f"missing '=' after key '{binding.key}'", line, _error_column(line_text))
        out.append((binding.key, binding.value, line, line_text))
    return out


def _collect(bindings: List[Tuple[str, str, int, str]]) -> Dict[str, Dict[str, Any]]:
    sections: Dict[str, Dict[str, Any]] = {
        name: {} for name in ("geometry", "extinction", "turbulence", "noise", "protocol", "general", "sweep", "scenario")
    }
    for key, raw, line, line_text in bindings:
        if key not in KEYS:
            raise ScenarioParseError(f"unknown key '{key}'", line, _leading(line_text) + 1)
        section, field, convert = KEYS[key]
        try:
            sections[section][field] = convert(raw)
        except (TypeError, ValueError) as err:
            raise ScenarioParseError(f"bad value for '{key}': {err}", line, _value_column(line_text, raw)) from err
    return sections


def _expand_preset(bindings: List[Tuple[str, str, int, str]]) -> List[Tuple[str, str, int, str]]:
    """Prepend preset bindings so that explicit keys override them."""
    preset = None
    for key, raw, line, line_text in bindings:
        if key == "preset":
            preset = raw.strip().lower()
            if preset not in PRESETS:
                raise ScenarioParseError(
                    f"unknown preset '{raw}' (available: {', '.join(sorted(PRESETS))})",
                    line,
                    _value_column(line_text, raw),
                )
    if preset is None:
        return bindings
    expanded = [(key, value, 0, f"{key} = {value}") for key, value in PRESETS[preset].items()]
    return expanded + bindings


def _build(sections: Dict[str, Dict[str, Any]]) -> Scenario:
    geometry = LinkGeometry(**sections["geometry"])
    noise = NoiseModel(rx_aperture=geometry.rx_aperture, **sections["noise"])
    protocol = ProtocolConfig(**sections["protocol"])

    warnings: List[str] = []
    general = None
    if sections["general"] and protocol.detection != Detection.HET:
        warnings.append("general-attack column skipped: it needs heterodyne detection")
    elif sections["general"]:
        merged = {**protocol.model_dump(), **sections["general"], "attack": Attack.GENERAL}
        general = ProtocolConfig(**merged)

    message = check_tx_aperture(geometry)
    if message:
        warnings.append(message)

    return Scenario(
        geometry=geometry,
        extinction=ExtinctionModel(**sections["extinction"]),
        turbulence=TurbulenceInputs(**sections["turbulence"]),
        noise=noise,
        protocol=protocol,
        general=general,
        sweep=SweepSpec(**sections["sweep"]),
        warnings=warnings,
        **sections["scenario"],
    )


def parse_scenario_text(text: str) -> Scenario:
    bindings = _expand_preset(_read_bindings(text))
    sections = _collect(bindings)
    try:
        scenario = _build(sections)
    except ValidationError as err:
        raise ScenarioValidationError(_format_validation(err)) from err
    except TypeError as err:
        raise ScenarioValidationError(str(err)) from err

    logger.info(
        f"scenario loaded: preset={scenario.preset or '-'}, sweep {scenario.sweep.variable} "
        f"{scenario.sweep.start:g}..{scenario.sweep.stop:g} ({scenario.sweep.points} points)"
    )
    return scenario


def _format_validation(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        where = ".".join(str(p) for p in item.get("loc", ()))
        parts.append(f"{where}: {item.get('msg')}" if where else str(item.get("msg")))
    return "; ".join(parts)


def load_scenario(path: str) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise ScenarioParseError(f"{path} is not UTF-8 text: {err}") from err
    except OSError as err:
        raise ScenarioParseError(f"cannot read scenario {path}: {err}") from err
    return parse_scenario_text(text)


# -----------------------------------------------------
# Sweep expansion
# -----------------------------------------------------
def sweep_values(spec: SweepSpec) -> np.ndarray:
    if spec.points == 1:
        values = np.array([spec.start], dtype=float)
    elif spec.scale == "log":
        values = np.geomspace(spec.start, spec.stop, spec.points)
    else:
        values = np.linspace(spec.start, spec.stop, spec.points)

    if spec.variable == "M":
        values = np.round(values)
    return values
