"""Configuration management for gru-enhance.

Configs are INI files with sections [stft] [data] [model] [objectives]
[train] [laec] [eval]. Values are read over DEFAULT_CONFIG, coerced by
CONFIG_SCHEMA and validated; command-line overrides win over the file.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, Tuple, Union

from gru_enhance.dsp.core import StftConfig
from gru_enhance.errors import ConfigError
from gru_enhance.laec.canceller import LaecConfig
from gru_enhance.mixgen.manifest import CLIP_CACHE_SIZE
from gru_enhance.mixgen.mixer import DNS_TEST_SNR_RANGE_DB, MAX_DELAY_MS
from gru_enhance.mixgen.sampler import MixSpec
from gru_enhance.neuralnet.model import ARCH_PRESETS, ArchConfig, arch_from_name
from gru_enhance.objectives.losses import LossMode, ProjectionMode
from gru_enhance.pipeline import CHANNELS_BY_TASK, TASKS
from gru_enhance.trainer.loop import TrainConfig

RESOLVED_CONFIG_FILE = "resolved.ini"

DEFAULT_CONFIG: dict[str, dict[str, Any]] = {
    "stft": {
        "fft_size": 512,
        "hop": 256,
        "window": "hann",
    },
    "data": {
        "task": "DNS",  # DNS, AEC, AEC_LAEC
        "speech_dir": "",
        "noise_dir": "",
        "manifest": "",
        "seed": 0,
        "duration_s": 10.0,
        "snr_low_db": -5.0,
        "snr_high_db": 10.0,
        "esr_low_db": -5.0,
        "esr_high_db": 10.0,
        "max_delay_ms": MAX_DELAY_MS,
        "aec_noise_snr_db": None,
        "test_snr_low_db": DNS_TEST_SNR_RANGE_DB[0],
        "test_snr_high_db": DNS_TEST_SNR_RANGE_DB[1],
        "test_count": 50,
        "workers": 4,
        "clip_cache": CLIP_CACHE_SIZE,
    },
    "model": {
        "arch": "GRU-256",  # GRU-512, GRU-256, GRU-320, custom
        "hidden": 0,  # 0 keeps the preset width
        "ffn_hidden": 0,
    },
    "objectives": {
        "loss": LossMode.VAD_INTERPRETED.value,
        "projection": ProjectionMode.PER_BIN_COMPLEX.value,
        "vad_threshold_db": -40.0,
    },
    "train": {
        "lr": 1e-3,
        "lr_decay": 0.98,
        "steps_per_epoch": 1000,
        "batch": 8,
        "seq_seconds": 10.0,
        "steps": 1000,
        "grad_clip_norm": 5.0,
        "checkpoint_every": 500,
        "validate_every": 500,
        "val_items": 16,
    },
    "laec": {
        "filter_taps_per_block": 256,
        "blocks": 36,
        "step_size": 0.5,
        "regularization": 1e-6,
        "delay_search_ms": 500.0,
        "double_talk_ratio": 2.0,
        "divergence_ratio": 4.0,
        "align_margin_samples": 64,
        "prealign": True,
    },
    "eval": {
        "mode": "passthrough",
        "oracle_projection": ProjectionMode.PER_BIN_COMPLEX.value,
        "workers": 4,
    },
}

EVAL_MODES = {"passthrough", "laec_only", "model", "oracle"}

# Format: section -> key -> (expected_types, validator_func or None)
# validator_func takes value and returns (is_valid, error_message)
ValidatorFunc = Callable[[Any], Tuple[bool, str]]


def _one_of(choices: Iterable[str]) -> ValidatorFunc:
    allowed = sorted(choices)
    return lambda v: (True, "") if v in allowed else (False, f"must be one of: {', '.join(allowed)}")


def _at_least(low: float) -> ValidatorFunc:
    return lambda v: (True, "") if v >= low else (False, f"must be >= {low}")


def _between(low: float, high: float) -> ValidatorFunc:
    return lambda v: (True, "") if low <= v <= high else (False, f"must be between {low} and {high}")


_POSITIVE: ValidatorFunc = lambda v: (True, "") if v > 0 else (False, "must be positive")  # noqa: E731

CONFIG_SCHEMA: dict[str, dict[str, tuple[tuple, Optional[ValidatorFunc]]]] = {
    "stft": {
        "fft_size": (
            (int,),
            lambda v: (True, "") if v > 0 and not v & (v - 1) else (False, "must be a power of two"),
        ),
        "hop": ((int,), _POSITIVE),
        "window": ((str,), None),
    },
    "data": {
        "task": ((str,), _one_of(TASKS)),
        "speech_dir": ((str,), None),
        "noise_dir": ((str,), None),
        "manifest": ((str,), None),
        "seed": ((int,), _at_least(0)),
        "duration_s": ((int, float), _POSITIVE),
        "snr_low_db": ((int, float), None),
        "snr_high_db": ((int, float), None),
        "esr_low_db": ((int, float), None),
        "esr_high_db": ((int, float), None),
        "max_delay_ms": ((int,), _between(0, MAX_DELAY_MS)),
        "aec_noise_snr_db": ((int, float, type(None)), None),
        "test_snr_low_db": ((int, float), None),
        "test_snr_high_db": ((int, float), None),
        "test_count": ((int,), _at_least(0)),
        "workers": ((int,), _at_least(1)),
        "clip_cache": ((int,), _at_least(0)),
    },
    "model": {
        "arch": ((str,), _one_of([*ARCH_PRESETS, "custom"])),
        "hidden": ((int,), _at_least(0)),
        "ffn_hidden": ((int,), _at_least(0)),
    },
    "objectives": {
        "loss": ((str,), _one_of(m.value for m in LossMode)),
        "projection": ((str,), _one_of(m.value for m in ProjectionMode)),
        "vad_threshold_db": (
            (int, float),
            lambda v: (True, "") if v <= 0 else (False, "must be <= 0 dB"),
        ),
    },
    "train": {
        "lr": ((int, float), _POSITIVE),
        "lr_decay": ((int, float), lambda v: (True, "") if 0 < v <= 1 else (False, "must be in (0, 1]")),
        "steps_per_epoch": ((int,), _at_least(1)),
        "batch": ((int,), _at_least(1)),
        "seq_seconds": ((int, float), _POSITIVE),
        "steps": ((int,), _at_least(0)),
        "grad_clip_norm": ((int, float), _at_least(0)),
        "checkpoint_every": ((int,), _at_least(1)),
        "validate_every": ((int,), _at_least(0)),
        "val_items": ((int,), _at_least(0)),
    },
    "laec": {
        "filter_taps_per_block": ((int,), _at_least(1)),
        "blocks": ((int,), _at_least(1)),
        "step_size": ((int, float), lambda v: (True, "") if 0 < v < 2 else (False, "must be in (0, 2)")),
        "regularization": ((int, float), _at_least(0)),
        "delay_search_ms": ((int, float), _between(0, MAX_DELAY_MS)),
        "double_talk_ratio": ((int, float), _POSITIVE),
        "divergence_ratio": ((int, float), _POSITIVE),
        "align_margin_samples": ((int,), _at_least(0)),
        "prealign": ((bool,), None),
    },
    "eval": {
        "mode": ((str,), _one_of(EVAL_MODES)),
        "oracle_projection": ((str,), _one_of(m.value for m in ProjectionMode)),
        "workers": ((int,), _at_least(1)),
    },
}

_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


def default_config() -> dict[str, dict[str, Any]]:
    """A fresh copy of DEFAULT_CONFIG."""
    return {section: dict(values) for section, values in DEFAULT_CONFIG.items()}


def coerce_value(section: str, key: str, raw: str) -> Any:
    """Convert one textual value to the type the schema expects.

    Raises:
        ConfigError: Unknown key or unparseable value.
    """
    try:
        types, _ = CONFIG_SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"Unknown config key: '{section}.{key}'") from None
    text = raw.strip()
    if type(None) in types and text.lower() in ("", "none", "null"):
        return None
    if bool in types:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(f"'{section}.{key}' must be a boolean, got {raw!r}")
    if int in types:
        try:
            return int(text)
        except ValueError:
            if float not in types:
                raise ConfigError(f"'{section}.{key}' must be an integer, got {raw!r}") from None
    if float in types:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"'{section}.{key}' must be a number, got {raw!r}") from None
    return text


def validate_config(config: dict) -> List[str]:
    """Validate configuration against schema.

    Args:
        config: Nested section -> key -> value dictionary.

    Returns:
        List of validation error messages. Empty list if valid.
    """
    errors = []

    for section, values in config.items():
        if section not in CONFIG_SCHEMA:
            errors.append(f"Unknown config section: '{section}'")
            continue
        for key in values:
            if key not in CONFIG_SCHEMA[section]:
                errors.append(f"Unknown config key: '{section}.{key}'")

    for section, keys in CONFIG_SCHEMA.items():
        values = config.get(section, {})
        for key, (expected_types, validator) in keys.items():
            if key not in values:
                continue
            value = values[key]
            # bool is an int subclass; only accept it where declared
            if not isinstance(value, expected_types) or (
                isinstance(value, bool) and bool not in expected_types
            ):
                type_names = " or ".join(t.__name__ for t in expected_types)
                errors.append(
                    f"'{section}.{key}' has invalid type: expected {type_names}, got {type(value).__name__}"
                )
                continue
            if validator and value is not None:
                is_valid, error_msg = validator(value)
                if not is_valid:
                    errors.append(f"'{section}.{key}' {error_msg}")

    data = config.get("data", {})
    for low, high in (("snr_low_db", "snr_high_db"), ("esr_low_db", "esr_high_db"),
                      ("test_snr_low_db", "test_snr_high_db")):
        lo, hi = data.get(low), data.get(high)
        if isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and lo > hi:
            errors.append(f"'data.{low}' must not exceed 'data.{high}'")

    return errors


def _check(config: dict) -> dict:
    errors = validate_config(config)
    if errors:
        raise ConfigError("Invalid configuration", details="; ".join(errors))
    return config


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> dict:
    """Load a config file over the defaults and apply overrides.

    Args:
        path: INI file; None uses the defaults alone.
        overrides: "section.key=value" strings, applied after the file.

    Returns:
        Validated nested configuration dictionary.

    Raises:
        ConfigError: Missing or unreadable file, unknown keys, bad values.
    """
    config = default_config()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except (configparser.Error, UnicodeDecodeError) as e:
            raise ConfigError(f"Cannot parse {path}", details=str(e)) from e
        for section in parser.sections():
            if section not in CONFIG_SCHEMA:
                raise ConfigError(f"Unknown config section: '{section}' in {path}")
            for key, raw in parser.items(section):
                config[section][key] = coerce_value(section, key, raw)
    return _check(apply_overrides(config, overrides))


def apply_overrides(config: dict, overrides: Iterable[str]) -> dict:
    """Apply "section.key=value" overrides to a copy of config.

    Raises:
        ConfigError: Malformed override or unknown key.
    """
    result = {section: dict(values) for section, values in config.items()}
    for item in overrides:
        name, sep, raw = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(
                f"Malformed override {item!r}", suggestion="Use --set section.key=value, e.g. --set train.lr=0.0005"
            )
        result.setdefault(section, {})[key] = coerce_value(section, key, raw)
    return result


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def save_config(config: dict, path: Union[str, Path]) -> Path:
    """Write the resolved configuration as INI.

    Reloading the file with load_config yields the same dictionary.
    """
    parser = configparser.ConfigParser(interpolation=None)
    for section in CONFIG_SCHEMA:
        parser[section] = {k: _format(v) for k, v in config.get(section, {}).items()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        parser.write(f)
    return path


def write_snapshot(config: dict, out_dir: Union[str, Path]) -> Path:
    """Write resolved.ini into an output directory."""
    return save_config(config, Path(out_dir) / RESOLVED_CONFIG_FILE)


# Builders from a resolved config to component parameters


def stft_config(config: dict) -> StftConfig:
    s = config["stft"]
    return StftConfig(fft_size=s["fft_size"], hop=s["hop"], window=s["window"])


def laec_config(config: dict) -> LaecConfig:
    return LaecConfig(**config["laec"])


def arch_config(config: dict) -> ArchConfig:
    """Network shape for the configured task; custom widths come from [model].hidden."""
    m = config["model"]
    task = config["data"]["task"]
    overrides: dict[str, Any] = {"output_bins": stft_config(config).bins}
    if m["arch"] == "custom":
        overrides["channels"] = CHANNELS_BY_TASK[task]
        overrides["hidden"] = m["hidden"] or ARCH_PRESETS["GRU-256"].hidden
    elif m["hidden"]:
        overrides["hidden"] = m["hidden"]
    if m["ffn_hidden"]:
        overrides["ffn_hidden"] = m["ffn_hidden"]
    return arch_from_name(m["arch"], **overrides)


def mix_spec(config: dict, test: bool = False) -> MixSpec:
    """Mixing parameters for training (test=False) or test-set synthesis."""
    d = config["data"]
    snr = (d["test_snr_low_db"], d["test_snr_high_db"]) if test else (d["snr_low_db"], d["snr_high_db"])
    return MixSpec(
        task="DNS" if d["task"] == "DNS" else "AEC",
        snr_range_db=(float(snr[0]), float(snr[1])),
        esr_range_db=(float(d["esr_low_db"]), float(d["esr_high_db"])),
        max_delay_ms=d["max_delay_ms"],
        seed=d["seed"],
        duration_s=float(d["duration_s"]),
        aec_noise_snr_db=d["aec_noise_snr_db"],
    )


def train_config(config: dict) -> TrainConfig:
    """TrainConfig for the configured task, architecture and objective."""
    d, t, o = config["data"], config["train"], config["objectives"]
    return TrainConfig(
        task=d["task"],
        arch=arch_config(config),
        loss=o["loss"],
        projection=o["projection"],
        vad_threshold_db=float(o["vad_threshold_db"]),
        seed=d["seed"],
        workers=d["workers"],
        snr_range_db=(float(d["snr_low_db"]), float(d["snr_high_db"])),
        esr_range_db=(float(d["esr_low_db"]), float(d["esr_high_db"])),
        aec_noise_snr_db=d["aec_noise_snr_db"],
        stft=stft_config(config),
        laec=laec_config(config),
        max_delay_ms=d["max_delay_ms"],
        **t,
    )


__all__ = [
    "DEFAULT_CONFIG",
    "CONFIG_SCHEMA",
    "RESOLVED_CONFIG_FILE",
    "default_config",
    "coerce_value",
    "validate_config",
    "load_config",
    "apply_overrides",
    "save_config",
    "write_snapshot",
    "stft_config",
    "laec_config",
    "arch_config",
    "mix_spec",
    "train_config",
]
