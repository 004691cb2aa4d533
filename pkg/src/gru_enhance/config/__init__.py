"""Configuration management.

Modules:
    settings: Config loading, overrides, validation, snapshots and builders
"""

from gru_enhance.config.settings import (
    CONFIG_SCHEMA,
    DEFAULT_CONFIG,
    RESOLVED_CONFIG_FILE,
    apply_overrides,
    arch_config,
    coerce_value,
    default_config,
    laec_config,
    load_config,
    mix_spec,
    save_config,
    stft_config,
    train_config,
    validate_config,
    write_snapshot,
)

__all__ = [
    # Settings
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
    # Builders
    "stft_config",
    "laec_config",
    "arch_config",
    "mix_spec",
    "train_config",
]
