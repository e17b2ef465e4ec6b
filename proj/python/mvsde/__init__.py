"""Path-dependent multivalued McKean-Vlasov SDE toolkit."""

from ._core import (
    Config,
    ConfigError,
    Error,
    __version__,
    deterministic_limit,
    experiment,
    load_config,
    parse_config,
    preset,
    preset_names,
    rate,
    resolvent,
    simulate,
    skeleton,
    w2,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "__version__",
    "deterministic_limit",
    "experiment",
    "load_config",
    "parse_config",
    "preset",
    "preset_names",
    "rate",
    "resolvent",
    "simulate",
    "skeleton",
    "w2",
]
