"""Experiment configuration files.

Configurations are TOML documents with these top-level keys:

=================  ==========================================  ===========
key                meaning                                     default
=================  ==========================================  ===========
``mode``           one of :data:`MODES`                        (required)
``n``              blocklength(s)                              mode-specific
``power``          per-user power(s) P                         ``[1.0]``
``eps``            target error probability(ies)               ``[0.1]``
``messages``       message count(s) M per user                 mode-specific
``users``          number(s) of users K                        ``[1]``
``trials``         Monte Carlo trials per point (per k)        ``100000``
``seed``           master seed (unsigned 64-bit)               ``0``
``out``            output CSV path                             none
``c0``             constant added to the rate expansions       ``0.0``
``inner_samples``  inner draws for the joint RCU terms         ``256``
=================  ==========================================  ===========

Grid keys (``n``, ``power``, ``eps``, ``messages``, ``users``) accept a scalar
or a list; the grid is their Cartesian product.  Every problem in a document
is collected and reported together, each prefixed with its key path.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from ..dispersion import MAX_USERS
from ..errors import ConfigError

MODES = ("rates-mac", "rates-rac", "simulate-mac", "simulate-rac", "verify")
GRID_KEYS = ("n", "power", "eps", "messages", "users")
SCALAR_KEYS = ("mode", "trials", "seed", "out", "c0", "inner_samples")
KNOWN_KEYS = GRID_KEYS + SCALAR_KEYS

DEFAULT_TRIALS = 100_000
DEFAULT_INNER = 256

# grid keys each mode needs; the others are optional or ignored
REQUIRED = {
    "rates-mac": ("n",),
    "rates-rac": (),
    "simulate-mac": ("n", "messages"),
    "simulate-rac": (),
    "verify": (),
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    n: tuple[int, ...] = ()
    power: tuple[float, ...] = (1.0,)
    eps: tuple[float, ...] = (0.1,)
    messages: tuple[int, ...] = ()
    users: tuple[int, ...] = (1,)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    out: str | None = None
    c0: float = 0.0
    inner_samples: int = DEFAULT_INNER
    extra: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(float(v))


def _grid(doc, key, check, errors, convert):
    if key not in doc:
        return None
    raw = doc[key]
    values = raw if isinstance(raw, list) else [raw]
    if not values:
        errors.append(f"{key}: grid is empty")
        return None
    out = []
    for i, v in enumerate(values):
        path = f"{key}[{i}]" if isinstance(raw, list) else key
        msg = check(v)
        if msg:
            errors.append(f"{path}: {msg}")
        else:
            out.append(convert(v))
    return tuple(out)


def _check_n(v):
    if not _is_int(v):
        return f"expected integer, got {type(v).__name__}"
    if v < 2:
        return "blocklength must be at least 2"
    return None


def _check_power(v):
    if not _is_num(v):
        return f"expected number, got {type(v).__name__}"
    if v <= 0:
        return "power must be positive"
    return None


def _check_eps(v):
    if not _is_num(v):
        return f"expected number, got {type(v).__name__}"
    if not 0 < v < 1:
        return "probability out of range (0, 1)"
    return None


def _check_messages(v):
    if not _is_int(v):
        return f"expected integer, got {type(v).__name__}"
    if v < 1:
        return "message count must be at least 1"
    return None


def _check_users(v):
    if not _is_int(v):
        return f"expected integer, got {type(v).__name__}"
    if not 1 <= v <= MAX_USERS:
        return f"user count must lie in 1..{MAX_USERS}"
    return None


def validate(doc: dict) -> ExperimentConfig:
    """Check a decoded document and build the configuration, or raise :class:`ConfigError`."""
    errors: list[str] = []
    for key in doc:
        if key not in KNOWN_KEYS:
            errors.append(f"{key}: unknown key")

    mode = doc.get("mode")
    if mode is None:
        errors.append("mode: missing")
    elif not isinstance(mode, str) or mode not in MODES:
        errors.append(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
        mode = None

    n = _grid(doc, "n", _check_n, errors, int)
    power = _grid(doc, "power", _check_power, errors, float)
    eps = _grid(doc, "eps", _check_eps, errors, float)
    messages = _grid(doc, "messages", _check_messages, errors, int)
    users = _grid(doc, "users", _check_users, errors, int)

    trials = doc.get("trials", DEFAULT_TRIALS)
    if not _is_int(trials) or trials < 1:
        errors.append("trials: expected a positive integer")
    seed = doc.get("seed", 0)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        errors.append("seed: expected an integer in [0, 2^64)")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        errors.append("out: expected a string path")
    c0 = doc.get("c0", 0.0)
    if not _is_num(c0):
        errors.append("c0: expected a finite number")
    inner = doc.get("inner_samples", DEFAULT_INNER)
    if not _is_int(inner) or inner < 1:
        errors.append("inner_samples: expected a positive integer")

    if mode is not None:
        for key in REQUIRED[mode]:
            if key not in doc:
                errors.append(f"{key}: required for mode {mode}")
        if mode in ("rates-rac", "simulate-rac") and "n" not in doc and "messages" not in doc:
            errors.append(f"messages: {mode} needs messages (or n as the last decoding time)")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        mode=mode,
        n=n or (),
        power=power or (1.0,),
        eps=eps or (0.1,),
        messages=messages or (),
        users=users or (1,),
        trials=int(trials),
        seed=int(seed),
        out=out,
        c0=float(c0),
        inner_samples=int(inner),
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML configuration.

    Duplicate keys are rejected by the TOML grammar itself, so a document can
    never silently keep only the last value.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"<document>: {exc}"]) from None
    return validate(doc)


def load_config(path) -> ExperimentConfig:
    """Read ``path`` as UTF-8 and parse it.  I/O errors propagate as ``OSError``."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError([f"<document>: not valid UTF-8 ({exc})"]) from None
    return parse_config(text)
