"""Flat ``key = value`` configuration dialect.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
The same dialect serves pipeline configs, scene specs, and run manifests.
"""

from pathlib import Path

from .errors import ConfigError

_MISSING = object()

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class ConfigDict:
    """Parsed key/value pairs with typed, line-aware accessors."""

    def __init__(self, values: dict[str, str], lines: dict[str, int] | None = None):
        self._values = dict(values)
        self._lines = dict(lines or {})
        self._consumed: set[str] = set()

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def keys(self):
        return self._values.keys()

    def line_of(self, key: str) -> int | None:
        return self._lines.get(key)

    def _raw(self, key: str, default):
        if key in self._values:
            self._consumed.add(key)
            return self._values[key]
        if default is _MISSING:
            raise ConfigError(f"missing required key '{key}'")
        return default

    def get_str(self, key: str, default=_MISSING) -> str:
        value = self._raw(key, default)
        return value if isinstance(value, str) else value

    def get_int(self, key: str, default=_MISSING) -> int:
        value = self._raw(key, default)
        if not isinstance(value, str):
            return value
        try:
            return int(value)
        except ValueError:
            raise ConfigError(
                f"key '{key}': expected integer, got {value!r}", self.line_of(key)
            ) from None

    def get_float(self, key: str, default=_MISSING) -> float:
        value = self._raw(key, default)
        if not isinstance(value, str):
            return value
        try:
            return float(value)
        except ValueError:
            raise ConfigError(
                f"key '{key}': expected number, got {value!r}", self.line_of(key)
            ) from None

    def get_bool(self, key: str, default=_MISSING) -> bool:
        value = self._raw(key, default)
        if not isinstance(value, str):
            return value
        low = value.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(
            f"key '{key}': expected boolean, got {value!r}", self.line_of(key)
        )

    def get_pair(self, key: str, default=_MISSING) -> tuple[float, float]:
        value = self._raw(key, default)
        if not isinstance(value, str):
            return value
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 2:
            raise ConfigError(
                f"key '{key}': expected 'a, b' pair, got {value!r}", self.line_of(key)
            )
        try:
            return float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(
                f"key '{key}': expected numeric pair, got {value!r}", self.line_of(key)
            ) from None

    def get_quad(self, key: str, default=_MISSING) -> tuple[float, float, float, float]:
        value = self._raw(key, default)
        if not isinstance(value, str):
            return value
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 4:
            raise ConfigError(
                f"key '{key}': expected 'x, y, w, h' quad, got {value!r}",
                self.line_of(key),
            )
        try:
            return tuple(float(p) for p in parts)  # type: ignore[return-value]
        except ValueError:
            raise ConfigError(
                f"key '{key}': expected numeric quad, got {value!r}", self.line_of(key)
            ) from None

    def reject_unknown(self) -> None:
        """Raise if any parsed key was never consumed (typo protection)."""
        unknown = sorted(set(self._values) - self._consumed)
        if unknown:
            key = unknown[0]
            raise ConfigError(f"unknown key '{key}'", self.line_of(key))


def parse_config_text(text: str) -> ConfigDict:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", lineno)
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", lineno)
        values[key] = value
        lines[key] = lineno
    return ConfigDict(values, lines)


def parse_config_file(path) -> ConfigDict:
    return parse_config_text(Path(path).read_text())


def format_config(values: dict, header: str | None = None) -> str:
    """Render values back into the dialect (used for manifests)."""
    out = []
    if header:
        out.extend(f"# {line}" for line in header.splitlines())
    for key, value in values.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (tuple, list)):
            value = ", ".join(str(v) for v in value)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"
