"""Sectioned ``key=value`` text format shared by feeder and scenario files.

Grammar::

    document := (blank | comment | header | record)*
    header   := "[" name "]"
    record   := field (WS field)*
    field    := key "=" value
    comment  := "#" <anything to end of line>

Keys are case-insensitive identifiers, values are whitespace-free tokens.
Records outside a section are a syntax error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_HEADER = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class FormatError(ValueError):
    """Raised on malformed or semantically invalid input documents."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass
class Record:
    line: int
    fields: dict[str, str] = field(default_factory=dict)

    def text(self, key: str, default: str | None = None) -> str:
        if key in self.fields:
            return self.fields[key]
        if default is not None:
            return default
        raise FormatError("missing required field", self.line, key)

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.fields:
            if default is not None:
                return float(default)
            raise FormatError("missing required field", self.line, key)
        raw = self.fields[key]
        try:
            value = float(raw)
        except ValueError:
            raise FormatError(f"not a number: {raw!r}", self.line, key) from None
        if value != value or value in (float("inf"), float("-inf")):
            raise FormatError(f"not a finite number: {raw!r}", self.line, key)
        return value

    def check_keys(self, allowed: set[str]) -> None:
        for key in self.fields:
            if key not in allowed:
                raise FormatError("unknown field", self.line, key)


def parse_sections(text: str, known: set[str] | None = None) -> dict[str, list[Record]]:
    """Split a document into ``{section: [Record, ...]}``."""
    sections: dict[str, list[Record]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = _HEADER.match(line)
            if m is None:
                raise FormatError(f"malformed section header {line!r}", lineno)
            current = m.group(1).lower()
            if known is not None and current not in known:
                raise FormatError(f"unknown section [{current}]", lineno)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise FormatError("record outside of any section", lineno)
        rec = Record(lineno)
        for token in line.split():
            key, sep, value = token.partition("=")
            if not sep or not value or not _KEY.match(key):
                raise FormatError(f"expected key=value, got {token!r}", lineno)
            key = key.lower()
            if key in rec.fields:
                raise FormatError("duplicate field", lineno, key)
            rec.fields[key] = value
        sections[current].append(rec)
    return sections
