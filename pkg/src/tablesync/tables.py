"""Core data model: entity tables, knowledge graphs, and their prompt wire formats."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

from .errors import (
    EmptyKey,
    InvalidValue,
    MalformedRow,
    NoGraphFound,
    NoTableFound,
)

# ISO-639-1-style registry; extensible via register_language().
LANGUAGE_NAMES: dict[str, str] = {
    "af": "Afrikaans",
    "ar": "Arabic",
    "ceb": "Cebuano",
    "de": "German",
    "en": "English",
    "es": "Spanish",
    "fr": "French",
    "hi": "Hindi",
    "ko": "Korean",
    "nl": "Dutch",
    "ru": "Russian",
    "sv": "Swedish",
    "tr": "Turkish",
    "zh": "Chinese",
}

DEFAULT_CATEGORIES = (
    "Album",
    "Athlete",
    "City",
    "College",
    "Company",
    "Country",
    "Musician",
    "Person",
    "Stadium",
)

DEFAULT_PIVOT = "en"

_TERMINAL_PUNCT = ".,:;!?。、：؛؟"
_WS_RUN = re.compile(r"\s+")


def register_language(code: str, name: str) -> None:
    """Add a language to the registry. Codes must be nonempty lowercase."""
    if not code or code != code.lower() or not code.strip():
        raise ValueError(f"bad language code: {code!r}")
    LANGUAGE_NAMES[code] = name


def language_name(code: str) -> str:
    try:
        return LANGUAGE_NAMES[code]
    except KeyError:
        raise ValueError(f"unregistered language code: {code!r}") from None


def language_code(name: str) -> str:
    """Inverse lookup of language_name; exact English-name match."""
    for code, known in LANGUAGE_NAMES.items():
        if known == name:
            return code
    raise ValueError(f"unknown language name: {name!r}")


def normalize_key(text: str) -> str:
    """Canonical key form: NFC, trimmed, whitespace collapsed, lowercased,
    terminal punctuation stripped. Idempotent.

    A key consisting solely of punctuation keeps its (lowercased) text so the
    result is never empty for nonempty input.
    """
    out = unicodedata.normalize("NFC", text)
    out = _WS_RUN.sub(" ", out).strip().lower()
    if not out:
        raise EmptyKey(f"key normalizes to nothing: {text!r}")
    stripped = out.rstrip(_TERMINAL_PUNCT).rstrip()
    return stripped if stripped else out


@dataclass(frozen=True)
class TableRow:
    """One key-value row. Keys are stored trimmed; values verbatim."""

    key: str
    value: str

    def __post_init__(self) -> None:
        trimmed = self.key.strip()
        if not trimmed:
            raise EmptyKey("row key is empty")
        object.__setattr__(self, "key", trimmed)

    def as_pair(self) -> tuple[str, str]:
        return (self.key, self.value)


@dataclass(frozen=True)
class InfoTable:
    """An entity-centric key-value table tied to a language and category.

    Duplicate keys are preserved in order; duplicate_keys() flags them.
    """

    entity: str
    language: str
    category: str
    rows: tuple[TableRow, ...]
    revision_tag: str | None = None

    def __post_init__(self) -> None:
        if self.language not in LANGUAGE_NAMES:
            raise ValueError(f"unregistered language code: {self.language!r}")
        if not self.category.strip():
            raise ValueError("category is empty")
        object.__setattr__(self, "rows", tuple(self.rows))

    def keys(self) -> tuple[str, ...]:
        return tuple(row.key for row in self.rows)

    def normalized_keys(self) -> frozenset[str]:
        return frozenset(normalize_key(row.key) for row in self.rows)

    def row_for(self, norm_key: str) -> TableRow | None:
        """First row whose normalized key matches."""
        for row in self.rows:
            if normalize_key(row.key) == norm_key:
                return row
        return None

    def original_key(self, norm_key: str) -> str | None:
        row = self.row_for(norm_key)
        return row.key if row is not None else None

    def duplicate_keys(self) -> tuple[str, ...]:
        """Normalized keys occurring more than once, in first-seen order."""
        seen: dict[str, int] = {}
        for row in self.rows:
            norm = normalize_key(row.key)
            seen[norm] = seen.get(norm, 0) + 1
        return tuple(k for k, n in seen.items() if n > 1)

    def with_rows(self, rows) -> InfoTable:
        return InfoTable(self.entity, self.language, self.category, tuple(rows), self.revision_tag)

    def with_language(self, language: str) -> InfoTable:
        return InfoTable(self.entity, language, self.category, self.rows, self.revision_tag)


# A knowledge-graph value is text, a list of values, or a nested map.
KGValue = str | list["KGValue"] | dict[str, "KGValue"]


def _check_kg_value(value, path: str) -> None:
    if isinstance(value, str):
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            _check_kg_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str) or not key.strip():
                raise InvalidValue(f"empty or non-text key under {path!r}")
            _check_kg_value(item, f"{path}.{key}")
        return
    raise InvalidValue(f"unsupported value of type {type(value).__name__} at {path!r}")


@dataclass(frozen=True)
class KnowledgeGraph:
    """Nested attribute tree: text leaves, lists, and maps. Treat as immutable."""

    root: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.root, dict):
            raise InvalidValue("graph root must be a map")
        _check_kg_value(self.root, "$")

    @property
    def is_empty(self) -> bool:
        return not self.root

    def leaves(self) -> tuple[str, ...]:
        """All text leaves in depth-first order."""
        out: list[str] = []

        def walk(value) -> None:
            if isinstance(value, str):
                out.append(value)
            elif isinstance(value, list):
                for item in value:
                    walk(item)
            else:
                for item in value.values():
                    walk(item)

        walk(self.root)
        return tuple(out)


@dataclass(frozen=True)
class SyncInstance:
    """A (source, reference, gold) triple over one entity.

    Source is outdated and shares its language with gold; the reference is
    current but in a different language.
    """

    source: InfoTable
    reference: InfoTable
    gold: InfoTable

    def __post_init__(self) -> None:
        if self.source.language != self.gold.language:
            raise ValueError("source and gold must share a language")
        if self.source.language == self.reference.language:
            raise ValueError("source and reference must differ in language")
        if not (self.source.entity == self.reference.entity == self.gold.entity):
            raise ValueError("all three tables must describe the same entity")
        if not (self.source.category == self.reference.category == self.gold.category):
            raise ValueError("all three tables must share a category")


# ---------------------------------------------------------------------------
# Wire formats. Tables travel as a list of ["key","value"] pairs, graphs as a
# nested map. Model output may surround the payload with chatter; extraction
# takes the first balanced candidate that validates.
# ---------------------------------------------------------------------------

_ESCAPES = {"'": "'", '"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


class _Unbalanced(Exception):
    """Internal: candidate did not parse as a balanced value."""


def _skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i] in " \t\r\n":
        i += 1
    return i


def _parse_string(text: str, i: int) -> tuple[str, int]:
    quote = text[i]
    i += 1
    out: list[str] = []
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n:
            nxt = text[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
            else:
                out.append(ch + nxt)  # unknown escape kept verbatim
            i += 2
            continue
        if ch == quote:
            return "".join(out), i + 1
        out.append(ch)
        i += 1
    raise _Unbalanced("unterminated string")


def _parse_bare(text: str, i: int) -> tuple[str, int]:
    start = i
    n = len(text)
    while i < n and text[i] not in ",]}: \t\r\n":
        i += 1
    if i == start:
        raise _Unbalanced("empty token")
    return text[start:i], i


def _parse_value(text: str, i: int) -> tuple[object, int]:
    i = _skip_ws(text, i)
    if i >= len(text):
        raise _Unbalanced("end of input")
    ch = text[i]
    if ch in "\"'":
        return _parse_string(text, i)
    if ch == "[":
        return _parse_list(text, i)
    if ch == "{":
        return _parse_map(text, i)
    return _parse_bare(text, i)


def _parse_list(text: str, i: int) -> tuple[list, int]:
    items: list = []
    i = _skip_ws(text, i + 1)
    if i < len(text) and text[i] == "]":
        return items, i + 1
    while True:
        value, i = _parse_value(text, i)
        items.append(value)
        i = _skip_ws(text, i)
        if i >= len(text):
            raise _Unbalanced("unterminated list")
        if text[i] == ",":
            i = _skip_ws(text, i + 1)
            if i < len(text) and text[i] == "]":  # trailing comma tolerated
                return items, i + 1
            continue
        if text[i] == "]":
            return items, i + 1
        raise _Unbalanced(f"unexpected {text[i]!r} in list")


def _parse_map(text: str, i: int) -> tuple[dict, int]:
    items: dict = {}
    i = _skip_ws(text, i + 1)
    if i < len(text) and text[i] == "}":
        return items, i + 1
    while True:
        i = _skip_ws(text, i)
        if i >= len(text):
            raise _Unbalanced("unterminated map")
        if text[i] in "\"'":
            key, i = _parse_string(text, i)
        else:
            key, i = _parse_bare(text, i)
        i = _skip_ws(text, i)
        if i >= len(text) or text[i] != ":":
            raise _Unbalanced("missing ':' in map")
        value, i = _parse_value(text, i + 1)
        items[key] = value
        i = _skip_ws(text, i)
        if i >= len(text):
            raise _Unbalanced("unterminated map")
        if text[i] == ",":
            i = _skip_ws(text, i + 1)
            if i < len(text) and text[i] == "}":
                return items, i + 1
            continue
        if text[i] == "}":
            return items, i + 1
        raise _Unbalanced(f"unexpected {text[i]!r} in map")


def extract_candidates(text: str, opener: str):
    """Yield every balanced value parsed from each occurrence of opener, left to right."""
    parser = _parse_list if opener == "[" else _parse_map
    for i, ch in enumerate(text):
        if ch != opener:
            continue
        try:
            value, _ = parser(text, i)
        except _Unbalanced:
            continue
        yield value


def _rows_from_candidate(candidate: list) -> tuple[TableRow, ...]:
    rows: list[TableRow] = []
    for element in candidate:
        if not isinstance(element, list) or len(element) != 2:
            raise MalformedRow(f"element is not a 2-list: {element!r}")
        key, value = element
        if not isinstance(key, str) or not isinstance(value, str):
            raise MalformedRow(f"element is not a pair of text: {element!r}")
        rows.append(TableRow(key, value))
    return tuple(rows)


def parse_table(text: str) -> tuple[TableRow, ...]:
    """Extract the first balanced list of ["key","value"] pairs from text.

    Surrounding chatter is ignored. Raises NoTableFound when no balanced list
    exists, MalformedRow when balanced lists exist but none is a pair list.
    """
    malformed: MalformedRow | None = None
    for candidate in extract_candidates(text, "["):
        try:
            return _rows_from_candidate(candidate)
        except (MalformedRow, EmptyKey) as exc:
            if malformed is None:
                malformed = exc if isinstance(exc, MalformedRow) else MalformedRow(str(exc))
    if malformed is not None:
        raise malformed
    raise NoTableFound("no balanced list-of-pairs candidate")


def parse_kg(text: str) -> KnowledgeGraph:
    """Extract the first balanced nested map from text; same discipline as parse_table."""
    invalid: InvalidValue | None = None
    for candidate in extract_candidates(text, "{"):
        try:
            return KnowledgeGraph(candidate)
        except InvalidValue as exc:
            if invalid is None:
                invalid = exc
    if invalid is not None:
        raise invalid
    raise NoGraphFound("no balanced nested-map candidate")


def escape_text(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("'", "\\'")


def serialize_table(rows) -> str:
    """Emit the list-of-pairs schema with backslash-escaped quotes.

    Accepts an InfoTable or an iterable of TableRow; parse_table round-trips it.
    """
    if isinstance(rows, InfoTable):
        rows = rows.rows
    rows = tuple(rows)
    if not rows:
        return "[]"
    lines = ",\n".join(f'    ["{escape_text(r.key)}","{escape_text(r.value)}"]' for r in rows)
    return f"[\n{lines}\n]"


def _write_kg_value(value, indent: int) -> str:
    pad = "  " * indent
    if isinstance(value, str):
        return f'"{escape_text(value)}"'
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(isinstance(item, str) for item in value):
            return "[" + ", ".join(f'"{escape_text(item)}"' for item in value) + "]"
        inner = ",\n".join(pad + "  " + _write_kg_value(item, indent + 1) for item in value)
        return f"[\n{inner}\n{pad}]"
    if not value:
        return "{}"
    inner = ",\n".join(
        f'{pad}  "{escape_text(key)}": {_write_kg_value(item, indent + 1)}'
        for key, item in value.items()
    )
    return f"{{\n{inner}\n{pad}}}"


def serialize_kg(kg: KnowledgeGraph) -> str:
    """Emit the nested-map document; parse_kg round-trips it."""
    return _write_kg_value(kg.root, 0)


def flatten_kg(kg: KnowledgeGraph, path_sep: str = " - ", list_sep: str = ", ") -> tuple[TableRow, ...]:
    """Deterministic flattening: nested maps join path segments, scalar lists join values."""
    rows: list[TableRow] = []

    def walk(path: list[str], value) -> None:
        if isinstance(value, str):
            rows.append(TableRow(path_sep.join(path), value))
            return
        if isinstance(value, list):
            if all(isinstance(item, str) for item in value):
                rows.append(TableRow(path_sep.join(path), list_sep.join(value)))
                return
            for i, item in enumerate(value):
                walk(path + [f"#{i}"], item)
            return
        for key, item in value.items():
            walk(path + [key], item)

    for key, value in kg.root.items():
        walk([key], value)
    return tuple(rows)


def table_to_flat_kg(rows) -> KnowledgeGraph:
    """Lossless flat graph of a row list; duplicate keys become list leaves."""
    if isinstance(rows, InfoTable):
        rows = rows.rows
    root: dict = {}
    for row in rows:
        if row.key in root:
            existing = root[row.key]
            if isinstance(existing, list):
                existing.append(row.value)
            else:
                root[row.key] = [existing, row.value]
        else:
            root[row.key] = row.value
    return KnowledgeGraph(root)
