"""Deterministic offline backend: rule-driven responses for every prompt kind.

The stub recognizes each prompt by a template-specific marker phrase, extracts
the embedded tables or graphs, and answers with a pure function of the request
and the rule set, so whole runs are reproducible without any model access.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .alignment import greedy_key_matches
from .errors import NoTableFound
from .gateway import CompletionRequest
from .metrics import COMPARISON_KEYS, token_compare
from .tables import (
    KnowledgeGraph,
    TableRow,
    extract_candidates,
    flatten_kg,
    language_code,
    normalize_key,
    parse_kg,
    parse_table,
    serialize_kg,
    serialize_table,
    table_to_flat_kg,
)

LexiconPairs = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class StubRuleSet:
    """Rules driving the stub: phrase lexicons per language pair, canned
    responses matched by prompt substring, and optional merge fault injection.
    """

    lexicons: dict[tuple[str, str], LexiconPairs] = field(default_factory=dict)
    canned_responses: tuple[tuple[str, str], ...] = ()
    merge_drop_keys: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for pair, entries in self.lexicons.items():
            for src, tgt in entries:
                if not src or not tgt:
                    raise ValueError(f"empty lexicon entry in {pair}: {(src, tgt)!r}")
        object.__setattr__(
            self,
            "merge_drop_keys",
            frozenset(normalize_key(k) for k in self.merge_drop_keys),
        )

    @staticmethod
    def from_dir(path: str | Path, **kwargs) -> StubRuleSet:
        """Load `<src>-<tgt>.tsv` lexicon files (tab-separated phrase pairs)."""
        lexicons: dict[tuple[str, str], LexiconPairs] = {}
        for file in sorted(Path(path).glob("*-*.tsv")):
            src, tgt = file.stem.split("-", 1)
            entries: list[tuple[str, str]] = []
            for line in file.read_text("utf-8").splitlines():
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                left, _, right = line.partition("\t")
                entries.append((left.strip(), right.strip()))
            lexicons[(src, tgt)] = tuple(entries)
        return StubRuleSet(lexicons=lexicons, **kwargs)

    def lexicon(self, src: str, tgt: str) -> LexiconPairs:
        """Longest-source-first entries; empty when the pair is unknown."""
        entries = self.lexicons.get((src, tgt), ())
        return tuple(sorted(entries, key=lambda e: (-len(e[0]), e[0])))

    def with_inverses(self) -> StubRuleSet:
        """Add inverted lexicons for any pair missing its reverse direction."""
        lexicons = dict(self.lexicons)
        for (src, tgt), entries in self.lexicons.items():
            lexicons.setdefault((tgt, src), tuple((b, a) for a, b in entries))
        return StubRuleSet(lexicons, self.canned_responses, self.merge_drop_keys)


def translate_cells(rows, pairs: LexiconPairs) -> tuple[TableRow, ...]:
    """Phrase substitution over keys and values; longest source phrase first.

    Matches only at word boundaries, so a phrase embedded in a longer word
    (Ville in Villeneuve) is left alone.
    """

    def swap(text: str) -> str:
        for src, tgt in pairs:
            text = re.sub(rf"(?<!\w){re.escape(src)}(?!\w)", lambda _: tgt, text)
        return text

    return tuple(TableRow(swap(r.key), swap(r.value)) for r in rows)


def merge_graphs(
    a: KnowledgeGraph,
    b: KnowledgeGraph,
    drop_keys: frozenset[str] = frozenset(),
) -> KnowledgeGraph:
    """Path union of two graphs. Graph b wins leaf conflicts; sibling keys that
    normalize identically are merged under the first-seen spelling. Keys in
    drop_keys are silently omitted (fault injection for stage attribution)."""

    def merge_maps(map_a: dict, map_b: dict) -> dict:
        out: dict = {}
        spelling: dict[str, str] = {}

        def put(key: str, value, prefer: bool) -> None:
            norm = normalize_key(key)
            if norm in drop_keys:
                return
            if norm in spelling:
                kept = spelling[norm]
                existing = out[kept]
                if isinstance(existing, dict) and isinstance(value, dict):
                    out[kept] = merge_maps(existing, value)
                elif prefer:
                    out[kept] = value
            else:
                spelling[norm] = key
                out[key] = value

        for key, value in map_a.items():
            put(key, value, prefer=False)
        for key, value in map_b.items():
            put(key, value, prefer=True)
        return out

    return KnowledgeGraph(merge_maps(a.root, b.root))


def _payload_after(prompt: str, marker: str) -> str:
    index = prompt.index(marker)
    return prompt[index + len(marker) :]


def _table_after(prompt: str, marker: str) -> tuple[TableRow, ...]:
    return parse_table(_payload_after(prompt, marker))


def _kg_after(prompt: str, marker: str) -> KnowledgeGraph:
    return parse_kg(_payload_after(prompt, marker))


def _lang_code(name: str) -> str | None:
    try:
        return language_code(name.strip())
    except ValueError:
        return None


class StubBackend:
    """Pure offline completion backend: response = f(request, rules)."""

    def __init__(self, rules: StubRuleSet) -> None:
        self.rules = rules

    def complete(self, request: CompletionRequest, attempt: int) -> str:
        prompt = request.prompt
        for pattern, response in self.rules.canned_responses:
            if pattern in prompt:
                return response
        if prompts.MARK_BACK_TRANSLATE in prompt:
            return self._back_translate(prompt)
        if prompts.MARK_TRANSLATE in prompt:
            return self._translate(prompt)
        if prompts.MARK_TABLE_TO_KG in prompt:
            return self._table_to_kg(prompt)
        if prompts.MARK_MERGE in prompt:
            return self._merge(prompt)
        if prompts.MARK_KG_TO_TABLE in prompt:
            return self._kg_to_table(prompt)
        if prompts.MARK_ALIGN in prompt:
            return self._align(prompt)
        if prompts.MARK_ALIGN_UPDATE in prompt:
            return self._align_update(prompt)
        if prompts.MARK_DECOMPOSE in prompt:
            return self._decompose(prompt)
        if prompts.MARK_DIRECT in prompt:
            return self._direct(prompt)
        if prompts.MARK_EVALUATE in prompt:
            return self._evaluate(prompt)
        raise NoTableFound(f"stub cannot recognize prompt (tag={request.tag!r})")

    # stage simulations

    def _swap_rows(self, rows, src: str | None, tgt: str | None):
        if src is None or tgt is None or src == tgt:
            return tuple(rows)
        return translate_cells(rows, self.rules.lexicon(src, tgt))

    def _translate(self, prompt: str) -> str:
        head = re.search(r"Translate the following (.+?) table of Category .+? into (.+?),", prompt)
        rows = _table_after(prompt, "\nTable:\n")
        if head is None:
            return serialize_table(rows)
        rows = self._swap_rows(rows, _lang_code(head.group(1)), _lang_code(head.group(2)))
        return serialize_table(rows)

    def _back_translate(self, prompt: str) -> str:
        head = re.search(
            r"Translate the following (.+?) language table of Category .+? to (.+?)\.", prompt
        )
        rows = _table_after(prompt, prompts.MARK_BACK_TRANSLATE)
        if head is None:
            return serialize_table(rows)
        rows = self._swap_rows(rows, _lang_code(head.group(1)), _lang_code(head.group(2)))
        return serialize_table(rows)

    def _table_to_kg(self, prompt: str) -> str:
        rows = _table_after(prompt, "\nTable:\n")
        return serialize_kg(table_to_flat_kg(rows))

    def _merge(self, prompt: str) -> str:
        graph_a = _kg_after(prompt, "Graph A:")
        graph_b = _kg_after(prompt, "Graph B:")
        return serialize_kg(merge_graphs(graph_a, graph_b, self.rules.merge_drop_keys))

    def _kg_to_table(self, prompt: str) -> str:
        graph = _kg_after(prompt, "Knowledge Graph G:")
        return serialize_table(flatten_kg(graph))

    def _align(self, prompt: str) -> str:
        rows_a = _table_after(prompt, "Table A:")
        rows_g = _table_after(prompt, "Table G:")
        matches = greedy_key_matches([r.key for r in rows_a], [r.key for r in rows_g])
        return serialize_table(TableRow(a, g) for a, g in matches)

    def _parse_alignment_slot(self, prompt: str) -> list[tuple[list[str], list[str]]] | None:
        """Pairs from the filled alignments slot; None when the slot holds the
        self-align instruction instead of a list."""
        try:
            payload = _payload_after(prompt, "\nAlignments:\n")
        except ValueError:
            return None
        # The slot ends where the template resumes; the trailing output schema
        # must not be mistaken for an alignment list.
        payload = payload.split("\nProvide the updated Table A", 1)[0]
        candidate = next(iter(extract_candidates(payload, "[")), None)
        if not isinstance(candidate, list):
            return None
        sides: list[list[str]] = []
        for element in candidate:
            if not isinstance(element, list) or not all(isinstance(k, str) for k in element):
                return None
            sides.append(element)
        if len(sides) % 2:
            return None
        return [(sides[i], sides[i + 1]) for i in range(0, len(sides), 2)]

    def _align_update(self, prompt: str) -> str:
        rows_a = _table_after(prompt, "Table A :")
        rows_b = _table_after(prompt, "Table B :")
        pairs = self._parse_alignment_slot(prompt)
        if pairs is None:
            pairs = [([a], [b]) for a, b in greedy_key_matches(
                [r.key for r in rows_a], [r.key for r in rows_b]
            )]
        value_b = {normalize_key(r.key): r.value for r in rows_b}
        replacement: dict[str, str] = {}
        covered_b: set[str] = set()
        for left_keys, right_keys in pairs:
            for right in right_keys:
                covered_b.add(normalize_key(right))
            source_value = next(
                (value_b[normalize_key(r)] for r in right_keys if normalize_key(r) in value_b),
                None,
            )
            if source_value is None:
                continue
            for left in left_keys:
                replacement[normalize_key(left)] = source_value
        updated = [
            TableRow(r.key, replacement.get(normalize_key(r.key), r.value)) for r in rows_a
        ]
        updated.extend(r for r in rows_b if normalize_key(r.key) not in covered_b)
        return serialize_table(updated)

    def _direct(self, prompt: str) -> str:
        # Conservative single-prompt behavior: keep the source table as-is.
        rows_a = _table_after(prompt, "Table A :")
        return serialize_table(rows_a)

    def _decompose(self, prompt: str) -> str:
        head = re.search(r"Table A\(in (.+?), Category .+?\)", prompt)
        head_b = re.search(r"Table B\(in (.+?)\)", prompt)
        rows_a = _table_after(prompt, "Table A :")
        rows_b = _table_after(prompt, "Table B :")
        lang_a = _lang_code(head.group(1)) if head else None
        lang_b = _lang_code(head_b.group(1)) if head_b else None
        pivot = "en"
        rows_a = self._swap_rows(rows_a, lang_a, pivot)
        rows_b = self._swap_rows(rows_b, lang_b, pivot)
        merged: list[TableRow] = []
        by_norm: dict[str, int] = {}
        for row in rows_a:
            by_norm[normalize_key(row.key)] = len(merged)
            merged.append(row)
        for row in rows_b:
            norm = normalize_key(row.key)
            if norm in by_norm:  # reference value wins on shared keys
                merged[by_norm[norm]] = TableRow(merged[by_norm[norm]].key, row.value)
            else:
                merged.append(row)
        return serialize_table(self._swap_rows(merged, pivot, lang_a))

    def _evaluate(self, prompt: str) -> str:
        rows_1 = _table_after(prompt, "Table 1:")
        rows_2 = _table_after(prompt, "Table 2:")
        comparison = token_compare(
            rows_1[0] if rows_1 else None,
            rows_2[0] if rows_2 else None,
        )
        doc = dict(
            zip(COMPARISON_KEYS, (comparison.sct, comparison.scd, comparison.t1u, comparison.t2u))
        )
        return json.dumps({k: list(v) for k, v in doc.items()}, ensure_ascii=False, indent=2)
