"""String similarity primitives for key matching."""

from __future__ import annotations

from .tables import normalize_key


def token_dice(a: str, b: str) -> float:
    """Dice coefficient over whitespace-token sets."""
    ta, tb = set(a.split()), set(b.split())
    if not ta or not tb:
        return 0.0
    return 2.0 * len(ta & tb) / (len(ta) + len(tb))


def trigrams(text: str) -> frozenset[str]:
    if len(text) < 3:
        return frozenset((text,)) if text else frozenset()
    return frozenset(text[i : i + 3] for i in range(len(text) - 2))


def trigram_dice(a: str, b: str) -> float:
    ga, gb = trigrams(a), trigrams(b)
    if not ga or not gb:
        return 0.0
    return 2.0 * len(ga & gb) / (len(ga) + len(gb))


def key_similarity(a: str, b: str) -> float:
    """Token-set Dice over normalized keys, character-trigram backoff when disjoint."""
    na, nb = normalize_key(a), normalize_key(b)
    if na == nb:
        return 1.0
    score = token_dice(na, nb)
    return score if score > 0.0 else trigram_dice(na, nb)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        current = [i + 1]
        for j, cb in enumerate(b):
            current.append(min(previous[j + 1] + 1, current[j] + 1, previous[j] + (ca != cb)))
        previous = current
    return previous[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest
