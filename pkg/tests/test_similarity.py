import pytest

from tablesync.similarity import (
    key_similarity,
    levenshtein,
    normalized_edit_distance,
    token_dice,
    trigram_dice,
)


def test_token_dice_hand_computed():
    # {birth, date} vs {date, of, birth}: 2 * 2 / (2 + 3)
    assert token_dice("birth date", "date of birth") == pytest.approx(0.8)


def test_token_dice_disjoint():
    assert token_dice("born", "birth date") == 0.0


def test_trigram_backoff_used_when_tokens_disjoint():
    # "birthdate" and "birth date" share no tokens but plenty of trigrams.
    assert key_similarity("birthdate", "birth-date") > 0.5


def test_identical_keys_score_one():
    assert key_similarity("Birth Date", " birth  date: ") == 1.0


def test_trigram_dice_short_strings():
    assert trigram_dice("ab", "ab") == 1.0
    assert trigram_dice("ab", "cd") == 0.0


def test_levenshtein():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("same", "same") == 0


def test_normalized_edit_distance():
    assert normalized_edit_distance("", "") == 0.0
    assert normalized_edit_distance("abcd", "abce") == pytest.approx(0.25)
