"""Prompt template assets: loading and slot filling."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template

# Template names, one file per pipeline or evaluation prompt.
TRANSLATE_TO_PIVOT = "translate_to_pivot"
TABLE_TO_KG = "table_to_kg"
MERGE_KGS = "merge_kgs"
KG_TO_TABLE = "kg_to_table"
TRANSLATE_FROM_PIVOT = "translate_from_pivot"
ALIGN = "align"
ALIGN_UPDATE = "align_update"
DIRECT = "direct"
DIRECT_DECOMPOSE = "direct_decompose"
EVALUATE = "evaluate"

# Distinctive phrases the deterministic stub keys on to recognize each prompt.
MARK_TRANSLATE = "provide only the translated table as the output"
MARK_TABLE_TO_KG = "convert the following table into a knowledge graph"
MARK_MERGE = "your task is to merge the graphs"
MARK_KG_TO_TABLE = "Now convert Knowledge Graph G to table G"
MARK_BACK_TRANSLATE = "Now translate the following table:"
MARK_ALIGN = "matching Table G keys with suitable Table A keys"
MARK_ALIGN_UPDATE = "you are given a set of alignments"
MARK_DIRECT = "Give more importance to the information in Table B"
MARK_DECOMPOSE = "Translate both tables to English."
MARK_EVALUATE = "Your comparison should result in four types of information"

# Instruction used for the joint align-update variant, where the model builds
# the alignments itself instead of receiving them.
SELF_ALIGN_INSTRUCTION = (
    "First create these alignments yourself by matching similar information "
    "between Table A and Table B, then apply the steps above using your own alignments."
)


@lru_cache(maxsize=None)
def template_text(name: str) -> str:
    return resources.files("tablesync.prompts").joinpath(f"{name}.txt").read_text("utf-8")


def fill(name: str, **slots: str) -> str:
    """Fill a template's named slots; unknown or missing slots raise KeyError."""
    return Template(template_text(name)).substitute(**slots)
