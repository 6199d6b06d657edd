"""MediaWiki revision fetching and infobox extraction."""

from __future__ import annotations

import re
import time
from datetime import datetime, timezone

import requests

from .errors import NetworkError, NoInfobox, PageNotFound
from .tables import InfoTable, TableRow

DEFAULT_API_TEMPLATE = "https://{lang}.wikipedia.org/w/api.php"
USER_AGENT = "tablesync/0.1 (table synchronization research tooling)"

_INFOBOX_NAME = re.compile(r"\s*infobox\b", re.IGNORECASE)
_COMMENT = re.compile(r"<!--.*?-->", re.DOTALL)
_REF = re.compile(r"<ref[^>/]*/>|<ref[^>]*>.*?</ref>", re.DOTALL | re.IGNORECASE)
_LINK = re.compile(r"\[\[([^\]|]*)\|([^\]]*)\]\]|\[\[([^\]]*)\]\]")
_BOLD_ITALIC = re.compile(r"'{2,}")
_BREAK = re.compile(r"<br\s*/?>", re.IGNORECASE)


def _strip_markup(value: str) -> str:
    value = _COMMENT.sub("", value)
    value = _REF.sub("", value)
    value = _BREAK.sub(", ", value)
    value = _LINK.sub(lambda m: m.group(2) if m.group(2) is not None else (m.group(1) or m.group(3) or ""), value)
    value = _BOLD_ITALIC.sub("", value)
    return re.sub(r"\s+", " ", value).strip()


def _template_region(text: str, start: int) -> str:
    """Body between the opening and matching closing braces of a template."""
    depth = 0
    i = start
    n = len(text)
    while i < n - 1:
        pair = text[i : i + 2]
        if pair == "{{":
            depth += 1
            i += 2
            continue
        if pair == "}}":
            depth -= 1
            if depth == 0:
                return text[start + 2 : i]
            i += 2
            continue
        i += 1
    raise NoInfobox("unbalanced infobox template")


def _split_params(body: str) -> list[str]:
    """Split template body on pipes at top nesting level of {{ }} and [[ ]]."""
    parts: list[str] = []
    depth_braces = depth_links = 0
    current: list[str] = []
    i = 0
    n = len(body)
    while i < n:
        pair = body[i : i + 2]
        if pair == "{{":
            depth_braces += 1
            current.append(pair)
            i += 2
            continue
        if pair == "}}":
            depth_braces -= 1
            current.append(pair)
            i += 2
            continue
        if pair == "[[":
            depth_links += 1
            current.append(pair)
            i += 2
            continue
        if pair == "]]":
            depth_links -= 1
            current.append(pair)
            i += 2
            continue
        ch = body[i]
        if ch == "|" and depth_braces == 0 and depth_links == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
        i += 1
    parts.append("".join(current))
    return parts


def extract_infobox_rows(wikitext: str) -> tuple[tuple[TableRow, ...], tuple[str, ...]]:
    """Rows from the first infobox template's top-level named parameters.

    Values holding nested templates stay raw and are reported in the lint list.
    """
    search = 0
    while True:
        start = wikitext.find("{{", search)
        if start == -1:
            raise NoInfobox("no infobox template in wikitext")
        if _INFOBOX_NAME.match(wikitext, start + 2):
            break
        search = start + 2
    body = _template_region(wikitext, start)

    rows: list[TableRow] = []
    lints: list[str] = []
    for param in _split_params(body)[1:]:  # part 0 is the template name
        name, sep, raw = param.partition("=")
        name = name.strip()
        if not sep or not name:
            continue
        raw = raw.strip()
        if "{{" in raw:
            lints.append(f"nested template kept raw in {name!r}")
            value = re.sub(r"\s+", " ", _COMMENT.sub("", raw)).strip()
        else:
            value = _strip_markup(raw)
        rows.append(TableRow(name, value))
    return tuple(rows), tuple(lints)


class MediaWikiClient:
    """Action-API client fetching the infobox of a page revision at a timestamp."""

    def __init__(
        self,
        session: requests.Session | None = None,
        api_template: str = DEFAULT_API_TEMPLATE,
        min_interval_s: float = 1.0,
        timeout_s: float = 30.0,
    ) -> None:
        self.session = session or requests.Session()
        self.api_template = api_template
        self.min_interval_s = min_interval_s
        self.timeout_s = timeout_s
        self._last_request = 0.0

    def _throttle(self) -> None:
        wait = self.min_interval_s - (time.monotonic() - self._last_request)
        if wait > 0:
            time.sleep(wait)
        self._last_request = time.monotonic()

    def fetch_revision(
        self,
        title: str,
        lang: str,
        as_of: str | datetime,
        category: str = "Uncategorized",
    ) -> InfoTable:
        """Infobox of the latest revision at or before as_of, as an InfoTable."""
        if isinstance(as_of, datetime):
            as_of = as_of.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        params = {
            "action": "query",
            "format": "json",
            "formatversion": "2",
            "prop": "revisions",
            "titles": title,
            "rvprop": "ids|timestamp|content",
            "rvslots": "main",
            "rvlimit": "1",
            "rvdir": "older",
            "rvstart": as_of,
        }
        self._throttle()
        try:
            response = self.session.get(
                self.api_template.format(lang=lang),
                params=params,
                headers={"User-Agent": USER_AGENT},
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise NetworkError(f"wiki API request failed: {exc}") from exc

        pages = data.get("query", {}).get("pages", [])
        if not pages or pages[0].get("missing"):
            raise PageNotFound(f"{title!r} does not exist on {lang}.wikipedia")
        revisions = pages[0].get("revisions") or []
        if not revisions:
            raise PageNotFound(f"{title!r} has no revision at or before {as_of}")
        revision = revisions[0]
        content = revision.get("slots", {}).get("main", {}).get("content", "")
        rows, _ = extract_infobox_rows(content)
        tag = f"{revision.get('revid')}@{revision.get('timestamp')}"
        return InfoTable(title, lang, category, rows, revision_tag=tag)
