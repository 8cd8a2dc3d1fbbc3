"""Strategy lists: parsing LLM output and canonical formatting."""

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from .error import StrategyParseError

_LOGGER = logging.getLogger(__name__)

PROVENANCE_INITIAL = "initial"
PROVENANCE_MANUAL = "manual"

ITEM_RE = re.compile(r"^\s*(\d+)[.)]\s+(.*)$")
BULLET_RE = re.compile(r"^\s*[-*•]\s+")
BOLD_TITLE_RE = re.compile(r"^(\*\*|__)(.+?)\1\s*(.*)$")
EMPHASIS_RE = re.compile(r"\*\*|__")


def provenance_for_epoch(epoch: int) -> str:
    return f"dynamic_epoch({epoch})"


@dataclass(frozen=True)
class StrategyItem:
    title: str
    body: str = ""


@dataclass(frozen=True)
class StrategyList:
    """Ordered strategy items; version and provenance are bookkeeping and do not take part in equality."""

    items: tuple[StrategyItem, ...] = ()
    version: int = field(default=0, compare=False)
    provenance: str = field(default=PROVENANCE_MANUAL, compare=False)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def text(self) -> str:
        return format_for_prompt(self)

    def revised(self, version: int, provenance: str) -> "StrategyList":
        return replace(self, version=version, provenance=provenance)

    def to_dict(self) -> dict[str, Any]:
        return {
            "items": [{"title": item.title, "body": item.body} for item in self.items],
            "version": self.version,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StrategyList":
        return cls(
            items=tuple(StrategyItem(item["title"], item.get("body", "")) for item in data.get("items", [])),
            version=int(data.get("version", 0)),
            provenance=data.get("provenance", PROVENANCE_MANUAL),
        )

    @classmethod
    def of(cls, items: Iterable[tuple[str, str]], **kwargs) -> "StrategyList":
        return cls(items=tuple(StrategyItem(title, body) for title, body in items), **kwargs)


EMPTY_STRATEGIES = StrategyList()


def _clean(text: str) -> str:
    return " ".join(EMPHASIS_RE.sub("", text).split())


def _split_title(rest: str) -> tuple[str, str]:
    """Split the text after an item number into title and inline body."""
    rest = rest.strip()
    bold = BOLD_TITLE_RE.match(rest)
    if bold:
        title, remainder = bold.group(2), bold.group(3)
        remainder = remainder.lstrip(":").strip()
    elif rest.endswith(":"):
        title, remainder = rest[:-1], ""
    elif ": " in rest:
        title, remainder = rest.split(": ", 1)
    else:
        title, remainder = rest, ""
    title = _clean(title).rstrip(":").strip()
    remainder = BULLET_RE.sub("", remainder, count=1)
    return title, remainder


def parse_strategy_list(text: str) -> StrategyList:
    """
    Parse a numbered strategy list.

    Each "N." or "N)" line opens an item: a bold or colon-terminated lead is the title and the
    indented or bulleted lines that follow form the body. Text before the first item is ignored;
    after a blank line, an unindented line that is neither a bullet nor an item ends the list.
    """
    items: list[StrategyItem] = []
    title, body_parts = None, []
    after_blank = False

    def close() -> None:
        if title:
            items.append(StrategyItem(title=title, body=_clean(" ".join(body_parts))))

    for line in (text or "").splitlines():
        if not line.strip():
            after_blank = True
            continue
        match = ITEM_RE.match(line)
        if match:
            close()
            title, remainder = _split_title(match.group(2))
            body_parts = [remainder] if remainder else []
            after_blank = False
            continue
        if title is None:
            continue
        if after_blank and not line[:1].isspace() and not BULLET_RE.match(line):
            break
        body_parts.append(BULLET_RE.sub("", line.strip(), count=1))
        after_blank = False
    close()

    if not items:
        raise StrategyParseError(text)
    _LOGGER.debug("Parsed %d strategy items", len(items))
    return StrategyList(items=tuple(items))


def format_for_prompt(strategies: StrategyList) -> str:
    """Canonical numbered rendering, "N. <title>:" followed by an indented "- <body>" line."""
    blocks = []
    for number, item in enumerate(strategies.items, start=1):
        block = f"{number}. {item.title}:"
        if item.body:
            block += f"\n  - {item.body}"
        blocks.append(block)
    return "\n".join(blocks)
