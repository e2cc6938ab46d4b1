"""Regex-based whitelist/blacklist link filters for scoping in-depth crawls.

Rules hold a regular expression applied to the full URL string (unanchored
search).  A URL is crawled iff it matches at least one whitelist rule when
any whitelist rules exist, and matches no blacklist rule.  With zero rules
everything passes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class FilterError(ValueError):
    """Raised for rules whose pattern does not compile."""


@dataclass(frozen=True)
class LinkFilterRule:
    category: str  # "whitelist" | "blacklist"
    pattern: str
    _compiled: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.category not in ("whitelist", "blacklist"):
            raise FilterError(f"bad filter category {self.category!r}")
        try:
            object.__setattr__(self, "_compiled", re.compile(self.pattern))
        except re.error as exc:
            raise FilterError(f"bad filter pattern {self.pattern!r}: {exc}") from exc

    def matches(self, url: str) -> bool:
        return self._compiled.search(url) is not None


def apply_filters(url: str, rules: list[LinkFilterRule]) -> bool:
    """True iff ``url`` should be crawled under ``rules``."""
    whitelists = [r for r in rules if r.category == "whitelist"]
    if whitelists and not any(r.matches(url) for r in whitelists):
        return False
    return not any(r.matches(url) for r in rules if r.category == "blacklist")
