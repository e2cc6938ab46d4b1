"""Content parser: plain text, title, links, and per-site metadata from raw HTML.

Built on the stdlib tolerant ``html.parser`` so malformed markup from forum
and marketplace pages never crashes the pipeline.  Boilerplate removal is
tag-based (script/style/nav/header/footer/aside are dropped), which keeps
extraction deterministic.  Link extraction lives here and is the single
canonical implementation used by both the parser and the crawler frontier.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urljoin

from .urlnorm import MalformedURL, canonical_url, url_host

logger = logging.getLogger(__name__)

VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}
DROP_TAGS = {"script", "style", "noscript", "template", "nav", "header", "footer", "aside", "title"}
BLOCK_TAGS = {
    "p", "div", "section", "article", "main", "figure", "figcaption",
    "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol", "dl", "dt", "dd",
    "table", "thead", "tbody", "tr", "td", "th", "blockquote", "pre",
    "form", "hr", "br",
}
HEADING_TAGS = ("h1", "h2", "h3", "h4", "h5", "h6")


class _Node:
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag: str, attrs: dict):
        self.tag = tag
        self.attrs = attrs
        self.children: list = []  # _Node or str


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("[root]", {})
        self._stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, dict(attrs))
        self._stack[-1].children.append(node)
        if tag not in VOID_TAGS:
            self._stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self._stack[-1].children.append(_Node(tag, dict(attrs)))

    def handle_endtag(self, tag):
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                return
        # stray close tag: ignore

    def handle_data(self, data):
        if data:
            self._stack[-1].children.append(data)


@dataclass
class ParsedPage:
    title: str = ""
    text: str = ""
    links: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    warning: bool = False


@dataclass(frozen=True)
class MetadataRule:
    """Extraction rule for one metadata field on matching domains.

    ``selector`` is either a small CSS-style selector (``tag``, ``.class``,
    ``#id``, ``tag.class``, and descendant chains of those) or, with an
    ``re:`` prefix, a regular expression applied to the decoded HTML whose
    first group (or whole match) is the value.
    """

    domain_pattern: str
    field_name: str
    selector: str
    post_process: str = "none"  # none | number | trimmed

    def __post_init__(self):
        re.compile(self.domain_pattern)
        if self.post_process not in ("none", "number", "trimmed"):
            raise ValueError(f"bad post_process {self.post_process!r}")
        if self.selector.startswith("re:"):
            re.compile(self.selector[3:])
        else:
            _parse_selector(self.selector)


def decode_html(raw: bytes) -> str:
    """Lossy decode; never raises."""
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace")


def looks_binary(raw: bytes) -> bool:
    return b"\x00" in raw[:4096]


def build_tree(raw) -> _Node:
    parser = _TreeBuilder()
    try:
        parser.feed(decode_html(raw))
        parser.close()
    except Exception:  # pragma: no cover - html.parser is already tolerant
        logger.warning("HTML parse aborted early; using partial tree")
    return parser.root


def _walk_text(node: _Node, blocks: list, buf: list) -> None:
    for child in node.children:
        if isinstance(child, str):
            buf.append(child)
            continue
        if child.tag in DROP_TAGS:
            continue
        is_block = child.tag in BLOCK_TAGS
        if is_block:
            _flush(blocks, buf)
        _walk_text(child, blocks, buf)
        if is_block:
            _flush(blocks, buf)
    return


def _flush(blocks: list, buf: list) -> None:
    chunk = re.sub(r"\s+", " ", "".join(buf)).strip()
    buf.clear()
    if chunk:
        blocks.append(chunk)


def _find_all(node: _Node, tag: str, out: list) -> None:
    for child in node.children:
        if isinstance(child, _Node):
            if child.tag == tag:
                out.append(child)
            _find_all(child, tag, out)


def _node_text(node: _Node) -> str:
    parts: list = []

    def rec(n):
        for c in n.children:
            if isinstance(c, str):
                parts.append(c)
            elif c.tag not in DROP_TAGS:
                rec(c)

    rec(node)
    return re.sub(r"\s+", " ", "".join(parts)).strip()


def extract_links(html, base_url: str) -> list[str]:
    """Canonical absolute http(s) URLs of anchor hrefs, deduplicated,
    document order preserved."""
    tree = build_tree(html)
    return links_from_tree(tree, base_url)


def links_from_tree(tree: _Node, base_url: str) -> list[str]:
    anchors: list = []
    _find_all(tree, "a", anchors)
    seen = set()
    links = []
    for a in anchors:
        href = a.attrs.get("href")
        if not href:
            continue
        try:
            url = canonical_url(urljoin(base_url, href.strip()))
        except (MalformedURL, ValueError):
            continue
        if url not in seen:
            seen.add(url)
            links.append(url)
    return links


def parse_html(raw, base_url: str) -> ParsedPage:
    """Extract title, visible text (paragraph breaks preserved), and links.

    Binary (non-HTML) payloads yield an empty page with the warning flag set.
    """
    if isinstance(raw, bytes) and looks_binary(raw):
        logger.warning("binary payload at %s; skipping text extraction", base_url)
        return ParsedPage(warning=True)
    tree = build_tree(raw)

    titles: list = []
    _find_all(tree, "title", titles)
    title = _node_text(titles[0]) if titles else ""
    if not title:
        for tag in HEADING_TAGS:
            headings: list = []
            _find_all(tree, tag, headings)
            if headings:
                title = _node_text(headings[0])
                if title:
                    break

    blocks: list = []
    buf: list = []
    _walk_text(tree, blocks, buf)
    _flush(blocks, buf)
    text = "\n".join(blocks)
    # entity-decoded markup may reintroduce "<tag"; the extracted text must
    # never contain anything tag-shaped
    text = re.sub(r"<(?=[A-Za-z])", "", text)

    return ParsedPage(title=title, text=text, links=links_from_tree(tree, base_url))


# -- metadata rules ----------------------------------------------------------

_SIMPLE_SEL = re.compile(r"^([a-zA-Z][a-zA-Z0-9-]*)?(?:([.#])([\w-]+))?$")


def _parse_selector(selector: str) -> list[tuple]:
    """Parse a descendant chain of simple selectors into (tag, kind, name)."""
    steps = []
    for part in selector.split():
        m = _SIMPLE_SEL.match(part)
        if not m or (m.group(1) is None and m.group(3) is None):
            raise ValueError(f"unsupported selector {selector!r}")
        steps.append((m.group(1), m.group(2), m.group(3)))
    if not steps:
        raise ValueError("empty selector")
    return steps


def _step_matches(node: _Node, step: tuple) -> bool:
    tag, kind, name = step
    if tag is not None and node.tag != tag.lower():
        return False
    if kind == ".":
        classes = (node.attrs.get("class") or "").split()
        return name in classes
    if kind == "#":
        return node.attrs.get("id") == name
    return True


def _select_first(tree: _Node, steps: list) -> _Node | None:
    def rec(node: _Node, remaining: list):
        for child in node.children:
            if not isinstance(child, _Node):
                continue
            if _step_matches(child, remaining[0]):
                if len(remaining) == 1:
                    return child
                found = rec(child, remaining[1:])
                if found is not None:
                    return found
            found = rec(child, remaining)
            if found is not None:
                return found
        return None

    return rec(tree, steps)


_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")


def extract_metadata(raw, base_url: str, rules: list[MetadataRule]) -> dict:
    """Apply every rule whose domain matches; absent matches are omitted."""
    host = url_host(base_url)
    html = None
    tree = None
    out: dict = {}
    for rule in rules:
        if not re.search(rule.domain_pattern, host) and not re.search(
            rule.domain_pattern, base_url
        ):
            continue
        try:
            if rule.selector.startswith("re:"):
                if html is None:
                    html = decode_html(raw)
                m = re.search(rule.selector[3:], html, re.DOTALL)
                if not m:
                    continue
                value = m.group(1) if m.groups() else m.group(0)
            else:
                if tree is None:
                    tree = build_tree(raw)
                node = _select_first(tree, _parse_selector(rule.selector))
                if node is None:
                    continue
                value = _node_text(node)
        except Exception as exc:
            logger.warning("metadata rule %s failed on %s: %s", rule.field_name, base_url, exc)
            continue
        if rule.post_process == "number":
            m = _NUMBER.search(value)
            if not m:
                continue
            value = m.group(0)
        elif rule.post_process == "trimmed":
            value = value.strip()
        if value:
            out[rule.field_name] = value
    return out
