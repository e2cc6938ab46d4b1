"""URL canonicalization and timestamp formatting shared across the pipeline.

Every component that touches URLs (frontier, store, link extraction) goes
through :func:`canonical_url` so that deduplication and document ids agree.
"""

from __future__ import annotations

import hashlib
from datetime import datetime, timezone
from urllib.parse import urlsplit, urlunsplit

DEFAULT_PORTS = {"http": 80, "https": 443}


class MalformedURL(ValueError):
    """Raised for URLs that are not syntactically valid absolute http(s) URLs."""


def canonical_url(url: str) -> str:
    """Canonicalize an absolute URL.

    Scheme and host are lowercased, default ports stripped, the fragment
    removed.  Path and query are preserved as given; an empty path becomes
    "/".  Raises :class:`MalformedURL` for anything that is not an absolute
    http(s) URL.
    """
    if not isinstance(url, str) or not url.strip():
        raise MalformedURL(f"empty or non-string URL: {url!r}")
    try:
        parts = urlsplit(url.strip())
    except ValueError as exc:
        raise MalformedURL(f"unparseable URL {url!r}: {exc}") from exc
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https"):
        raise MalformedURL(f"not an absolute http(s) URL: {url!r}")
    if not parts.netloc:
        raise MalformedURL(f"URL has no host: {url!r}")
    host = parts.hostname
    if host is None or host == "":
        raise MalformedURL(f"URL has no host: {url!r}")
    host = host.lower()
    try:
        port = parts.port
    except ValueError as exc:
        raise MalformedURL(f"bad port in URL {url!r}: {exc}") from exc
    netloc = host
    if port is not None and port != DEFAULT_PORTS.get(scheme):
        netloc = f"{host}:{port}"
    path = parts.path or "/"
    return urlunsplit((scheme, netloc, path, parts.query, ""))


def is_valid_url(url: str) -> bool:
    try:
        canonical_url(url)
        return True
    except MalformedURL:
        return False


def url_host(url: str) -> str:
    """Hostname (no port) of a canonical URL."""
    return urlsplit(url).hostname or ""


def rfc3339(ts: datetime) -> str:
    """Format a timestamp as RFC 3339 UTC with second precision and Z suffix.

    Naive datetimes are taken to be UTC.  Sub-second precision is dropped so
    that re-serialization is stable.
    """
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc).replace(microsecond=0)
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_rfc3339(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def utcnow_rfc3339() -> str:
    return rfc3339(datetime.now(timezone.utc))


def document_id(url: str, fetched_at: str) -> str:
    """Stable document id: sha256 over canonical URL concatenated with the
    RFC 3339 fetch timestamp, lowercase hex."""
    canon = canonical_url(url)
    digest = hashlib.sha256((canon + fetched_at).encode("utf-8")).hexdigest()
    return digest
