"""Crawl configuration file: a documented key-value text format.

One ``key = value`` pair per line, ``#`` comments, blank lines ignored.
List-valued keys (``seeds``, ``whitelist``, ``blacklist``,
``metadata_rules``) repeat, once per element; a trailing ``[]`` on the key
name is accepted and ignored.  ``metadata_rules`` values pack four
pipe-separated fields: ``domain | field | selector | post``.
"""

from __future__ import annotations

from pathlib import Path

from .classify import ClassifierModel
from .cookies import import_cookies
from .crawl import CrawlConfig, CrawlConfigError
from .filters import FilterError, LinkFilterRule
from .htmltext import MetadataRule

LIST_KEYS = {"seeds", "whitelist", "blacklist", "metadata_rules"}
SCALAR_KEYS = {
    "profile", "model_path", "politeness_ms", "max_depth", "max_pages",
    "socks_proxy", "cookie_jar", "user_agent", "respect_robots",
    "parse_interval", "workers",
}


class ConfigError(Exception):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Raw key -> value (or list) mapping; unknown keys are rejected."""
    raw: dict = {key: [] for key in LIST_KEYS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip().removesuffix("[]")
        value = value.strip()
        if key in LIST_KEYS:
            if value:
                raw[key].append(value)
        elif key in SCALAR_KEYS:
            raw[key] = value
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    return raw


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from exc


def _parse_metadata_rule(value: str) -> MetadataRule:
    parts = [p.strip() for p in value.split("|")]
    if len(parts) not in (3, 4):
        raise ConfigError(
            f"metadata_rules entries need 'domain | field | selector [| post]', got {value!r}")
    post = parts[3] if len(parts) == 4 else "none"
    try:
        return MetadataRule(domain_pattern=parts[0], field_name=parts[1],
                            selector=parts[2], post_process=post)
    except ValueError as exc:
        raise ConfigError(f"bad metadata rule {value!r}: {exc}") from exc


def build_crawl_config(raw: dict, base_dir=None, overrides: dict | None = None) -> CrawlConfig:
    """Materialize a CrawlConfig from a raw mapping.

    Relative model/cookie paths resolve against ``base_dir`` (the config
    file's directory); ``overrides`` (CLI flags) win over file values.
    """
    raw = dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in LIST_KEYS and not value:
            continue
        raw[key] = value

    if not raw.get("profile"):
        raise ConfigError("missing config key: profile")
    base = Path(base_dir) if base_dir else Path(".")

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    filters = []
    try:
        for pattern in raw.get("whitelist", []):
            filters.append(LinkFilterRule("whitelist", pattern))
        for pattern in raw.get("blacklist", []):
            filters.append(LinkFilterRule("blacklist", pattern))
    except FilterError as exc:
        raise ConfigError(str(exc)) from exc

    classifier = None
    model_path = raw.get("model_path")
    if model_path:
        path = resolve(model_path)
        if not path.exists():
            raise ConfigError(f"model_path does not exist: {path}")
        classifier = ClassifierModel.load(path)

    cookie_jar = None
    jar_path = raw.get("cookie_jar")
    if jar_path:
        path = resolve(jar_path)
        if not path.exists():
            raise ConfigError(f"cookie_jar does not exist: {path}")
        cookie_jar = import_cookies(path)

    config = CrawlConfig(
        profile=raw["profile"],
        seeds=list(raw.get("seeds", [])),
        filters=filters,
        classifier=classifier,
        politeness_delay=_parse_int(raw.get("politeness_ms", "1000"), "politeness_ms") / 1000.0,
        max_depth=_parse_int(raw.get("max_depth", "10"), "max_depth"),
        max_pages=_parse_int(raw.get("max_pages", "1000"), "max_pages"),
        proxy=raw.get("socks_proxy") or None,
        cookie_jar=cookie_jar,
        user_agent=raw.get("user_agent") or "ctiharvest/0.1",
        respect_robots=(_parse_bool(raw["respect_robots"], "respect_robots")
                        if raw.get("respect_robots") else None),
        parse_interval=_parse_int(raw.get("parse_interval", "100"), "parse_interval"),
        metadata_rules=[_parse_metadata_rule(v) for v in raw.get("metadata_rules", [])],
        workers=_parse_int(raw.get("workers", "1"), "workers"),
    )
    try:
        config.validate()
    except CrawlConfigError as exc:
        raise ConfigError(str(exc)) from exc
    return config
