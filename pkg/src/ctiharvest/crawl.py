"""Frontier-driven crawl loop with three operating profiles.

focused  - clear web; a trained classifier decides which fetched pages are
           harvested and which pages' outlinks grow the frontier.
in_depth - social web forums; every filter-passing page is harvested and
           parsed in batches after a configurable interval.
dark     - like in_depth but all traffic goes through a SOCKS5 proxy and
           session cookies replay a manual login.
"""

from __future__ import annotations

import logging
import threading
import urllib.robotparser
from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import urlsplit

from .classify import ClassifierModel, classify
from .fetch import DEFAULT_BODY_CAP, DEFAULT_TIMEOUT, Fetcher
from .filters import LinkFilterRule, apply_filters
from .frontier import Frontier
from .htmltext import MetadataRule, extract_links, extract_metadata, parse_html
from .store import DocumentRecord, DocumentStore
from .urlnorm import url_host

logger = logging.getLogger(__name__)

PROFILES = ("focused", "in_depth", "dark")
PROFILE_SOURCE_CLASS = {"focused": "clear", "in_depth": "social", "dark": "dark"}


class CrawlConfigError(Exception):
    pass


@dataclass
class CrawlConfig:
    profile: str
    seeds: list
    filters: list = field(default_factory=list)  # LinkFilterRule
    classifier: Optional[ClassifierModel] = None
    politeness_delay: float = 1.0  # seconds between fetches to one host
    max_depth: int = 10
    max_pages: int = 1000
    proxy: Optional[str] = None  # SOCKS5 host:port
    cookie_jar: object = None
    user_agent: str = "ctiharvest/0.1"
    respect_robots: Optional[bool] = None  # default depends on profile
    parse_interval: int = 100
    metadata_rules: list = field(default_factory=list)  # MetadataRule
    body_cap: int = DEFAULT_BODY_CAP
    timeout: float = DEFAULT_TIMEOUT
    workers: int = 1

    def validate(self) -> None:
        if self.profile not in PROFILES:
            raise CrawlConfigError(f"unknown profile {self.profile!r}")
        if not self.seeds:
            raise CrawlConfigError("no seeds configured")
        if self.profile == "focused" and self.classifier is None:
            raise CrawlConfigError("focused profile requires a classifier model")
        if self.profile == "dark" and not self.proxy:
            raise CrawlConfigError("dark profile requires a SOCKS proxy")
        if self.max_pages < 1:
            raise CrawlConfigError("max_pages must be >= 1")

    def robots_enabled(self) -> bool:
        if self.respect_robots is not None:
            return self.respect_robots
        return self.profile != "dark"


@dataclass
class CrawlReport:
    pages_fetched: int = 0
    pages_harvested: int = 0
    frontier_seen: int = 0
    per_host: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    failed_urls: list = field(default_factory=list)
    robots_skipped: int = 0
    harvest_ratio: float = 0.0

    def to_json(self) -> dict:
        return {
            "pages_fetched": self.pages_fetched,
            "pages_harvested": self.pages_harvested,
            "frontier_seen": self.frontier_seen,
            "harvest_ratio": self.harvest_ratio,
            "per_host": dict(sorted(self.per_host.items())),
            "failures": dict(sorted(self.failures.items())),
            "failed_urls": self.failed_urls,
            "robots_skipped": self.robots_skipped,
        }


class _Crawl:
    def __init__(self, config: CrawlConfig, store: DocumentStore):
        config.validate()
        self.config = config
        self.store = store
        self.frontier = Frontier(politeness_delay=config.politeness_delay)
        self.fetcher = Fetcher(
            user_agent=config.user_agent,
            timeout=config.timeout,
            body_cap=config.body_cap,
            proxy=config.proxy if config.profile == "dark" else None,
            cookie_jar=config.cookie_jar,
        )
        self.report = CrawlReport()
        self.source_class = PROFILE_SOURCE_CLASS[config.profile]
        self.robots: dict = {}
        self.unparsed: list = []
        self._lock = threading.Lock()
        self._budget = config.max_pages

    # -- budget --------------------------------------------------------------

    def _take_budget(self) -> bool:
        with self._lock:
            if self._budget <= 0:
                return False
            self._budget -= 1
            return True

    def _return_budget(self) -> None:
        with self._lock:
            self._budget += 1

    # -- robots ----------------------------------------------------------------

    def _robots_for(self, url: str):
        """Fetch robots.txt through the same politeness gate; one per host."""
        host = url_host(url)
        if host in self.robots:
            return self.robots[host]
        parts = urlsplit(url)
        result = self.fetcher.fetch(f"{parts.scheme}://{parts.netloc}/robots.txt")
        parser = None
        if result.ok:
            parser = urllib.robotparser.RobotFileParser()
            parser.parse(result.raw_html.decode("utf-8", "replace").splitlines())
        self.robots[host] = parser
        return parser

    # -- page handling ---------------------------------------------------------

    def _store_page(self, result, text: str, title: str, metadata: dict,
                    classifier_score: Optional[float], parsed: bool) -> str:
        record = DocumentRecord(
            url=result.final_url,
            source_class=self.source_class,
            fetched_at=result.fetched_at,
            raw_html=result.raw_html,
            text=text,
            title=title,
            metadata=metadata,
            classifier_score=classifier_score,
            status="parsed" if parsed else "fetched",
        )
        return self.store.put_document(record)

    def _enqueue_links(self, links: list, depth: int, parent: str) -> None:
        if depth > self.config.max_depth:
            return
        for link in links:
            if apply_filters(link, self.config.filters):
                self.frontier.add(link, depth=depth, parent_url=parent)

    def _handle_success(self, entry, result) -> None:
        cfg = self.config
        if cfg.profile == "focused":
            page = parse_html(result.raw_html, result.final_url)
            outcome = classify(cfg.classifier, page.text)
            if not outcome["relevant"]:
                return
            metadata = extract_metadata(result.raw_html, result.final_url,
                                        cfg.metadata_rules)
            self._store_page(result, page.text, page.title, metadata,
                             outcome["score"], parsed=True)
            with self._lock:
                self.report.pages_harvested += 1
            self._enqueue_links(page.links, entry.depth + 1, result.final_url)
        else:
            doc_id = self._store_page(result, "", "", {}, None, parsed=False)
            with self._lock:
                self.report.pages_harvested += 1
                self.unparsed.append(doc_id)
                run_parse = len(self.unparsed) >= cfg.parse_interval
                batch = self.unparsed[:] if run_parse else None
                if run_parse:
                    self.unparsed.clear()
            links = extract_links(result.raw_html, result.final_url)
            self._enqueue_links(links, entry.depth + 1, result.final_url)
            if batch:
                self._parse_batch(batch)

    def _parse_batch(self, doc_ids: list) -> None:
        for doc_id in doc_ids:
            record = self.store.get_document(doc_id)
            page = parse_html(record.raw_html, record.url)
            metadata = extract_metadata(record.raw_html, record.url,
                                        self.config.metadata_rules)
            self.store.mark_parsed(doc_id, page.text, page.title, metadata)

    # -- worker loop ------------------------------------------------------------

    def _worker(self) -> None:
        robots_on = self.config.robots_enabled()
        while True:
            if not self._take_budget():
                return
            entry = self.frontier.next_url()
            if entry is None:
                self._return_budget()
                return
            host = url_host(entry.url)
            if robots_on and host not in self.robots:
                self._robots_for(entry.url)
                self.frontier.mark_done(host)
                self.frontier.requeue_front(entry)
                self._return_budget()
                continue
            if robots_on:
                parser = self.robots.get(host)
                if parser is not None and not parser.can_fetch(
                        self.config.user_agent, entry.url):
                    with self._lock:
                        self.report.robots_skipped += 1
                    self.frontier.release(host)
                    self._return_budget()
                    continue
            result = self.fetcher.fetch(entry.url)
            self.frontier.mark_done(host)
            with self._lock:
                self.report.pages_fetched += 1
                self.report.per_host[host] = self.report.per_host.get(host, 0) + 1
            if result.final_url != entry.url:
                self.frontier.mark_seen(result.final_url)
            if not result.ok:
                entry.failure = result.failure
                with self._lock:
                    self.report.failures[result.failure] = (
                        self.report.failures.get(result.failure, 0) + 1)
                    self.report.failed_urls.append(entry.url)
                continue
            if result.final_url != entry.url and not apply_filters(
                    result.final_url, self.config.filters):
                # a redirect escaped the configured crawl scope; never store it
                entry.failure = "redirect_out_of_scope"
                with self._lock:
                    self.report.failures["redirect_out_of_scope"] = (
                        self.report.failures.get("redirect_out_of_scope", 0) + 1)
                continue
            self._handle_success(entry, result)

    def run(self) -> CrawlReport:
        for seed in self.config.seeds:
            if apply_filters(seed, self.config.filters):
                self.frontier.add(seed, depth=0)
        workers = max(1, self.config.workers)
        if workers == 1:
            self._worker()
        else:
            threads = [threading.Thread(target=self._worker) for _ in range(workers)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
        if self.unparsed:
            self._parse_batch(self.unparsed)
            self.unparsed = []
        self.report.frontier_seen = self.frontier.seen_count
        if self.report.frontier_seen:
            self.report.harvest_ratio = (
                self.report.pages_harvested / self.report.frontier_seen)
        return self.report


def run_crawl(config: CrawlConfig, store: DocumentStore) -> CrawlReport:
    """Run a crawl to completion and return its report."""
    return _Crawl(config, store).run()
