"""Crawl frontier: per-host FIFO queues with centralized politeness.

Hosts are served round-robin; within a host strictly FIFO.  A host is
released only when its politeness delay has elapsed since the previous
fetch to it *completed*, and never while another fetch to it is in flight,
so inter-request gaps per host are guaranteed regardless of worker count.
Canonical URLs are enqueued at most once per crawl.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .urlnorm import MalformedURL, canonical_url, url_host, utcnow_rfc3339


@dataclass
class FrontierEntry:
    url: str
    depth: int
    parent_url: Optional[str] = None
    discovered_at: str = ""
    failure: Optional[str] = None

    def __post_init__(self):
        if not self.discovered_at:
            self.discovered_at = utcnow_rfc3339()


class Frontier:
    def __init__(self, politeness_delay: float = 1.0):
        self.politeness_delay = politeness_delay
        self._queues: dict[str, deque] = {}
        self._host_ring: deque = deque()
        self._seen: set = set()
        self._last_done: dict[str, float] = {}
        self._busy: set = set()
        self._closed = False
        self._cond = threading.Condition()
        self.entries: dict[str, FrontierEntry] = {}

    def add(self, url: str, depth: int = 0, parent_url: Optional[str] = None) -> bool:
        """Enqueue a canonical URL once; returns False for duplicates or
        unusable URLs."""
        try:
            url = canonical_url(url)
        except MalformedURL:
            return False
        with self._cond:
            if url in self._seen:
                return False
            self._seen.add(url)
            entry = FrontierEntry(url=url, depth=depth, parent_url=parent_url)
            self.entries[url] = entry
            host = url_host(url)
            if host not in self._queues:
                self._queues[host] = deque()
                self._host_ring.append(host)
            self._queues[host].append(entry)
            self._cond.notify_all()
            return True

    def mark_seen(self, url: str) -> None:
        """Suppress future enqueues of ``url`` (e.g. a redirect target)."""
        try:
            url = canonical_url(url)
        except MalformedURL:
            return
        with self._cond:
            self._seen.add(url)

    @property
    def seen_count(self) -> int:
        with self._cond:
            return len(self._seen)

    def _eligible_host(self, now: float) -> Optional[str]:
        for _ in range(len(self._host_ring)):
            host = self._host_ring[0]
            self._host_ring.rotate(-1)
            if not self._queues.get(host):
                continue
            if host in self._busy:
                continue
            last = self._last_done.get(host)
            if last is None or now - last >= self.politeness_delay:
                return host
        return None

    def _next_release_in(self, now: float) -> Optional[float]:
        waits = []
        for host, queue in self._queues.items():
            if not queue or host in self._busy:
                continue
            last = self._last_done.get(host)
            waits.append(0.0 if last is None else max(0.0, last + self.politeness_delay - now))
        return min(waits) if waits else None

    def next_url(self) -> Optional[FrontierEntry]:
        """Next fetchable entry, honoring politeness; blocks while necessary.

        Returns None only when the frontier is exhausted (nothing queued and
        nothing in flight that could enqueue more) or closed.
        """
        with self._cond:
            while True:
                if self._closed:
                    return None
                now = time.monotonic()
                host = self._eligible_host(now)
                if host is not None:
                    entry = self._queues[host].popleft()
                    self._busy.add(host)
                    return entry
                if not any(self._queues.values()) and not self._busy:
                    return None
                wait = self._next_release_in(now)
                if wait is None:
                    self._cond.wait()
                elif wait > 0:
                    self._cond.wait(timeout=wait)
                # wait == 0: a host became eligible between checks; loop

    def requeue_front(self, entry: FrontierEntry) -> None:
        """Put an entry back at the head of its host queue (not re-counted)."""
        host = url_host(entry.url)
        with self._cond:
            self._busy.discard(host)
            self._queues.setdefault(host, deque()).appendleft(entry)
            if host not in self._host_ring:
                self._host_ring.append(host)
            self._cond.notify_all()

    def mark_done(self, url_or_host: str) -> None:
        """Record fetch completion for politeness timing and release the host."""
        host = url_host(url_or_host) if "//" in url_or_host else url_or_host
        with self._cond:
            self._last_done[host] = time.monotonic()
            self._busy.discard(host)
            self._cond.notify_all()

    def release(self, url_or_host: str) -> None:
        """Release a host without a fetch having happened (e.g. robots skip)."""
        host = url_host(url_or_host) if "//" in url_or_host else url_or_host
        with self._cond:
            self._busy.discard(host)
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
