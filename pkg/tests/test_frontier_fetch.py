import threading
import time

import pytest

from conftest import FakeSocksProxy, start_site
from ctiharvest.cookies import CookieImportError, cookie_header_for, import_cookies
from ctiharvest.fetch import Fetcher
from ctiharvest.frontier import Frontier


class TestFrontier:
    def test_fifo_within_host(self):
        frontier = Frontier(politeness_delay=0.0)
        for i in range(3):
            frontier.add(f"http://h.example/{i}")
        order = []
        for _ in range(3):
            entry = frontier.next_url()
            order.append(entry.url)
            frontier.mark_done(entry.url)
        assert order == [f"http://h.example/{i}" for i in range(3)]

    def test_duplicate_enqueue_returned_once(self):
        frontier = Frontier(politeness_delay=0.0)
        assert frontier.add("http://h.example/x")
        assert not frontier.add("http://h.example/x")
        assert not frontier.add("http://H.EXAMPLE:80/x")  # same canonical URL
        got = frontier.next_url()
        frontier.mark_done(got.url)
        assert frontier.next_url() is None

    def test_politeness_gap_per_host(self):
        frontier = Frontier(politeness_delay=0.15)
        frontier.add("http://h.example/1")
        frontier.add("http://h.example/2")
        first = frontier.next_url()
        t0 = time.monotonic()
        frontier.mark_done(first.url)
        second = frontier.next_url()
        elapsed = time.monotonic() - t0
        frontier.mark_done(second.url)
        assert elapsed >= 0.15

    def test_two_hosts_interleave_without_mutual_delay(self):
        frontier = Frontier(politeness_delay=10.0)
        frontier.add("http://a.example/1")
        frontier.add("http://b.example/1")
        t0 = time.monotonic()
        first = frontier.next_url()
        second = frontier.next_url()
        assert time.monotonic() - t0 < 1.0
        assert {first.url, second.url} == {"http://a.example/1", "http://b.example/1"}

    def test_depth_and_parent_recorded(self):
        frontier = Frontier(politeness_delay=0.0)
        frontier.add("http://h.example/root", depth=0)
        frontier.add("http://h.example/child", depth=1,
                     parent_url="http://h.example/root")
        root = frontier.next_url()
        assert root.depth == 0 and root.parent_url is None
        frontier.mark_done(root.url)
        child = frontier.next_url()
        assert child.depth == 1 and child.parent_url == "http://h.example/root"

    def test_exhausted_is_none(self):
        frontier = Frontier(politeness_delay=0.0)
        assert frontier.next_url() is None

    def test_concurrent_workers_never_double_issue(self):
        frontier = Frontier(politeness_delay=0.0)
        for i in range(50):
            frontier.add(f"http://h{i % 5}.example/{i}")
        taken = []
        lock = threading.Lock()

        def worker():
            while True:
                entry = frontier.next_url()
                if entry is None:
                    return
                with lock:
                    taken.append(entry.url)
                frontier.mark_done(entry.url)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(taken) == 50 and len(set(taken)) == 50


class TestFetch:
    def test_happy_path(self):
        base, records, server = start_site({"/page": "<html><p>hello</p></html>"})
        try:
            result = Fetcher().fetch(f"{base}/page")
            assert result.ok and result.status_code == 200
            assert b"hello" in result.raw_html
            assert result.final_url == f"{base}/page"
        finally:
            server.shutdown(); server.server_close()

    def test_redirect_chain_resolved(self):
        pages = {"/dest": "arrived"}
        base, records, server = start_site(pages)
        pages_live = {"/a": (301, {"Location": "/b"}, b""),
                      "/b": (302, {"Location": f"/dest"}, b""),
                      "/dest": "arrived"}
        server.RequestHandlerClass.pages = pages_live
        try:
            result = Fetcher().fetch(f"{base}/a")
            assert result.ok and result.final_url == f"{base}/dest"
            assert result.raw_html == b"arrived"
        finally:
            server.shutdown(); server.server_close()

    def test_redirect_loop_capped(self):
        base, records, server = start_site({})
        server.RequestHandlerClass.pages = {
            "/loop1": (302, {"Location": "/loop2"}, b""),
            "/loop2": (302, {"Location": "/loop1"}, b""),
        }
        try:
            result = Fetcher().fetch(f"{base}/loop1")
            assert result.failure == "too_many_redirects"
        finally:
            server.shutdown(); server.server_close()

    def test_non_2xx_typed_failure(self):
        base, records, server = start_site({})
        try:
            result = Fetcher().fetch(f"{base}/missing")
            assert result.failure == "http_error" and result.status_code == 404
        finally:
            server.shutdown(); server.server_close()

    def test_connection_refused_typed(self):
        result = Fetcher(timeout=2.0).fetch("http://127.0.0.1:9/nope")
        assert result.failure in ("connection_error", "timeout")

    def test_body_cap_over_cap_failure(self):
        base, records, server = start_site({"/big": "x" * 5000})
        try:
            result = Fetcher(body_cap=1000).fetch(f"{base}/big")
            assert result.failure == "over_cap"
        finally:
            server.shutdown(); server.server_close()

    def test_timeout_typed(self):
        base, records, server = start_site({})
        server.RequestHandlerClass.pages = {
            "/slow": (200, {"__sleep__": 2.0}, b"late"),
        }
        try:
            result = Fetcher(timeout=0.3).fetch(f"{base}/slow")
            assert result.failure == "timeout"
        finally:
            server.shutdown(); server.server_close()


COOKIES_TXT = """# Netscape HTTP Cookie File
d1.example\tFALSE\t/\tFALSE\t{future}\tsession\tabc123
.d3.example\tTRUE\t/\tFALSE\t{future}\tforum\twide
d1.example\tFALSE\t/\tFALSE\t{past}\texpired\tgone
malformed line without tabs
d2.example\tFALSE\t/\tFALSE\t0\ttransient\ttmpval
"""


class TestCookies:
    @pytest.fixture
    def jar_file(self, tmp_path):
        future = int(time.time()) + 3600
        past = int(time.time()) - 3600
        path = tmp_path / "cookies.txt"
        path.write_text(COOKIES_TXT.format(future=future, past=past))
        return path

    def test_import_counts_and_skips_malformed(self, jar_file):
        jar = import_cookies(jar_file)
        assert len(jar) == 4  # malformed line skipped

    def test_sent_to_matching_domain_only(self, jar_file):
        jar = import_cookies(jar_file)
        assert "session=abc123" in (cookie_header_for(jar, "http://d1.example/x") or "")
        assert cookie_header_for(jar, "http://d2.example/x") == "transient=tmpval"

    def test_subdomain_flag(self, jar_file):
        jar = import_cookies(jar_file)
        assert cookie_header_for(jar, "http://forum.d3.example/t") == "forum=wide"

    def test_expired_never_attached(self, jar_file):
        jar = import_cookies(jar_file)
        header = cookie_header_for(jar, "http://d1.example/x") or ""
        assert "expired" not in header

    def test_zero_valid_cookies_is_error(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# only comments\nnot a cookie\n")
        with pytest.raises(CookieImportError):
            import_cookies(path)

    def test_cookie_attached_on_wire(self, jar_file, tmp_path):
        base, records, server = start_site({"/p": "ok"})
        try:
            host_port = base.removeprefix("http://")
            host = host_port.split(":")[0]
            future = int(time.time()) + 3600
            path = tmp_path / "local.txt"
            path.write_text(f"{host}\tFALSE\t/\tFALSE\t{future}\tlocal\tyes\n")
            fetcher = Fetcher(cookie_jar=import_cookies(path))
            assert fetcher.fetch(f"{base}/p").ok
            assert records[-1]["headers"].get("Cookie") == "local=yes"
        finally:
            server.shutdown(); server.server_close()


class TestSocks:
    def test_fetch_through_proxy_with_domain_addressing(self):
        base, records, server = start_site({"/forum": "<p>hidden wares</p>"})
        backend_port = int(base.rsplit(":", 1)[1])
        proxy = FakeSocksProxy({("hidden1234.onion", 80): ("127.0.0.1", backend_port)})
        try:
            fetcher = Fetcher(proxy=proxy.endpoint, timeout=5.0)
            result = fetcher.fetch("http://hidden1234.onion/forum")
            assert result.ok and b"hidden wares" in result.raw_html
            assert proxy.requests == [("hidden1234.onion", 80, 0x03)]
            # domain name reached the proxy verbatim: no local resolution
            assert records[-1]["host_header"].startswith("hidden1234.onion")
        finally:
            proxy.close()
            server.shutdown(); server.server_close()

    def test_proxy_refusal_is_typed_failure(self):
        proxy = FakeSocksProxy({})
        try:
            fetcher = Fetcher(proxy=proxy.endpoint, timeout=5.0)
            result = fetcher.fetch("http://unrouted9.onion/")
            assert result.failure == "proxy_error"
        finally:
            proxy.close()

    def test_proxy_down_is_typed_failure(self):
        fetcher = Fetcher(proxy="127.0.0.1:9", timeout=2.0)
        result = fetcher.fetch("http://x.onion/")
        assert result.failure in ("proxy_error", "connection_error", "timeout")
