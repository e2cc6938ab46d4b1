"""Shared fixtures: an in-process fixture website, a recording SOCKS5 proxy,
Stack-Exchange-style dump files, and toy models."""

from __future__ import annotations

import random
import socket
import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ctiharvest.classify import LabeledExample, train_model
from ctiharvest.embeddings import EmbeddingModel
from ctiharvest.store import DocumentStore

ON_TOPIC_WORDS = [
    "iot", "vulnerability", "exploit", "firmware", "botnet",
    "telnet", "password", "attack", "router", "camera",
]
OFF_TOPIC_WORDS = [
    "recipe", "garden", "soup", "tomato", "basil",
    "flour", "oven", "knitting", "yarn", "pasta",
]


def topical_text(words: list, seed: int, n_sentences: int = 6) -> str:
    rng = random.Random(seed)
    sentences = []
    for _ in range(n_sentences):
        sentences.append(" ".join(rng.choice(words) for _ in range(8)) + ".")
    return " ".join(sentences)


def make_fixture_site() -> dict:
    """30-page site: 10 on-topic pages (incl. the index hub), 20 off-topic.

    The hub links to the other on-topic pages and to the first ten off-topic
    pages; on-topic pages interlink and reach off-topic pages 10..14.
    Off-topic pages 15..19 are linked *only from off-topic pages*, so a
    focused crawl that correctly refuses to expand irrelevant pages never
    fetches them.  Returns {path: html}; page classes and the reachable set
    live under '_on_topic'/'_off_topic'/'_reachable' keys.
    """
    on_paths = ["/index.html"] + [f"/topic/{i}.html" for i in range(1, 10)]
    off_paths = [f"/other/{i}.html" for i in range(20)]

    def page(title, text, links):
        anchors = "".join(f'<a href="{l}">more</a> ' for l in links)
        return (f"<html><head><title>{title}</title></head><body>"
                f"<p>{text}</p><div>{anchors}</div></body></html>")

    pages = {}
    pages["/index.html"] = page(
        "iot vulnerability reports", topical_text(ON_TOPIC_WORDS, 0),
        on_paths[1:] + off_paths[:10])
    for i, path in enumerate(on_paths[1:], start=1):
        links = [on_paths[(i + 1) % len(on_paths)], on_paths[(i + 3) % len(on_paths)],
                 off_paths[10 + (i % 5)]]
        pages[path] = page(f"iot exploit bulletin {i}",
                           topical_text(ON_TOPIC_WORDS, i), links)
    for i, path in enumerate(off_paths):
        # off-topic pages funnel into the tail pages 15..19
        links = [off_paths[15 + (i % 5)], off_paths[(i + 1) % 15]]
        pages[path] = page(f"kitchen notes {i}",
                           topical_text(OFF_TOPIC_WORDS, 100 + i), links)
    pages["_on_topic"] = on_paths
    pages["_off_topic"] = off_paths
    pages["_reachable"] = on_paths + off_paths[:15]  # via relevant pages only
    return pages


class RecordingHandler(BaseHTTPRequestHandler):
    """Serves a {path: body-or-(status, headers, body)} dict and records
    every request with a monotonic timestamp and its headers."""

    pages: dict = {}
    records: list = []
    lock = threading.Lock()

    def log_message(self, *args):
        pass

    def do_GET(self):
        with self.lock:
            self.records.append({
                "path": self.path,
                "time": time.monotonic(),
                "headers": dict(self.headers.items()),
                "host_header": self.headers.get("Host", ""),
            })
        entry = self.pages.get(self.path)
        if entry is None:
            self.send_response(404)
            body = b"not here"
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        if isinstance(entry, str):
            status, headers, body = 200, {}, entry.encode("utf-8")
        else:
            status, headers, body = entry
            if isinstance(body, str):
                body = body.encode("utf-8")
        if "__sleep__" in headers:
            time.sleep(headers["__sleep__"])
            headers = {k: v for k, v in headers.items() if k != "__sleep__"}
        self.send_response(status)
        for key, value in headers.items():
            self.send_header(key, value)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address):
        pass  # client disconnects (e.g. fetch timeouts) are expected in tests


def start_site(pages: dict):
    """Serve ``pages`` on an ephemeral localhost port.

    Returns (base_url, records list, server); caller shuts the server down.
    """
    handler = type("SiteHandler", (RecordingHandler,), {
        "pages": {k: v for k, v in pages.items() if not k.startswith("_")},
        "records": [],
        "lock": threading.Lock(),
    })
    server = _QuietServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return f"http://{host}:{port}", handler.records, server


@pytest.fixture
def fixture_site():
    pages = make_fixture_site()
    base, records, server = start_site(pages)
    yield base, pages, records
    server.shutdown()
    server.server_close()


def make_training_examples(n_per_class: int = 8) -> list:
    """Linearly separable by construction: disjoint vocabularies."""
    examples = []
    for i in range(n_per_class):
        examples.append(LabeledExample(
            url=f"http://pos.example/{i}",
            text=topical_text(ON_TOPIC_WORDS, 1000 + i), label="positive"))
        examples.append(LabeledExample(
            url=f"http://neg.example/{i}",
            text=topical_text(OFF_TOPIC_WORDS, 2000 + i), label="negative"))
    return examples


@pytest.fixture(scope="session")
def topic_classifier():
    return train_model(make_training_examples(), seed=3)


@pytest.fixture
def store(tmp_path):
    return DocumentStore(tmp_path / "docs.db")


# -- toy ranking model ---------------------------------------------------------

TOY_VECTORS = {
    "alpha": (1.0, 0.0, 0.0),
    "bravo": (0.0, 1.0, 0.0),
    "charlie": (0.5, 0.5, 0.75),
}


@pytest.fixture
def toy_model():
    return EmbeddingModel.from_vectors(TOY_VECTORS)


# -- Stack-Exchange-style dumps --------------------------------------------------

POSTS_XML = """<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" Body="&lt;p&gt;How do I stop a DDoS?&lt;/p&gt;" Tags="&lt;ddos&gt;&lt;ip-spoofing&gt;" />
  <row Id="2" PostTypeId="2" Body="&lt;p&gt;Use upstream filtering, @alice.&lt;/p&gt;" />
  <row Id="3" PostTypeId="1" Body="Mirai hit user42 hard, see http://example.com/report" Tags="&lt;mirai&gt;" />
  <row Id="4" PostTypeId="7" Body="wiki placeholder" />
</posts>
"""

COMMENTS_XML = """<?xml version="1.0" encoding="utf-8"?>
<comments>
  <row Id="10" PostId="1" Text="Also look at rate limiting." />
  <row Id="11" PostId="3" Text="user99 saw the same botnet." />
</comments>
"""


@pytest.fixture
def dump_files(tmp_path):
    posts = tmp_path / "Posts.xml"
    comments = tmp_path / "Comments.xml"
    posts.write_text(POSTS_XML, encoding="utf-8")
    comments.write_text(COMMENTS_XML, encoding="utf-8")
    return posts, comments


# -- recording SOCKS5 proxy -------------------------------------------------------


class FakeSocksProxy:
    """Minimal SOCKS5 server recording every CONNECT and tunnelling mapped
    destinations to local backends; unmapped destinations are refused."""

    def __init__(self, routes: dict):
        self.routes = dict(routes)  # (host, port) -> (host, port)
        self.requests: list = []
        self.lock = threading.Lock()
        self._srv = socket.create_server(("127.0.0.1", 0))
        self.address = self._srv.getsockname()
        self._alive = True
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    @property
    def endpoint(self) -> str:
        return f"{self.address[0]}:{self.address[1]}"

    def _accept_loop(self):
        while self._alive:
            try:
                client, _ = self._srv.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(client,), daemon=True).start()

    def _serve(self, client: socket.socket):
        try:
            head = self._recv(client, 2)
            n_methods = head[1]
            self._recv(client, n_methods)
            client.sendall(b"\x05\x00")
            ver, cmd, _rsv, atyp = self._recv(client, 4)
            if atyp == 0x03:
                (n,) = self._recv(client, 1)
                host = self._recv(client, n).decode("ascii")
            elif atyp == 0x01:
                host = socket.inet_ntoa(self._recv(client, 4))
            else:
                client.close()
                return
            (port,) = struct.unpack(">H", self._recv(client, 2))
            with self.lock:
                self.requests.append((host, port, atyp))
            target = self.routes.get((host, port))
            if ver != 5 or cmd != 1 or target is None:
                client.sendall(b"\x05\x05\x00\x01\x00\x00\x00\x00\x00\x00")
                client.close()
                return
            upstream = socket.create_connection(target, timeout=10)
            client.sendall(b"\x05\x00\x00\x01\x00\x00\x00\x00\x00\x00")
            t1 = threading.Thread(target=self._pipe, args=(client, upstream), daemon=True)
            t2 = threading.Thread(target=self._pipe, args=(upstream, client), daemon=True)
            t1.start()
            t2.start()
        except OSError:
            client.close()

    @staticmethod
    def _recv(sock: socket.socket, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                raise OSError("peer closed")
            buf += chunk
        return buf

    @staticmethod
    def _pipe(src: socket.socket, dst: socket.socket):
        try:
            while True:
                data = src.recv(65536)
                if not data:
                    break
                dst.sendall(data)
        except OSError:
            pass
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def close(self):
        self._alive = False
        self._srv.close()
