"""HTTP fetching with redirect/size caps, cookie replay, and SOCKS5 proxying.

The client is deliberately small: GET-only, bounded redirects, a body size
cap, and typed failures instead of exceptions so the crawl loop can record
an outcome on every frontier entry and keep going.  With a proxy configured
the target hostname is handed to the proxy verbatim (SOCKS5 domain-name
addressing), so onion addresses are never resolved locally.
"""

from __future__ import annotations

import http.client
import logging
import socket
import ssl
import struct
import urllib.request
from dataclasses import dataclass, field
from urllib.parse import urljoin, urlsplit

from .urlnorm import MalformedURL, canonical_url, utcnow_rfc3339

logger = logging.getLogger(__name__)

DEFAULT_BODY_CAP = 2 * 1024 * 1024  # 2 MiB
DEFAULT_TIMEOUT = 30.0
MAX_REDIRECTS = 5
REDIRECT_CODES = (301, 302, 303, 307, 308)

# typed failure outcomes recorded on frontier entries
FAIL_TIMEOUT = "timeout"
FAIL_CONNECTION = "connection_error"
FAIL_PROXY = "proxy_error"
FAIL_TLS = "tls_error"
FAIL_REDIRECTS = "too_many_redirects"
FAIL_OVER_CAP = "over_cap"
FAIL_HTTP = "http_error"
FAIL_URL = "bad_url"


class ProxyError(OSError):
    pass


def socks5_connect(proxy_host: str, proxy_port: int, dest_host: str,
                   dest_port: int, timeout: float) -> socket.socket:
    """Open a SOCKS5 tunnel (no auth) to dest_host:dest_port.

    The destination is sent as a domain name (ATYP 0x03); resolution happens
    at the proxy.
    """
    sock = socket.create_connection((proxy_host, proxy_port), timeout=timeout)
    try:
        sock.sendall(b"\x05\x01\x00")
        reply = _recv_exact(sock, 2)
        if reply[0] != 0x05 or reply[1] != 0x00:
            raise ProxyError(f"SOCKS5 greeting rejected: {reply!r}")
        host_raw = dest_host.encode("idna")
        if len(host_raw) > 255:
            raise ProxyError("destination hostname too long for SOCKS5")
        sock.sendall(b"\x05\x01\x00\x03" + bytes([len(host_raw)]) + host_raw
                     + struct.pack(">H", dest_port))
        head = _recv_exact(sock, 4)
        if head[1] != 0x00:
            raise ProxyError(f"SOCKS5 connect failed, code {head[1]}")
        atyp = head[3]
        if atyp == 0x01:
            _recv_exact(sock, 4 + 2)
        elif atyp == 0x04:
            _recv_exact(sock, 16 + 2)
        elif atyp == 0x03:
            (n,) = _recv_exact(sock, 1)
            _recv_exact(sock, n + 2)
        else:
            raise ProxyError(f"SOCKS5 reply with unknown address type {atyp}")
        return sock
    except BaseException:
        sock.close()
        raise


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProxyError("proxy closed connection mid-handshake")
        buf += chunk
    return buf


@dataclass
class FetchResult:
    url: str
    final_url: str
    status_code: int = 0
    raw_html: bytes = b""
    fetched_at: str = ""
    failure: str | None = None
    redirect_chain: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None


class Fetcher:
    """Reusable GET client; one instance may serve all crawl workers."""

    def __init__(self, user_agent: str = "ctiharvest/0.1",
                 timeout: float = DEFAULT_TIMEOUT,
                 body_cap: int = DEFAULT_BODY_CAP,
                 max_redirects: int = MAX_REDIRECTS,
                 proxy: str | None = None,
                 cookie_jar=None):
        self.user_agent = user_agent
        self.timeout = timeout
        self.body_cap = body_cap
        self.max_redirects = max_redirects
        self.cookie_jar = cookie_jar
        self.proxy = None
        if proxy:
            host, _, port = proxy.rpartition(":")
            if not host or not port.isdigit():
                raise ValueError(f"proxy must be host:port, got {proxy!r}")
            self.proxy = (host, int(port))
        self._ssl_context = ssl.create_default_context()

    def _open_socket(self, host: str, port: int, use_tls: bool) -> socket.socket:
        if self.proxy:
            sock = socks5_connect(self.proxy[0], self.proxy[1], host, port,
                                  self.timeout)
        else:
            sock = socket.create_connection((host, port), timeout=self.timeout)
        sock.settimeout(self.timeout)
        if use_tls:
            sock = self._ssl_context.wrap_socket(sock, server_hostname=host)
        return sock

    def fetch(self, url: str) -> FetchResult:
        """GET ``url`` following up to max_redirects hops; never raises for
        network-level problems, returning a typed failure instead."""
        fetched_at = utcnow_rfc3339()
        try:
            current = canonical_url(url)
        except MalformedURL as exc:
            return FetchResult(url=url, final_url=url, fetched_at=fetched_at,
                               failure=FAIL_URL, redirect_chain=[str(exc)])
        chain: list = []
        result = FetchResult(url=current, final_url=current, fetched_at=fetched_at,
                             redirect_chain=chain)
        for _hop in range(self.max_redirects + 1):
            try:
                status, headers, body, over_cap = self._request(current)
            except socket.timeout:
                result.failure = FAIL_TIMEOUT
                return result
            except ProxyError as exc:
                logger.warning("proxy failure for %s: %s", current, exc)
                result.failure = FAIL_PROXY
                return result
            except ssl.SSLError:
                result.failure = FAIL_TLS
                return result
            except OSError:
                result.failure = FAIL_CONNECTION
                return result

            result.status_code = status
            result.final_url = current
            if status in REDIRECT_CODES and headers.get("Location"):
                chain.append(current)
                try:
                    current = canonical_url(urljoin(current, headers["Location"]))
                except MalformedURL:
                    result.failure = FAIL_URL
                    return result
                continue
            if over_cap:
                result.failure = FAIL_OVER_CAP
                return result
            result.raw_html = body
            if not 200 <= status < 300:
                result.failure = FAIL_HTTP
            return result
        result.failure = FAIL_REDIRECTS
        return result

    def _request(self, url: str):
        parts = urlsplit(url)
        use_tls = parts.scheme == "https"
        host = parts.hostname
        port = parts.port or (443 if use_tls else 80)
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query

        headers = {
            "User-Agent": self.user_agent,
            "Accept": "text/html,application/xhtml+xml,*/*;q=0.8",
            "Accept-Encoding": "identity",
            "Connection": "close",
        }
        cookie_req = None
        if self.cookie_jar is not None:
            cookie_req = urllib.request.Request(url)
            self.cookie_jar.add_cookie_header(cookie_req)
            cookie = cookie_req.get_header("Cookie")
            if cookie:
                headers["Cookie"] = cookie

        sock = self._open_socket(host, port, use_tls)
        conn_cls = http.client.HTTPSConnection if use_tls else http.client.HTTPConnection
        conn = conn_cls(host, port, timeout=self.timeout)
        conn.sock = sock
        try:
            conn.request("GET", path, headers=headers)
            resp = conn.getresponse()
            if self.cookie_jar is not None:
                self.cookie_jar.extract_cookies(
                    resp, cookie_req or urllib.request.Request(url))
            body = resp.read(self.body_cap + 1)
            over_cap = len(body) > self.body_cap
            return resp.status, dict(resp.getheaders()), body[: self.body_cap], over_cap
        finally:
            conn.close()
