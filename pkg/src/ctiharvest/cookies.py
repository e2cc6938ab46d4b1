"""Session cookie import (Netscape cookies.txt) for authenticated crawls.

Dark-web forums usually sit behind a login; the operator logs in manually
once, exports the browser cookies, and the crawler replays them.  Cookies
are only ever attached to requests for their own domain, and expired
cookies are never sent (both enforced by the stdlib cookie policy).
"""

from __future__ import annotations

import http.cookiejar
import logging
import time
import urllib.request

logger = logging.getLogger(__name__)


class CookieImportError(Exception):
    pass


def import_cookies(path) -> http.cookiejar.CookieJar:
    """Load a Netscape-format cookies.txt file.

    Tab-separated fields: domain, subdomain flag, path, secure flag, expiry
    (unix seconds, 0 for session), name, value.  Malformed lines are skipped
    with a warning; a file yielding zero valid cookies is an error.
    """
    jar = http.cookiejar.CookieJar()
    n_valid = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#HttpOnly_"):
                line = line[len("#HttpOnly_"):]
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                logger.warning("%s:%d: malformed cookie line (%d fields); skipped",
                               path, lineno, len(fields))
                continue
            domain, flag, cpath, secure, expires, name, value = fields
            try:
                subdomains = flag.strip().upper() == "TRUE"
                if subdomains and not domain.startswith("."):
                    domain = "." + domain
                expiry = int(expires) if expires.strip() else 0
                cookie = http.cookiejar.Cookie(
                    version=0,
                    name=name,
                    value=value,
                    port=None,
                    port_specified=False,
                    domain=domain,
                    domain_specified=True,
                    domain_initial_dot=domain.startswith("."),
                    path=cpath or "/",
                    path_specified=True,
                    secure=secure.strip().upper() == "TRUE",
                    expires=expiry if expiry > 0 else None,
                    discard=expiry == 0,
                    comment=None,
                    comment_url=None,
                    rest={},
                )
            except (ValueError, AttributeError) as exc:
                logger.warning("%s:%d: malformed cookie line: %s; skipped",
                               path, lineno, exc)
                continue
            jar.set_cookie(cookie)
            n_valid += 1
    if n_valid == 0:
        raise CookieImportError(f"{path}: no valid cookies")
    return jar


def cookie_header_for(jar: http.cookiejar.CookieJar, url: str) -> str | None:
    """Cookie header value for a request to ``url``, or None.

    Delegates domain scoping and expiry to the jar's policy.
    """
    if jar is None:
        return None
    req = urllib.request.Request(url)
    jar.add_cookie_header(req)
    return req.get_header("Cookie")


def jar_has_unexpired(jar: http.cookiejar.CookieJar) -> bool:
    now = time.time()
    return any(not c.is_expired(now) for c in jar)
