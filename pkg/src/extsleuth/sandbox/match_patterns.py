"""Chrome content-script match patterns.

Grammar: <scheme>://<host><path> where scheme is http, https, file, ftp or
'*' (http/https only); host is '*', '*.domain', or a literal host; path is
a '*' glob. '<all_urls>' matches every http(s)/file/ftp URL. The query
string is not part of the match.
"""

from __future__ import annotations

import re
from urllib.parse import urlsplit

ALL_URLS = "<all_urls>"
_SCHEMES = ("http", "https", "file", "ftp")


class MalformedMatchPattern(ValueError):
    pass


class MatchPattern:
    def __init__(self, pattern: str):
        self.raw = pattern
        if pattern == ALL_URLS:
            self.all_urls = True
            return
        self.all_urls = False
        m = re.match(r"^(\*|[a-zA-Z][a-zA-Z0-9+.-]*)://([^/]*)(/.*)$", pattern)
        if not m:
            raise MalformedMatchPattern(pattern)
        scheme, host, path = m.groups()
        if scheme != "*" and scheme not in _SCHEMES:
            raise MalformedMatchPattern(f"{pattern}: unsupported scheme")
        if scheme != "file" and not host:
            raise MalformedMatchPattern(f"{pattern}: empty host")
        if "*" in host and not (host == "*" or host.startswith("*.")):
            raise MalformedMatchPattern(f"{pattern}: host wildcard must lead")
        if host.count("*") > 1:
            raise MalformedMatchPattern(f"{pattern}: multiple host wildcards")
        self.scheme = scheme
        self.host = host.lower()
        self.path_regex = re.compile(
            "^" + "".join(".*" if c == "*" else re.escape(c) for c in path) + "$"
        )

    def matches(self, url: str) -> bool:
        parts = urlsplit(url)
        scheme = parts.scheme.lower()
        host = (parts.hostname or "").lower()
        path = parts.path or "/"
        if self.all_urls:
            return scheme in _SCHEMES
        if self.scheme == "*":
            if scheme not in ("http", "https"):
                return False
        elif scheme != self.scheme:
            return False
        if self.host == "*":
            pass
        elif self.host.startswith("*."):
            base = self.host[2:]
            if host != base and not host.endswith("." + base):
                return False
        elif host != self.host:
            return False
        return bool(self.path_regex.match(path))


def url_matches_any(url: str, patterns: list[str]) -> bool:
    return any(MatchPattern(p).matches(url) for p in patterns)
