"""Encyclopedia search clients used by the Search tool.

Two implementations of one small interface: an offline fixture client keyed
by exact query string (used by every test), and a live client for the public
Wikipedia API whose base URL can be overridden for hermetic testing.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Mapping, Protocol

import requests

from .errors import SearchTransportError

SEARCH_BASE_URL_ENV = "PROMPTOPT_SEARCH_BASE_URL"
DEFAULT_SEARCH_BASE_URL = "https://en.wikipedia.org"


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one query: a summary, nothing, or a list of disambiguations."""

    kind: str  # "summary" | "none" | "disambiguation"
    summary: str = ""
    options: tuple[str, ...] = ()


class SearchClient(Protocol):
    def search(self, query: str) -> SearchResult: ...


class FixtureSearchClient:
    """Deterministic client backed by an exact query -> result mapping.

    Values may be a plain summary string, a list of disambiguation titles,
    or a prebuilt SearchResult. Unknown queries yield no results.
    """

    def __init__(self, fixtures: Mapping[str, object]) -> None:
        self._fixtures = dict(fixtures)

    def search(self, query: str) -> SearchResult:
        entry = self._fixtures.get(query)
        if entry is None:
            return SearchResult("none")
        if isinstance(entry, SearchResult):
            return entry
        if isinstance(entry, str):
            return SearchResult("summary", summary=entry)
        if isinstance(entry, (list, tuple)):
            return SearchResult("disambiguation", options=tuple(entry))
        raise TypeError(f"unsupported fixture entry for {query!r}: {entry!r}")


class WikipediaSearchClient:
    """Live client: full-text search, then the summary of the first hit.

    A page of type "disambiguation" produces the other search hits as
    options. Transient HTTP failures are retried up to ``max_retries``
    times before SearchTransportError is raised; outbound concurrency is
    bounded by ``max_in_flight``.
    """

    def __init__(
        self,
        base_url: str | None = None,
        timeout_s: float = 10.0,
        max_retries: int = 3,
        max_in_flight: int = 4,
        user_agent: str = "promptopt/0.1 (research tooling)",
    ) -> None:
        base = base_url or os.environ.get(SEARCH_BASE_URL_ENV) or DEFAULT_SEARCH_BASE_URL
        self.base_url = base.rstrip("/")
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._session = requests.Session()
        self._session.headers["User-Agent"] = user_agent

    def _get(self, url: str, params: dict | None = None) -> requests.Response:
        last: Exception | None = None
        for _ in range(self.max_retries):
            try:
                with self._semaphore:
                    resp = self._session.get(url, params=params, timeout=self.timeout_s)
                if resp.status_code >= 500:
                    last = SearchTransportError(f"server returned {resp.status_code}")
                    continue
                return resp
            except requests.RequestException as exc:
                last = exc
        raise SearchTransportError(f"search request failed after {self.max_retries} attempts: {last}")

    def search(self, query: str) -> SearchResult:
        if not query.strip():
            return SearchResult("none")
        resp = self._get(
            f"{self.base_url}/w/api.php",
            params={
                "action": "query",
                "list": "search",
                "srsearch": query,
                "srlimit": 6,
                "format": "json",
                "formatversion": 2,
            },
        )
        try:
            hits = resp.json()["query"]["search"]
        except (ValueError, KeyError, TypeError) as exc:
            raise SearchTransportError(f"malformed search response: {exc}") from exc
        titles = [hit.get("title", "") for hit in hits if hit.get("title")]
        if not titles:
            return SearchResult("none")
        summary_resp = self._get(
            f"{self.base_url}/api/rest_v1/page/summary/{requests.utils.quote(titles[0], safe='')}"
        )
        if summary_resp.status_code == 404:
            return SearchResult("none")
        try:
            body = summary_resp.json()
        except ValueError as exc:
            raise SearchTransportError(f"malformed summary response: {exc}") from exc
        if body.get("type") == "disambiguation":
            options = tuple(titles[1:]) or (titles[0],)
            return SearchResult("disambiguation", options=options)
        extract = body.get("extract", "")
        if not extract:
            return SearchResult("none")
        return SearchResult("summary", summary=extract)
