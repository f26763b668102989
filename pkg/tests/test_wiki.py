import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from promptopt.errors import SearchTransportError
from promptopt.wiki import FixtureSearchClient, SearchResult, WikipediaSearchClient

PAGES = {
    "Eiffel Tower": {"type": "standard", "extract": "A lattice tower in Paris."},
    "Mercury": {"type": "disambiguation", "extract": "May refer to:"},
}

SEARCH_HITS = {
    "eiffel": ["Eiffel Tower"],
    "mercury": ["Mercury", "Mercury (planet)", "Mercury (element)"],
}


class _WikiHandler(BaseHTTPRequestHandler):
    fail_next: int = 0

    def do_GET(self):  # noqa: N802
        if _WikiHandler.fail_next > 0:
            _WikiHandler.fail_next -= 1
            self.send_error(503)
            return
        parsed = urlparse(self.path)
        if parsed.path == "/w/api.php":
            query = parse_qs(parsed.query).get("srsearch", [""])[0].lower()
            hits = []
            for key, titles in SEARCH_HITS.items():
                if key in query:
                    hits = [{"title": t} for t in titles]
            body = {"query": {"search": hits}}
            self._send(200, body)
        elif parsed.path.startswith("/api/rest_v1/page/summary/"):
            title = parsed.path.rsplit("/", 1)[-1].replace("%20", " ")
            page = PAGES.get(title)
            if page is None:
                self._send(404, {"type": "not_found"})
            else:
                self._send(200, page)
        else:
            self.send_error(404)

    def _send(self, status, body):
        raw = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def wiki_server():
    server = HTTPServer(("127.0.0.1", 0), _WikiHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _WikiHandler.fail_next = 0
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_live_summary(wiki_server):
    client = WikipediaSearchClient(base_url=wiki_server)
    result = client.search("eiffel tower history")
    assert result == SearchResult("summary", summary="A lattice tower in Paris.")


def test_live_disambiguation_lists_other_hits(wiki_server):
    client = WikipediaSearchClient(base_url=wiki_server)
    result = client.search("mercury")
    assert result.kind == "disambiguation"
    assert result.options == ("Mercury (planet)", "Mercury (element)")


def test_live_no_results(wiki_server):
    client = WikipediaSearchClient(base_url=wiki_server)
    assert client.search("zzyzx").kind == "none"


def test_live_retries_transient_failures(wiki_server):
    _WikiHandler.fail_next = 2
    client = WikipediaSearchClient(base_url=wiki_server, max_retries=3)
    result = client.search("eiffel")
    assert result.kind == "summary"


def test_live_transport_error_after_retries(wiki_server):
    _WikiHandler.fail_next = 10
    client = WikipediaSearchClient(base_url=wiki_server, max_retries=3)
    with pytest.raises(SearchTransportError):
        client.search("eiffel")


def test_live_empty_query_short_circuits(wiki_server):
    client = WikipediaSearchClient(base_url=wiki_server)
    assert client.search("   ").kind == "none"


def test_base_url_env_override(monkeypatch, wiki_server):
    monkeypatch.setenv("PROMPTOPT_SEARCH_BASE_URL", wiki_server)
    client = WikipediaSearchClient()
    assert client.base_url == wiki_server


def test_fixture_client_kinds():
    client = FixtureSearchClient(
        {
            "a": "summary text",
            "b": ["T1", "T2"],
            "c": SearchResult("none"),
        }
    )
    assert client.search("a") == SearchResult("summary", summary="summary text")
    assert client.search("b") == SearchResult("disambiguation", options=("T1", "T2"))
    assert client.search("c").kind == "none"
    assert client.search("unknown").kind == "none"
