"""Overpass API client with on-disk caching and retry/backoff."""

from __future__ import annotations

import hashlib
import os
import time

import requests
from filelock import FileLock

from ..errors import DomainError, ThrottledError, TransportError

DEFAULT_ENDPOINT = "https://overpass-api.de/api/interpreter"
ENDPOINT_ENV_VAR = "PLANLOC_OVERPASS_URL"

MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0


def default_endpoint() -> str:
    return os.environ.get(ENDPOINT_ENV_VAR, DEFAULT_ENDPOINT)


def bbox_query(bbox) -> str:
    """Overpass QL query for all elements in (min_lon, min_lat, max_lon, max_lat)."""
    min_lon, min_lat, max_lon, max_lat = bbox
    if not (max_lon > min_lon and max_lat > min_lat):
        raise DomainError(f"degenerate bbox {bbox}")
    # Overpass bbox order is (south, west, north, east)
    bb = f"{min_lat},{min_lon},{max_lat},{max_lon}"
    return f"[out:xml][timeout:60];(node({bb});way({bb});relation({bb}););(._;>;);out body;"


def _cache_path(cache_dir, endpoint, query):
    key = hashlib.sha256((endpoint + "\n" + query).encode("utf-8")).hexdigest()
    return os.path.join(cache_dir, key + ".osm")


def fetch_overpass(bbox, endpoint=None, timeout=60.0, cache_dir=None,
                   session=None, sleep=time.sleep) -> bytes:
    """Fetch raw OSM XML for a bbox, with retries and a disk cache.

    Transient failures (connection errors, HTTP 5xx) and rate limiting
    (HTTP 429) are retried up to 3 attempts with exponential backoff
    (1 s, then 2 s). Persistent rate limiting raises ThrottledError, other
    persistent failures TransportError. Responses are cached on disk keyed
    by the query hash; cache hits make no network calls.
    """
    endpoint = endpoint or default_endpoint()
    query = bbox_query(bbox)

    cache_file = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        cache_file = _cache_path(cache_dir, endpoint, query)
        if os.path.exists(cache_file):
            with open(cache_file, "rb") as f:
                return f.read()

    own_session = session is None
    session = session or requests.Session()
    last_error = None
    throttled = False
    try:
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
            try:
                resp = session.post(endpoint, data={"data": query}, timeout=timeout)
            except requests.RequestException as e:
                last_error = f"request failed: {e}"
                continue
            if resp.status_code == 200:
                data = resp.content
                if cache_file is not None:
                    lock = FileLock(cache_file + ".lock")
                    with lock:
                        tmp = cache_file + ".tmp"
                        with open(tmp, "wb") as f:
                            f.write(data)
                        os.replace(tmp, cache_file)
                return data
            throttled = resp.status_code == 429
            last_error = f"HTTP {resp.status_code}"
            if not (throttled or 500 <= resp.status_code < 600):
                break  # non-retryable client error
    finally:
        if own_session:
            session.close()
    if throttled:
        raise ThrottledError(f"Overpass rate limit persisted after {MAX_ATTEMPTS} attempts")
    raise TransportError(f"Overpass fetch failed: {last_error}")
