"""Local mock translation service and its black-box client.

Wire protocol: every message is a 4-byte big-endian length followed by that
many bytes of UTF-8 JSON. A request is ``{"text": str}``. A reply is either

    {"ok": true, "translation": str, "confidence": float,
     "server_time": float, "cached": bool, "window": [start, end]}

or ``{"ok": false, "error": str, "server_time": float}``. A connection may
carry any number of request/reply pairs.

The server handles one request at a time. Its processing time is modelled
as ``c0 + c1 * decode_steps`` on a simulated clock (cache hits cost
``cache_hit_time``); ``window`` is the interval that request occupied on
that clock. In ``real_sleep`` mode the server also sleeps for that long.

The client adds a network model: each direction costs ``base_latency``
plus an exponential jitter with mean ``jitter``. Non-loopback endpoints are
refused unless ``allow_remote=True``. This code exists to study the effect
on a service you run yourself.
"""

from __future__ import annotations

import ipaddress
import json
import socket
import socketserver
import statistics
import struct
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .attacks.ga import FitnessValue
from .measurement import LatencySample, SimulatedClock
from .nlp.text import Vocab, detokenize, encode_text
from .nlp.translator import ToyTranslator, translate

MAX_MESSAGE = 1 << 20


class RequestRejected(Exception):
    """The service answered with an error (oversized input, guard cutoff, ...)."""

    def __init__(self, message: str, server_time: float = 0.0):
        super().__init__(message)
        self.server_time = server_time


class ServiceTimeout(TimeoutError):
    pass


class ServiceUnavailable(ConnectionError):
    pass


@dataclass
class ServiceConfig:
    model: ToyTranslator
    vocab: Vocab
    cache_capacity: int = 0
    cache_policy: str = "lru"
    base_network_latency: float = 0.005
    jitter: float = 0.0
    overhead_time: float = 0.005  # c0
    step_time: float = 0.002  # c1, per decode step
    cache_hit_time: float = 1e-4
    max_input_chars: int = 50
    real_sleep: bool = False
    guard: object | None = None  # a defense.ConsumptionProfile

    def __post_init__(self):
        for name in ("base_network_latency", "jitter", "overhead_time", "step_time", "cache_hit_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be nonnegative")
        if self.cache_policy != "lru":
            raise ValueError("only the 'lru' cache policy is supported")
        if self.max_input_chars < 1:
            raise ValueError("max_input_chars must be positive")

    def network(self, seed: int = 0) -> "NetworkModel":
        return NetworkModel(self.base_network_latency, self.jitter, seed)


class TranslationService:
    """Request handling without the socket: cache, model, latency model."""

    def __init__(self, config: ServiceConfig, clock: SimulatedClock | None = None):
        self.config = config
        self.clock = clock or SimulatedClock()
        self._cache: OrderedDict[str, tuple[str, float, int]] = OrderedDict()
        self._lock = threading.Lock()
        self.requests = 0

    def _infer(self, text: str):
        cfg = self.config
        tokens = encode_text(text, cfg.vocab)
        if cfg.guard is not None:
            from .defense import guarded_infer

            outcome = guarded_infer(cfg.model, tokens, cfg.guard)
            if outcome.rejected:
                steps = outcome.steps
                raise RequestRejected("request exceeded the service cost limit", cfg.overhead_time + cfg.step_time * steps)
            result = outcome.result
        else:
            result = translate(cfg.model, tokens, record=False)
        out = result.output
        return detokenize(out, cfg.vocab), float(out.confidence), result.dims.l_tout

    def handle(self, request: dict) -> dict:
        with self._lock:
            self.requests += 1
            cfg = self.config
            start = self.clock.now()
            text = request.get("text") if isinstance(request, dict) else None
            try:
                if not isinstance(text, str):
                    raise RequestRejected("request needs a 'text' string")
                if len(text) > cfg.max_input_chars:
                    raise RequestRejected(f"input exceeds {cfg.max_input_chars} characters")
                hit = self._cache.get(text) if cfg.cache_capacity else None
                if hit is not None:
                    self._cache.move_to_end(text)
                    translation, confidence, _ = hit
                    server_time, cached = cfg.cache_hit_time, True
                else:
                    try:
                        translation, confidence, steps = self._infer(text)
                    except ValueError as exc:
                        raise RequestRejected(str(exc)) from None
                    server_time, cached = cfg.overhead_time + cfg.step_time * steps, False
                    if cfg.cache_capacity:
                        self._cache[text] = (translation, confidence, steps)
                        while len(self._cache) > cfg.cache_capacity:
                            self._cache.popitem(last=False)
            except RequestRejected as exc:
                self._spend(exc.server_time)
                return {"ok": False, "error": str(exc), "server_time": exc.server_time}
            self._spend(server_time)
            return {
                "ok": True,
                "translation": translation,
                "confidence": confidence,
                "server_time": server_time,
                "cached": cached,
                "window": [start, self.clock.now()],
            }

    def _spend(self, dt: float) -> None:
        self.clock.advance(dt)
        if self.config.real_sleep:
            time.sleep(dt)


# -- framing ------------------------------------------------------------------------


def _send(sock: socket.socket, obj) -> None:
    data = json.dumps(obj).encode("utf-8")
    sock.sendall(struct.pack(">I", len(data)) + data)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None if not buf else bytes(buf)
        buf += chunk
    return bytes(buf)


def _recv(sock: socket.socket):
    head = _recv_exact(sock, 4)
    if head is None:
        return None
    if len(head) < 4:
        raise ConnectionError("truncated message header")
    (n,) = struct.unpack(">I", head)
    if n > MAX_MESSAGE:
        raise ConnectionError(f"message of {n} bytes exceeds the limit")
    body = _recv_exact(sock, n)
    if body is None or len(body) < n:
        raise ConnectionError("truncated message body")
    return json.loads(body.decode("utf-8"))


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        service: TranslationService = self.server.service  # type: ignore[attr-defined]
        while True:
            try:
                msg = _recv(self.request)
            except (ConnectionError, ValueError):
                return
            if msg is None:
                return
            _send(self.request, service.handle(msg))


class _Server(socketserver.TCPServer):
    allow_reuse_address = True


class ServiceHandle:
    def __init__(self, server: _Server, thread: threading.Thread, service: TranslationService):
        self._server, self._thread, self.service = server, thread, service

    @property
    def endpoint(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 0, clock: SimulatedClock | None = None) -> ServiceHandle:
    """Start the service on a background thread; one request is served at a time."""
    service = TranslationService(config, clock)
    server = _Server((host, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, name="spongelab-service", daemon=True)
    thread.start()
    return ServiceHandle(server, thread, service)


# -- client -------------------------------------------------------------------------


class NetworkModel:
    """One-way delay ``base + Exp(jitter)``; deterministic for a given seed."""

    def __init__(self, base: float = 0.0, jitter: float = 0.0, seed: int = 0):
        if base < 0 or jitter < 0:
            raise ValueError("latencies must be nonnegative")
        self.base, self.jitter = base, jitter
        self._rng = np.random.default_rng(seed)

    def one_way(self) -> float:
        extra = float(self._rng.exponential(self.jitter)) if self.jitter > 0 else 0.0
        return self.base + extra


class TranslationResponse(NamedTuple):
    translation: str
    confidence: float
    server_time: float
    cached: bool = False


def _check_endpoint(host: str, allow_remote: bool) -> None:
    if allow_remote:
        return
    try:
        addrs = {info[4][0] for info in socket.getaddrinfo(host, None)}
    except socket.gaierror as exc:
        raise ServiceUnavailable(f"cannot resolve {host!r}: {exc}") from None
    if not all(ipaddress.ip_address(a.split("%")[0]).is_loopback for a in addrs):
        raise PermissionError(
            f"refusing non-loopback endpoint {host!r}; pass allow_remote=True only for services you own"
        )


class ServiceClient:
    """Persistent connection to the service; use from one thread at a time."""

    def __init__(self, endpoint, network: NetworkModel | None = None, timeout: float = 5.0, allow_remote: bool = False, real_time: bool = False):
        host, port = endpoint
        _check_endpoint(host, allow_remote)
        self.endpoint = (host, port)
        self.network = network or NetworkModel()
        self.timeout = timeout
        self.real_time = real_time
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(self.endpoint, timeout=self.timeout)
            except socket.timeout:
                raise ServiceTimeout(f"connecting to {self.endpoint} timed out") from None
            except OSError as exc:
                raise ServiceUnavailable(f"cannot connect to {self.endpoint}: {exc}") from None
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def translate(self, text: str, input_id=None) -> tuple[TranslationResponse, LatencySample]:
        sock = self._connect()
        t0 = time.perf_counter()
        try:
            _send(sock, {"text": text})
            reply = _recv(sock)
        except socket.timeout:
            self.close()
            raise ServiceTimeout(f"no reply from {self.endpoint} within {self.timeout}s") from None
        except OSError as exc:
            self.close()
            raise ServiceUnavailable(f"connection to {self.endpoint} failed: {exc}") from None
        if reply is None:
            self.close()
            raise ServiceUnavailable(f"{self.endpoint} closed the connection")
        wall = time.perf_counter() - t0
        server_time = float(reply.get("server_time", 0.0))
        if not reply.get("ok"):
            raise RequestRejected(reply.get("error", "rejected"), server_time)
        if self.real_time:
            rtt = wall + self.network.one_way() + self.network.one_way()
        else:
            rtt = server_time + self.network.one_way() + self.network.one_way()
        resp = TranslationResponse(reply["translation"], float(reply["confidence"]), server_time, bool(reply.get("cached")))
        window = reply.get("window") or [0.0, 0.0]
        return resp, LatencySample(rtt, input_id if input_id is not None else text, float(window[0]))


def client_translate(endpoint, text: str, network: NetworkModel | None = None, timeout: float = 5.0, allow_remote: bool = False):
    """One request on a fresh connection: ``(TranslationResponse, LatencySample)``."""
    with ServiceClient(endpoint, network, timeout, allow_remote) as client:
        return client.translate(text)


class FitnessLogEntry(NamedTuple):
    text: str
    server_time: float
    round_trip: float
    cached: bool


class BlackboxLatencyFitness:
    """Median client round trip over ``repeats`` requests, as a GA fitness.

    Sees only what a remote user sees. Requests that fail are retried up to
    ``max_failures`` times in total; if no request succeeds the candidate
    scores zero.
    """

    source = "measured-latency"
    reentrant = False

    def __init__(self, endpoint, network: NetworkModel | None = None, repeats: int = 3, timeout: float = 5.0, max_failures: int = 3, allow_remote: bool = False):
        if repeats < 1:
            raise ValueError("repeats must be at least 1")
        self.client = ServiceClient(endpoint, network, timeout, allow_remote)
        self.repeats = repeats
        self.max_failures = max_failures
        self.log: list[FitnessLogEntry] = []
        self.failures = 0

    def __call__(self, text: str) -> FitnessValue:
        times = []
        failures = 0
        while len(times) < self.repeats and failures < self.max_failures:
            try:
                resp, sample = self.client.translate(text)
            except (RequestRejected, ServiceTimeout, ServiceUnavailable):
                failures += 1
                self.failures += 1
                continue
            times.append(sample.duration)
            self.log.append(FitnessLogEntry(text, resp.server_time, sample.duration, resp.cached))
        if not times:
            return FitnessValue(0.0, self.source)
        return FitnessValue(float(statistics.median(times)), self.source)

    def close(self) -> None:
        self.client.close()
