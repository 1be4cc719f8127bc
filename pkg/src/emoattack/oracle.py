"""Black-box classifier oracles.

The optimizer only ever sees ranked (label, confidence) distributions.
Two backends are provided: a file-loaded forward-only affine/ReLU
network for deterministic desk-scale runs, and an HTTP client speaking
the classify wire protocol for real model services.
"""
from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .imaging import Image, quantize

WEIGHT_MAGIC = b"AEMLP01\x00"

ACT_NONE = 0
ACT_RELU = 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


class OracleError(Exception):
    """Base class for oracle failures."""


class WeightFormatError(OracleError):
    """Malformed built-in weight file."""


class OracleProtocolError(OracleError):
    """Remote response violated the wire protocol or result invariants."""


class OracleTransportError(OracleError):
    """Remote endpoint unreachable; carries the attempt count."""

    def __init__(self, message, attempts):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def image_fingerprint(image: Image) -> int:
    """Content hash over the nearest-integer intensity buffer."""
    return fnv1a64(quantize(image.data).tobytes())


@dataclass
class ClassificationResult:
    ranked: list[tuple[str, float]]
    model_id: str

    def validate(self) -> "ClassificationResult":
        if not self.ranked:
            raise OracleProtocolError("empty classification result")
        total = 0.0
        prev = float("inf")
        for label, conf in self.ranked:
            if not isinstance(label, str):
                raise OracleProtocolError("labels must be strings")
            if not (0.0 <= conf <= 1.0):
                raise OracleProtocolError(f"confidence {conf} outside [0, 1]")
            if conf > prev:
                raise OracleProtocolError("confidences not in descending order")
            prev = conf
            total += conf
        if total > 1.0 + 1e-6:
            raise OracleProtocolError(f"confidences sum to {total} > 1")
        return self

    def confidence(self, label: str) -> float:
        """Confidence of one label; 0 if truncated out of the response."""
        for name, conf in self.ranked:
            if name == label:
                return conf
        return 0.0

    def top1(self) -> tuple[str, float]:
        return self.ranked[0]


@dataclass
class OracleStats:
    queries: int = 0
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def count_query(self):
        with self._lock:
            self.queries += 1

    def count_hit(self):
        with self._lock:
            self.cache_hits += 1

    # locks cannot be copied or pickled; recreate them on the way in
    def __getstate__(self):
        return {"queries": self.queries, "cache_hits": self.cache_hits}

    def __setstate__(self, state):
        self.queries = state["queries"]
        self.cache_hits = state["cache_hits"]
        self._lock = threading.Lock()


class _CachingOracle:
    """Shared query counting and optional content-hash caching."""

    def __init__(self, cache=False):
        self.stats = OracleStats()
        self._cache: dict[int, ClassificationResult] | None = {} if cache else None
        self._cache_lock = threading.Lock()

    def _classify_uncached(self, image: Image) -> ClassificationResult:
        raise NotImplementedError

    def check_dims(self, image: Image) -> None:
        expected = (self.input_width, self.input_height, self.input_channels)
        got = (image.width, image.height, image.channels)
        if got != expected:
            raise ValueError(
                f"image dims {got} do not match model input {expected}"
            )

    def classify(self, image: Image) -> ClassificationResult:
        self.check_dims(image)
        if self._cache is None:
            self.stats.count_query()
            return self._classify_uncached(image)
        key = image_fingerprint(image)
        with self._cache_lock:
            hit = self._cache.get(key)
        if hit is not None:
            self.stats.count_hit()
            return hit
        self.stats.count_query()
        result = self._classify_uncached(image)
        with self._cache_lock:
            self._cache[key] = result
        return result

    def classify_batch(self, images: list[Image]) -> list[ClassificationResult]:
        return [self.classify(img) for img in images]

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_cache_lock", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._cache_lock = threading.Lock()


class BuiltinOracle(_CachingOracle):
    """Forward-only affine stack ending in softmax, loaded from a weight file."""

    def __init__(self, layers, labels, input_shape, model_id="aemlp:memory",
                 cache=False):
        super().__init__(cache=cache)
        self.layers = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64), act)
            for (w, b, act) in layers
        ]
        self.labels = list(labels)
        self.input_width, self.input_height, self.input_channels = input_shape
        self.model_id = model_id
        self._validate_structure()

    def _validate_structure(self):
        expected = self.input_width * self.input_height * self.input_channels
        for idx, (w, b, act) in enumerate(self.layers):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise WeightFormatError(f"layer {idx}: inconsistent shapes")
            if w.shape[1] != expected:
                raise WeightFormatError(
                    f"layer {idx}: expects {w.shape[1]} inputs, got {expected}"
                )
            if act not in (ACT_NONE, ACT_RELU):
                raise WeightFormatError(f"layer {idx}: unknown activation {act}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise WeightFormatError(f"layer {idx}: non-finite weights")
            expected = w.shape[0]
        if len(self.labels) != expected:
            raise WeightFormatError(
                f"label table has {len(self.labels)} entries, "
                f"final layer outputs {expected}"
            )

    def forward(self, flat: np.ndarray) -> np.ndarray:
        x = np.asarray(flat, dtype=np.float64)
        for w, b, act in self.layers:
            x = w @ x + b
            if act == ACT_RELU:
                x = np.maximum(x, 0.0)
        x = x - x.max()
        e = np.exp(x)
        return e / e.sum()

    def _classify_uncached(self, image: Image) -> ClassificationResult:
        probs = self.forward(image.data.reshape(-1))
        order = np.argsort(-probs, kind="stable")
        ranked = [(self.labels[i], float(probs[i])) for i in order]
        return ClassificationResult(ranked=ranked, model_id=self.model_id).validate()

    def save(self, path) -> None:
        out = bytearray(WEIGHT_MAGIC)
        out += struct.pack(
            "<III", self.input_width, self.input_height, self.input_channels
        )
        out += struct.pack("<I", len(self.labels))
        for label in self.labels:
            raw = label.encode("utf-8")
            out += struct.pack("<I", len(raw)) + raw
        out += struct.pack("<I", len(self.layers))
        for w, b, act in self.layers:
            out += struct.pack("<IIB", w.shape[0], w.shape[1], act)
            out += w.astype("<f4").tobytes()
            out += b.astype("<f4").tobytes()
        Path(path).write_bytes(bytes(out))


def load_builtin(path, cache=False) -> BuiltinOracle:
    """Load a built-in oracle from the binary weight-file format."""
    path = Path(path)
    buf = path.read_bytes()
    if buf[:8] != WEIGHT_MAGIC:
        raise WeightFormatError("bad magic bytes; not a built-in weight file")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(buf):
            raise WeightFormatError("weight file truncated in header")
        vals = struct.unpack_from(fmt, buf, pos)
        pos += size
        return vals

    input_w, input_h, channels = take("<III")
    (n_labels,) = take("<I")
    labels = []
    for _ in range(n_labels):
        (ln,) = take("<I")
        if pos + ln > len(buf):
            raise WeightFormatError("weight file truncated in label table")
        labels.append(buf[pos : pos + ln].decode("utf-8"))
        pos += ln
    (n_layers,) = take("<I")
    layers = []
    for idx in range(n_layers):
        try:
            rows, cols, act = take("<IIB")
        except WeightFormatError as exc:
            raise WeightFormatError(f"truncated before layer {idx} header") from exc
        need = (rows * cols + rows) * 4
        if pos + need > len(buf):
            raise WeightFormatError(f"weight file truncated mid-layer {idx}")
        w = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=pos)
        pos += rows * cols * 4
        b = np.frombuffer(buf, dtype="<f4", count=rows, offset=pos)
        pos += rows * 4
        layers.append((w.reshape(rows, cols).astype(np.float64),
                       b.astype(np.float64), act))
    return BuiltinOracle(
        layers, labels, (input_w, input_h, channels),
        model_id=f"aemlp:{path.name}", cache=cache,
    )


def _image_payload(image: Image) -> dict:
    return {
        "width": image.width,
        "height": image.height,
        "channels": image.channels,
        "data": image.data.reshape(-1).tolist(),
    }


def _parse_result(obj) -> ClassificationResult:
    try:
        ranked = [(c["label"], float(c["confidence"])) for c in obj["classes"]]
        model_id = obj["model_id"]
    except (KeyError, TypeError) as exc:
        raise OracleProtocolError(f"malformed classify response: {exc}") from exc
    return ClassificationResult(ranked=ranked, model_id=model_id).validate()


class RemoteOracle(_CachingOracle):
    """HTTP client for the classify wire protocol."""

    def __init__(self, endpoint, timeout=10.0, retries=3, cache=False,
                 session=None):
        super().__init__(cache=cache)
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = max(1, int(retries))
        self._session = session or requests.Session()
        self._info = None
        info = self.info()
        self.model_id = info["model_id"]
        self.input_width = info["input"]["width"]
        self.input_height = info["input"]["height"]
        self.input_channels = info["input"]["channels"]
        self.supports_batch = bool(info.get("batch", False))

    def _request(self, method, route, json_body=None):
        url = f"{self.endpoint}{route}"
        last = None
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._session.request(
                    method, url, json=json_body, timeout=self.timeout
                )
            except requests.exceptions.RequestException as exc:
                last = exc
                continue
            if 500 <= resp.status_code < 600:
                last = OracleProtocolError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise OracleProtocolError(
                    f"unexpected status {resp.status_code} from {route}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise OracleProtocolError(f"non-JSON response from {route}") from exc
        raise OracleTransportError(f"{url} unreachable: {last}", self.retries)

    def info(self) -> dict:
        if self._info is None:
            obj = self._request("GET", "/v1/info")
            try:
                obj["model_id"], obj["input"]["width"]
                obj["input"]["height"], obj["input"]["channels"]
            except (KeyError, TypeError) as exc:
                raise OracleProtocolError("malformed /v1/info response") from exc
            self._info = obj
        return self._info

    def _classify_uncached(self, image: Image) -> ClassificationResult:
        obj = self._request("POST", "/v1/classify",
                            {"image": _image_payload(image)})
        return _parse_result(obj)

    def classify_batch(self, images: list[Image]) -> list[ClassificationResult]:
        if not images:
            return []
        if not self.supports_batch or self._cache is not None:
            return [self.classify(img) for img in images]
        for img in images:
            self.check_dims(img)
        body = {"images": [_image_payload(img) for img in images]}
        obj = self._request("POST", "/v1/classify_batch", body)
        try:
            raw = obj["results"]
        except (KeyError, TypeError) as exc:
            raise OracleProtocolError("malformed batch response") from exc
        if len(raw) != len(images):
            raise OracleProtocolError(
                f"batch returned {len(raw)} results for {len(images)} images"
            )
        results = [_parse_result(r) for r in raw]
        for _ in images:
            self.stats.count_query()
        return results
