"""Wire-protocol conformance checks for classification endpoints.

Runs against any server implementing /v1/info, /v1/classify, and
/v1/classify_batch, and optionally compares its distributions against a
reference oracle (e.g. the built-in backend for a shared fixture model).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import requests

from .imaging import Image
from .oracle import OracleError, RemoteOracle


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _random_image(rng, width, height, channels) -> Image:
    return Image(rng.integers(0, 256, size=(height, width, channels)).astype(float))


def run_conformance(endpoint, reference=None, n_random=20, seed=0,
                    timeout=10.0) -> list[CheckResult]:
    results: list[CheckResult] = []
    rng = np.random.default_rng(seed)

    def check(name, fn):
        try:
            detail = fn() or ""
            results.append(CheckResult(name, True, detail))
        except (AssertionError, OracleError, requests.RequestException) as exc:
            results.append(CheckResult(name, False, str(exc)))

    try:
        oracle = RemoteOracle(endpoint, timeout=timeout, retries=1)
    except OracleError as exc:
        return [CheckResult("info probe", False, str(exc))]
    results.append(CheckResult(
        "info probe", True,
        f"model_id={oracle.model_id} input={oracle.input_width}x"
        f"{oracle.input_height}x{oracle.input_channels} "
        f"batch={oracle.supports_batch}",
    ))
    shape = (oracle.input_width, oracle.input_height, oracle.input_channels)
    img = _random_image(rng, *shape)

    def classify_valid():
        res = oracle.classify(img)  # invariants enforced in the client
        assert res.ranked, "empty distribution"

    check("classify returns a valid distribution", classify_valid)

    def deterministic():
        a, b = oracle.classify(img), oracle.classify(img)
        assert a.ranked == b.ranked, "identical requests returned different results"

    check("identical requests are deterministic", deterministic)

    def batch_equivalence():
        imgs = [_random_image(rng, *shape) for _ in range(4)]
        singles = [oracle.classify(im) for im in imgs]
        batched = oracle.classify_batch(imgs)
        assert len(batched) == len(imgs), "batch result count mismatch"
        for s, b in zip(singles, batched):
            assert len(s.ranked) == len(b.ranked), "rank length mismatch"
            for (sl, sc), (bl, bc) in zip(s.ranked, b.ranked):
                assert sl == bl and abs(sc - bc) <= 1e-9, \
                    f"batch/single divergence on {sl!r}"

    check("batch and single classification agree", batch_equivalence)

    def malformed_rejected():
        resp = requests.post(f"{endpoint.rstrip('/')}/v1/classify",
                             json={"not_an_image": 1}, timeout=timeout)
        assert resp.status_code == 400, \
            f"malformed body answered {resp.status_code}, expected 400"

    check("malformed body rejected with 400", malformed_rejected)

    if reference is not None:
        def matches_reference():
            worst = 0.0
            for _ in range(n_random):
                im = _random_image(rng, *shape)
                remote = dict(oracle.classify(im).ranked)
                local = dict(reference.classify(im).ranked)
                labels = set(remote) | set(local)
                for label in labels:
                    worst = max(worst, abs(remote.get(label, 0.0)
                                           - local.get(label, 0.0)))
            assert worst <= 1e-6, f"max confidence gap {worst} > 1e-6"
            return f"max gap {worst:.2e} over {n_random} images"

        check("distributions match the reference oracle", matches_reference)
    return results


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        suffix = f" - {r.detail}" if r.detail else ""
        lines.append(f"[{mark}] {r.name}{suffix}")
    total = sum(r.passed for r in results)
    lines.append(f"{total}/{len(results)} conformance checks passed")
    return "\n".join(lines)
