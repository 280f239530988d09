"""Single-sample inference latency measurement."""

from __future__ import annotations

import csv
import io
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ..errors import TooFewSamples

MIN_SAMPLES = 100


def hardware_descriptor() -> str:
    return (f"{platform.machine()} {platform.processor() or 'unknown-cpu'} cpus={os.cpu_count()} "
            f"python={platform.python_version()} numpy={np.__version__}")


@dataclass
class LatencyReport:
    label: str
    times_ms: list[float]
    warmup: int
    hardware: str = field(default_factory=hardware_descriptor)

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.times_ms))

    @property
    def median_ms(self) -> float:
        return float(np.median(self.times_ms))

    @property
    def p95_ms(self) -> float:
        return float(np.percentile(self.times_ms, 95))

    def summary(self) -> dict:
        return {"label": self.label, "samples": len(self.times_ms), "warmup": self.warmup,
                "mean_ms": self.mean_ms, "median_ms": self.median_ms, "p95_ms": self.p95_ms,
                "hardware": self.hardware}


def latency_bench(model, samples: np.ndarray, warmup: int = 10, label: str = "",
                  min_samples: int = MIN_SAMPLES, threads: int = 1) -> LatencyReport:
    """Time batch-size-1 float32 inference over every sample after ``warmup`` untimed calls."""
    samples = np.asarray(samples, dtype=np.float32)
    if len(samples) < min_samples:
        raise TooFewSamples(f"latency needs >= {min_samples} timed samples, got {len(samples)}")
    fast = model.astype(np.float32)
    times = []
    with threadpool_limits(threads):
        for i in range(warmup):
            fast.predict(samples[i % len(samples)][None])
        for s in samples:
            x = s[None]
            t0 = time.perf_counter()
            fast.predict(x)
            times.append((time.perf_counter() - t0) * 1000.0)
    return LatencyReport(label or model.kind, times, warmup)


def latency_to_csv(reports) -> str:
    """Per-sample rows followed by a commented summary block per report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "sample", "latency_ms"])
    for r in reports:
        for i, t in enumerate(r.times_ms):
            w.writerow([r.label, i, repr(t)])
    for r in reports:
        s = r.summary()
        buf.write(f"# {r.label}: samples={s['samples']} mean_ms={s['mean_ms']:.4f} "
                  f"median_ms={s['median_ms']:.4f} p95_ms={s['p95_ms']:.4f} hardware={s['hardware']}\n")
    return buf.getvalue()
