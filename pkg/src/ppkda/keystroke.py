"""Keystroke event model, template statistics, and a synthetic generator.

Only the dwell time (key held duration) is used as the per-key feature.
The reference template holds per-key sample mean and sample standard
deviation (divisor m - 1); keys with fewer than two samples or zero
spread are excluded and reported.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidEvent, MalformedPayload, ZeroSigma

EVENT_LOG_HEADER = "key,down_ms,up_ms"


@dataclass(frozen=True)
class KeyEvent:
    key_index: int
    t_down: int
    t_up: int


def dwell_time(event: KeyEvent) -> int:
    """Duration the key was held, in milliseconds."""
    if event.t_up <= event.t_down:
        raise InvalidEvent(f"t_up must exceed t_down, got {event.t_down}..{event.t_up}")
    return event.t_up - event.t_down


@dataclass(frozen=True)
class KeyStats:
    mean: float
    stddev: float
    sample_count: int


@dataclass
class ReferenceTemplate:
    stats: dict[int, KeyStats] = field(default_factory=dict)
    excluded: dict[int, str] = field(default_factory=dict)

    @property
    def keys(self) -> list[int]:
        return sorted(self.stats)


def build_template(events: list[KeyEvent]) -> ReferenceTemplate:
    """Per-key mean and sample stddev over dwell times.

    Keys with fewer than 2 samples, or with all samples identical
    (stddev 0, which the distance is undefined for), are excluded and
    listed in ``template.excluded`` with a reason.
    """
    samples: dict[int, list[int]] = {}
    for event in events:
        samples.setdefault(event.key_index, []).append(dwell_time(event))

    template = ReferenceTemplate()
    for key, dwells in sorted(samples.items()):
        m = len(dwells)
        if m < 2:
            template.excluded[key] = "fewer than 2 samples"
            continue
        mean = sum(dwells) / m
        var = sum((d - mean) ** 2 for d in dwells) / (m - 1)
        stddev = math.sqrt(var)
        if stddev == 0.0:
            template.excluded[key] = "zero standard deviation"
            continue
        template.stats[key] = KeyStats(mean=mean, stddev=stddev, sample_count=m)
    return template


def smd(t: float, mean: float, stddev: float) -> float:
    """Scaled Manhattan distance |t - mean| / stddev."""
    if stddev <= 0:
        raise ZeroSigma("distance undefined for zero standard deviation")
    return abs(t - mean) / stddev


@dataclass(frozen=True)
class GeneratorProfile:
    """Per-key ground-truth dwell distribution for synthetic typists."""

    means: tuple[float, ...]
    stddevs: tuple[float, ...]
    seed: int

    @property
    def n_keys(self) -> int:
        return len(self.means)

    @classmethod
    def random(cls, n_keys: int, seed: int,
               mean_range: tuple[float, float] = (60.0, 180.0),
               stddev_range: tuple[float, float] = (5.0, 25.0)) -> "GeneratorProfile":
        rng = random.Random(seed)
        means = tuple(rng.uniform(*mean_range) for _ in range(n_keys))
        stddevs = tuple(rng.uniform(*stddev_range) for _ in range(n_keys))
        return cls(means=means, stddevs=stddevs, seed=seed)


def synthesize(profile: GeneratorProfile, length: int, stream_seed: int | None = None) -> list[KeyEvent]:
    """Deterministic synthetic typing stream.

    Key order is uniform; dwell is Gaussian per the profile, truncated
    at 1 ms; down-times advance monotonically with a uniform gap.
    """
    rng = random.Random(profile.seed if stream_seed is None else stream_seed)
    events = []
    clock = 0
    for _ in range(length):
        key = rng.randrange(profile.n_keys)
        dwell = max(1, round(rng.gauss(profile.means[key], profile.stddevs[key])))
        clock += rng.randint(30, 120)
        events.append(KeyEvent(key_index=key, t_down=clock, t_up=clock + dwell))
        clock += dwell
    return events


def write_event_log(path: str | Path, events: list[KeyEvent]) -> None:
    lines = [EVENT_LOG_HEADER]
    lines += [f"{e.key_index},{e.t_down},{e.t_up}" for e in events]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_event_log(path: str | Path) -> list[KeyEvent]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != EVENT_LOG_HEADER:
        raise MalformedPayload(f"event log must start with header '{EVENT_LOG_HEADER}'")
    events = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise MalformedPayload(f"bad event line: {ln!r}")
        try:
            key, down, up = (int(p) for p in parts)
        except ValueError as exc:
            raise MalformedPayload(f"bad event line: {ln!r}") from exc
        events.append(KeyEvent(key_index=key, t_down=down, t_up=up))
    return events
