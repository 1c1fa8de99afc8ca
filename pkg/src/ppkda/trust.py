"""Plaintext trust engine: the behavioral oracle the encrypted path is checked against.

The trust level C starts at its maximum.  Each keystroke either lowers
it by how far the distance exceeded the threshold (penalty) or raises
it by a constant reward, clamped at the maximum.  The user is rejected
once C falls past the lockout threshold.

Two variants live here: the real-valued engine, and a quantized twin
over fixed-point integers that mirrors the encrypted pipeline bit for
bit (including its reject-on-equality convention, see
``QuantizedTrustParams``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import keystroke
from .errors import InvalidParams, RangeOverflow, SteppedAfterReject
from .fixedpoint import FixedPointParams, encode


class Decision(enum.Enum):
    ACTIVE = "active"
    REJECTED = "rejected"


@dataclass(frozen=True)
class TrustParams:
    max_trust: float = 100.0
    reward: float = 1.0
    dist_threshold: float = 1.5
    reject_threshold: float = 90.0

    def __post_init__(self) -> None:
        if not 0 < self.reject_threshold < self.max_trust:
            raise InvalidParams("need 0 < reject_threshold < max_trust")
        if self.reward <= 0:
            raise InvalidParams("reward must be positive")
        if self.dist_threshold <= 0:
            raise InvalidParams("dist_threshold must be positive")


@dataclass(frozen=True)
class TrustState:
    level: float
    decision: Decision = Decision.ACTIVE


def init(params: TrustParams) -> TrustState:
    return TrustState(level=params.max_trust)


def step(state: TrustState, d: float, params: TrustParams,
         reject_on_equal: bool = False) -> TrustState:
    """One keystroke update of the trust level.

    Penalty when d strictly exceeds the distance threshold (a tie takes
    the reward branch); the penalty is exactly d - threshold, so C may
    drift below the lockout value and below zero.

    ``reject_on_equal`` selects the lockout convention: by default the
    user is rejected when C < reject_threshold; the encrypted pipeline
    rejects when C <= reject_threshold, and the quantized twin follows
    it.
    """
    if state.decision is Decision.REJECTED:
        raise SteppedAfterReject("session already rejected")
    if d < 0:
        raise InvalidParams("distance must be non-negative")
    if d > params.dist_threshold:
        level = state.level - d + params.dist_threshold
    else:
        level = min(state.level + params.reward, params.max_trust)
    rejected = level <= params.reject_threshold if reject_on_equal \
        else level < params.reject_threshold
    return TrustState(level=level, decision=Decision.REJECTED if rejected else Decision.ACTIVE)


@dataclass(frozen=True)
class StepRecord:
    event_idx: int
    key_index: int
    distance: float
    level: float
    decision: Decision


@dataclass
class TrustTrace:
    records: list[StepRecord] = field(default_factory=list)
    skipped: int = 0

    @property
    def final_decision(self) -> Decision:
        return self.records[-1].decision if self.records else Decision.ACTIVE

    @property
    def rejection_index(self) -> int | None:
        for rec in self.records:
            if rec.decision is Decision.REJECTED:
                return rec.event_idx
        return None

    def to_csv(self) -> str:
        lines = ["event_idx,key,d_i,C,decision"]
        lines += [f"{r.event_idx},{r.key_index},{r.distance},{r.level},{r.decision.value}"
                  for r in self.records]
        return "\n".join(lines) + "\n"


def run(events: list[keystroke.KeyEvent], template: keystroke.ReferenceTemplate,
        params: TrustParams, reject_on_equal: bool = False) -> TrustTrace:
    """Apply the engine over a whole event stream, stopping at rejection.

    Events for keys absent from the template are skipped and counted.
    """
    trace = TrustTrace()
    state = init(params)
    for idx, event in enumerate(events):
        stats = template.stats.get(event.key_index)
        if stats is None:
            trace.skipped += 1
            continue
        d = keystroke.smd(keystroke.dwell_time(event), stats.mean, stats.stddev)
        state = step(state, d, params, reject_on_equal=reject_on_equal)
        trace.records.append(StepRecord(
            event_idx=idx, key_index=event.key_index, distance=d,
            level=state.level, decision=state.decision))
        if state.decision is Decision.REJECTED:
            break
    return trace


# --- quantized twin -------------------------------------------------------

@dataclass(frozen=True)
class QuantizedTrustParams:
    """Trust parameters scaled into the fixed-point integer domain.

    The reject rule is C <= reject_q (the encrypted pipeline rejects
    when C is not strictly greater than the lockout threshold).
    """

    max_q: int
    reward_q: int
    dist_q: int
    reject_q: int
    fp: FixedPointParams

    @classmethod
    def from_params(cls, params: TrustParams, fp: FixedPointParams) -> "QuantizedTrustParams":
        return cls(
            max_q=encode(params.max_trust, fp),
            reward_q=encode(params.reward, fp),
            dist_q=encode(params.dist_threshold, fp),
            reject_q=encode(params.reject_threshold, fp),
            fp=fp,
        )


@dataclass(frozen=True)
class QuantizedTrustState:
    level_q: int
    decision: Decision = Decision.ACTIVE


def init_quantized(qparams: QuantizedTrustParams) -> QuantizedTrustState:
    return QuantizedTrustState(level_q=qparams.max_q)


def step_quantized(state: QuantizedTrustState, d_q: int,
                   qparams: QuantizedTrustParams) -> QuantizedTrustState:
    """Integer twin of ``step``; must match the encrypted trace exactly."""
    if state.decision is Decision.REJECTED:
        raise SteppedAfterReject("session already rejected")
    if d_q < 0:
        raise InvalidParams("quantized distance must be non-negative")
    if d_q > qparams.dist_q:
        level = state.level_q - d_q + qparams.dist_q
    else:
        # Reward clamp mirrors the encrypted comparison: clamp only when
        # C + R strictly exceeds max (equality keeps the sum, same value).
        candidate = state.level_q + qparams.reward_q
        level = qparams.max_q if candidate > qparams.max_q else candidate
    if abs(level) >= qparams.fp.max_magnitude:
        raise RangeOverflow("quantized trust level left the signed fixed-point range")
    rejected = level <= qparams.reject_q
    return QuantizedTrustState(level_q=level,
                               decision=Decision.REJECTED if rejected else Decision.ACTIVE)


def quantized_distance(dwell: int, stats: keystroke.KeyStats, fp: FixedPointParams) -> int:
    """The distance the encrypted pipeline actually computes.

    The client scales an already-encoded 1/sigma by the integer dwell
    time, so the quantized distance is |dwell * encode(1/sigma) -
    encode(mean/sigma)|, not encode(|dwell - mean| / sigma).
    """
    inv_sigma_q = encode(1.0 / stats.stddev, fp)
    mu_over_sigma_q = encode(stats.mean / stats.stddev, fp)
    return abs(dwell * inv_sigma_q - mu_over_sigma_q)
