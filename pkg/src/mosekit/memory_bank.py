"""Index-level simulation of the two memory policies.

Grounding memory at frame t holds frame 1 plus the most recent
``N_l - 1`` frames before t. Concept memory is a bounded FIFO of frame
indices fed by the scene gate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .scene_gate import GateTrace

DEFAULT_NL = 22
DEFAULT_NC = 7
PUSH_POLICIES = ("on-activation", "every-frame")


def grounding_contents(t: int, capacity: int, total: int | None = None) -> list[int]:
    """Frames in grounding memory when segmenting frame ``t``."""
    if t < 2:
        raise ValueError(f"grounding memory is defined from frame 2 on, got t={t}")
    if capacity < 2:
        raise ValueError(f"capacity must be >= 2, got {capacity}")
    if total is not None and t > total:
        raise ValueError(f"t={t} exceeds the video length {total}")
    return [1, *range(max(2, t - capacity + 1), t)]


@dataclass(frozen=True)
class ConceptMemoryState:
    capacity: int
    queue: tuple[int, ...] = ()
    evicted: int | None = None  # frame dropped by the push that produced this state

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if len(self.queue) > self.capacity:
            raise ValueError("queue longer than capacity")


def concept_push(state: ConceptMemoryState, frame: int) -> ConceptMemoryState:
    if state.queue and frame <= state.queue[-1]:
        raise ValueError(f"frame {frame} is not newer than queued frame {state.queue[-1]}")
    queue = state.queue + (frame,)
    evicted = None
    if len(queue) > state.capacity:
        evicted, queue = queue[0], queue[1:]
    return ConceptMemoryState(state.capacity, queue, evicted)


@dataclass(frozen=True)
class MemorySnapshot:
    t: int
    grounding: tuple[int, ...]
    concept: tuple[int, ...]
    active: bool
    evicted: int | None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "grounding": list(self.grounding),
            "concept": list(self.concept),
            "active": self.active,
            "evicted": self.evicted,
        }


@dataclass(frozen=True)
class MemoryTrace:
    nl: int
    nc: int
    push_policy: str
    snapshots: tuple[MemorySnapshot, ...]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict(), separators=(",", ":")) + "\n" for s in self.snapshots)

    @property
    def evictions(self) -> list[int]:
        return [s.evicted for s in self.snapshots if s.evicted is not None]


def simulate(
    frame_count: int,
    nl: int = DEFAULT_NL,
    nc: int = DEFAULT_NC,
    gate: GateTrace | Sequence[bool] | None = None,
    push_policy: str = "on-activation",
) -> MemoryTrace:
    """Replay both memories over ``frame_count`` frames.

    Frame 1 enters the concept FIFO before anything else. After that, frame t
    is pushed when the gate is active at t (``"on-activation"``) or
    unconditionally (``"every-frame"``). Frame 1 has no grounding memory.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    if nl < 2:
        raise ValueError(f"nl must be >= 2, got {nl}")
    if push_policy not in PUSH_POLICIES:
        raise ValueError(f"push_policy must be one of {PUSH_POLICIES}, got {push_policy!r}")
    if gate is None:
        flags = [False] * frame_count
    elif isinstance(gate, GateTrace):
        flags = [s.active for s in gate.steps]
    else:
        flags = [bool(a) for a in gate]
    if len(flags) != frame_count:
        raise ValueError(f"gate covers {len(flags)} frames, expected {frame_count}")

    state = concept_push(ConceptMemoryState(nc), 1)
    snapshots = [MemorySnapshot(1, (), state.queue, False, None)]
    for t in range(2, frame_count + 1):
        active = flags[t - 1]
        evicted = None
        if active or push_policy == "every-frame":
            state = concept_push(state, t)
            evicted = state.evicted
        snapshots.append(MemorySnapshot(t, tuple(grounding_contents(t, nl)), state.queue, active, evicted))
    return MemoryTrace(nl, nc, push_policy, tuple(snapshots))
