"""Execution trace: an append-only event log of every state change.

Each event snapshots the clock, call stack, active speed, and the joint and
I/O state before and after the step it describes. The log doubles as the
undo substrate for reverse execution: instruction-end events carry the
executed instruction and are consumed as they are reversed.

The on-disk form is newline-delimited JSON with a fixed field order:
i, kind, clock, stack, speed, pre_joints, post_joints, pre_bits, post_bits,
data. Bits serialize as 0/1 strings; reals use 17 significant digits so the
file round-trips bit-exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .model import SpeedLevel


class EventKind(Enum):
    INSTR_BEGIN = "instr_begin"
    INSTR_END = "instr_end"
    MOTION_SAMPLE = "motion_sample"
    IO_WRITE = "io_write"
    ERROR_SIGNALED = "error_signaled"
    RECOVERY_BEGIN = "recovery_begin"
    RECOVERY_END = "recovery_end"
    ATTEMPT_BEGIN = "attempt_begin"
    ATTEMPT_END = "attempt_end"
    SETTING_CHANGE = "setting_change"
    REVERSE_BEGIN = "reverse_begin"
    REVERSE_END = "reverse_end"


@dataclass
class TraceEvent:
    index: int
    kind: EventKind
    clock: float
    stack: tuple[tuple[str, int], ...]
    speed: SpeedLevel
    pre_joints: tuple[float, ...]
    post_joints: tuple[float, ...]
    pre_bits: tuple[bool, ...]
    post_bits: tuple[bool, ...]
    data: dict
    instruction: object = field(default=None, compare=False, repr=False)
    consumed: bool = field(default=False, compare=False)


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(x, ".17g")


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return _num(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_json_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ",".join(
            f"{json.dumps(k)}:{_json_value(value[k])}" for k in sorted(value)
        )
        return "{" + inner + "}"
    if isinstance(value, Enum):
        return json.dumps(value.value)
    raise TypeError(f"unserializable trace value: {value!r}")


def _bits(bits) -> str:
    return '"' + "".join("1" if b else "0" for b in bits) + '"'


def serialize_event(ev: TraceEvent) -> str:
    stack = "[" + ",".join(f'["{s}",{i}]' for s, i in ev.stack) + "]"
    joints_pre = "[" + ",".join(_num(j) for j in ev.pre_joints) + "]"
    joints_post = "[" + ",".join(_num(j) for j in ev.post_joints) + "]"
    return (
        "{"
        f'"i":{ev.index},'
        f'"kind":"{ev.kind.value}",'
        f'"clock":{_num(ev.clock)},'
        f'"stack":{stack},'
        f'"speed":"{ev.speed.value}",'
        f'"pre_joints":{joints_pre},'
        f'"post_joints":{joints_post},'
        f'"pre_bits":{_bits(ev.pre_bits)},'
        f'"post_bits":{_bits(ev.post_bits)},'
        f'"data":{_json_value(ev.data)}'
        "}"
    )


class ExecutionTrace:
    """In-memory event log, optionally mirrored line-by-line to a text sink."""

    def __init__(self, sink=None):
        self.events: list[TraceEvent] = []
        self.sink = sink

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)
        if self.sink is not None:
            self.sink.write(serialize_event(event) + "\n")

    def next_index(self) -> int:
        return len(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: EventKind) -> list[TraceEvent]:
        return [ev for ev in self.events if ev.kind is kind]

    def serialize(self) -> str:
        return "".join(serialize_event(ev) + "\n" for ev in self.events)


def read_trace_file(path) -> list[dict]:
    """Parse a trace file back into plain dicts (for inspection and tests)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
