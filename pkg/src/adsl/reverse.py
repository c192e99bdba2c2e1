"""Reverse execution over recorded traces.

Instructions fall into three reversibility categories: always reversible
(I/O toggles, waits), reversible only after forward execution (moves, which
restore the recorded pre-step joints), and never reversible. Annotations
override the defaults, and `@barrier` marks a point reversal may not cross.

Reversal walks the recorded trace backwards, not the static program text:
dynamic detours such as recoveries and retried attempts are undone exactly
as they happened. Each reversed entry is consumed so that a later, deeper
reversal continues past it instead of undoing it twice. Before undoing an
entry, lasting settings (the active speed) are restored to the value the
trace recorded at that point.

When an error without a recovery sequence recurs, `recover_by_reversal`
backs up further each time, by a linear or exponential schedule, and resumes
forward execution at the earliest instruction it undid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .model import (
    AdvMoveRef,
    Barrier,
    Call,
    Instruction,
    Io,
    MoveJoint,
    NonReversible,
    Program,
    ReverseWith,
    SeqCall,
    SetHigh,
    SetLow,
    SkipOnReverse,
    SpeedLevel,
    Wait,
)
from .trace import EventKind, ExecutionTrace, TraceEvent


class ReversibilityClass(Enum):
    ALWAYS_REVERSIBLE = "always_reversible"
    KINEMATIC_REVERSIBLE = "kinematic_reversible"
    NEVER_REVERSIBLE = "never_reversible"


class StopReason(Enum):
    DEPTH_REACHED = "depth_reached"
    BARRIER = "barrier"
    TRACE_START = "trace_start"
    NEVER_REVERSIBLE_HIT = "never_reversible_hit"


class NotReversible(RuntimeError):
    """No reverse counterpart exists for the requested entry."""


class RecoveryImpossible(RuntimeError):
    """Reversal-based recovery cannot make further progress."""


# ---------------------------------------------------------------------------
# Classification


def classify(instr: Instruction, registry=None) -> ReversibilityClass:
    """Reversibility category of an instruction, annotations included."""
    ann = instr.annotation
    if isinstance(ann, NonReversible):
        return ReversibilityClass.NEVER_REVERSIBLE
    if isinstance(ann, (ReverseWith, SkipOnReverse)):
        return ReversibilityClass.ALWAYS_REVERSIBLE
    if isinstance(instr, (Io, Wait, SeqCall)):
        return ReversibilityClass.ALWAYS_REVERSIBLE
    if isinstance(instr, (MoveJoint, AdvMoveRef)):
        return ReversibilityClass.KINEMATIC_REVERSIBLE
    assert isinstance(instr, Call)
    if registry is not None and registry.has_reverse(instr.action):
        return ReversibilityClass.ALWAYS_REVERSIBLE
    return ReversibilityClass.NEVER_REVERSIBLE


# ---------------------------------------------------------------------------
# Counterparts


@dataclass(frozen=True)
class NoOpStep:
    pass


@dataclass(frozen=True)
class WaitStep:
    seconds: float


@dataclass(frozen=True)
class JointRestore:
    joints: tuple[float, ...]


@dataclass(frozen=True)
class IoInversion:
    primitives: tuple


@dataclass(frozen=True)
class RunInstruction:
    instruction: Instruction


@dataclass(frozen=True)
class ReverseAction:
    action: str
    items: tuple[str, ...]
    fn: object = field(compare=False, repr=False)


ReverseStep = Union[
    NoOpStep, WaitStep, JointRestore, IoInversion, RunInstruction, ReverseAction
]


def invert_primitives(primitives) -> tuple:
    """Undo list for an I/O primitive sequence.

    Writes are undone in reverse order with their levels inverted; each
    write keeps its select and trailing sleeps so the committed shape stays
    executable.
    """
    groups: list[list] = []
    current: list = []
    for prim in primitives:
        if isinstance(prim, (SetLow, SetHigh)) and current:
            groups.append(current)
            current = []
        current.append(prim)
    if current:
        groups.append(current)
    out = []
    for group in reversed(groups):
        for prim in group:
            if isinstance(prim, SetLow):
                out.append(SetHigh())
            elif isinstance(prim, SetHigh):
                out.append(SetLow())
            else:
                out.append(prim)
    return tuple(out)


def reverse_counterpart(entry: TraceEvent, program: Program, registry=None) -> ReverseStep:
    """Build the undo step for a recorded instruction entry.

    Moves restore the recorded pre-step joints and never re-apply guarded
    forces; I/O runs its inverted primitive list; waits wait again (the
    clock only moves forward).
    """
    instr = entry.instruction
    ann = instr.annotation
    if isinstance(ann, NonReversible):
        raise NotReversible(f"{type(instr).__name__} marked nonreversible")
    if isinstance(ann, SkipOnReverse):
        return NoOpStep()
    if isinstance(ann, ReverseWith):
        return RunInstruction(ann.instruction)
    if isinstance(instr, Io):
        op = program.io_ops[instr.op]
        return IoInversion(invert_primitives(op.primitives))
    if isinstance(instr, Wait):
        return WaitStep(instr.seconds)
    if isinstance(instr, (MoveJoint, AdvMoveRef)):
        return JointRestore(tuple(entry.pre_joints))
    if isinstance(instr, Call):
        if registry is not None:
            found = registry.lookup(instr.action)
            if found is not None and found.reverse is not None:
                return ReverseAction(instr.action, instr.items, found.reverse)
        raise NotReversible(f"call '{instr.action}' has no registered reverse")
    raise NotReversible(f"no counterpart for {type(instr).__name__}")


def _execute_step(step: ReverseStep, ctx) -> None:
    if isinstance(step, NoOpStep):
        return
    if isinstance(step, WaitStep):
        ctx.advance_clock(step.seconds)
    elif isinstance(step, JointRestore):
        ctx.move_joints_to(step.joints)
    elif isinstance(step, IoInversion):
        ctx.apply_primitives(step.primitives)
    elif isinstance(step, RunInstruction):
        ctx.run_basic_instruction(step.instruction)
    else:
        assert isinstance(step, ReverseAction)
        step.fn(ctx, step.items)


# ---------------------------------------------------------------------------
# Trace walking


@dataclass(frozen=True)
class PlanStep:
    trace_index: int
    step: ReverseStep
    restore_speed: SpeedLevel


@dataclass(frozen=True)
class ReversePlan:
    steps: tuple[PlanStep, ...]
    stop_reason: StopReason
    stop_index: Optional[int] = None


def _prev_instruction_entry(trace: ExecutionTrace, cursor: int) -> Optional[TraceEvent]:
    events = trace.events
    while cursor >= 0:
        ev = events[cursor]
        if (
            ev.kind is EventKind.INSTR_END
            and not ev.consumed
            and ev.instruction is not None
        ):
            return ev
        cursor -= 1
    return None


def reverse_execute(
    trace: ExecutionTrace,
    depth: Optional[int],
    ctx,
    registry=None,
    info: Optional[dict] = None,
) -> ReversePlan:
    """Undo up to `depth` recorded instructions, newest first.

    `depth=None` reverses as far as the trace allows. The walk halts early
    at a barrier annotation, a never-reversible entry, or the start of the
    unconsumed trace, and the stop reason is recorded in the plan and in the
    closing trace event. Sequence-call brackets are not counted; their
    children are undone individually unless the call itself is annotated.
    """
    limit = math.inf if depth is None else depth
    cursor = len(trace.events) - 1
    data = {"depth": "full" if depth is None else depth}
    if info:
        data.update(info)
    ctx.emit(EventKind.REVERSE_BEGIN, data=data)

    steps: list[PlanStep] = []
    stop = StopReason.TRACE_START
    stop_index: Optional[int] = None
    while True:
        if len(steps) >= limit:
            stop = StopReason.DEPTH_REACHED
            break
        entry = _prev_instruction_entry(trace, cursor)
        if entry is None:
            stop = StopReason.TRACE_START
            break
        instr = entry.instruction
        if isinstance(instr.annotation, Barrier):
            stop = StopReason.BARRIER
            stop_index = entry.index
            break
        if isinstance(instr, SeqCall):
            if classify(instr, registry) is ReversibilityClass.NEVER_REVERSIBLE:
                stop = StopReason.NEVER_REVERSIBLE_HIT
                stop_index = entry.index
                break
            # Plain bracket: descend into the recorded children.
            cursor = entry.index - 1
            continue
        if classify(instr, registry) is ReversibilityClass.NEVER_REVERSIBLE:
            stop = StopReason.NEVER_REVERSIBLE_HIT
            stop_index = entry.index
            break
        ctx.set_active_speed(entry.speed, "reverse restore")
        step = reverse_counterpart(entry, ctx.program, registry)
        _execute_step(step, ctx)
        entry.consumed = True
        steps.append(PlanStep(entry.index, step, entry.speed))
        cursor = entry.index - 1

    ctx.emit(
        EventKind.REVERSE_END,
        data={
            "stop_reason": stop.value,
            "indices": [s.trace_index for s in steps],
            "count": len(steps),
        },
    )
    return ReversePlan(tuple(steps), stop, stop_index)


# ---------------------------------------------------------------------------
# Progressive reverse-then-resume recovery


class PolicyMode(Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


@dataclass
class ResumePolicy:
    """How far to reverse when the same error keeps recurring."""

    mode: PolicyMode = PolicyMode.LINEAR
    base_depth: int = 1
    counts: dict[str, int] = field(default_factory=dict)

    def next_occurrence(self, name: str) -> int:
        self.counts[name] = self.counts.get(name, 0) + 1
        return self.counts[name]

    def depth_for(self, occurrence: int) -> int:
        if self.mode is PolicyMode.LINEAR:
            return self.base_depth * occurrence
        return self.base_depth * (2 ** (occurrence - 1))


@dataclass(frozen=True)
class ResumeDecision:
    #: Call-stack snapshot of the earliest undone instruction, or None when
    #: nothing was undone (re-execute from the signaling site).
    resume_stack: Optional[tuple]
    plan: ReversePlan


def recover_by_reversal(name: str, ctx, policy: ResumePolicy, registry=None) -> ResumeDecision:
    """Reverse per the policy's depth for this occurrence, then resume.

    Raises RecoveryImpossible when the reversal saturates against the same
    barrier or never-reversible boundary twice in a row, or when the error
    keeps recurring against a boundary past the occurrence cap.
    """
    occurrence = policy.next_occurrence(name)
    depth = policy.depth_for(occurrence)
    plan = reverse_execute(
        ctx.trace,
        depth,
        ctx,
        registry=registry,
        info={"error": name, "occurrence": occurrence, "policy": policy.mode.value},
    )
    if plan.stop_reason in (StopReason.BARRIER, StopReason.NEVER_REVERSIBLE_HIT):
        if occurrence > ctx.options.max_reversal_occurrences:
            raise RecoveryImpossible(
                f"error '{name}' recurred {occurrence} times against an irreversible boundary"
            )
        marker = (plan.stop_reason, plan.stop_index)
        if ctx.saturation_markers.get(name) == marker:
            raise RecoveryImpossible(
                f"reversal for error '{name}' blocked at the same boundary twice"
            )
        ctx.saturation_markers[name] = marker
    else:
        ctx.saturation_markers.pop(name, None)

    if plan.steps:
        resume_stack = ctx.trace.events[plan.steps[-1].trace_index].stack
    else:
        resume_stack = None
    return ResumeDecision(resume_stack, plan)
