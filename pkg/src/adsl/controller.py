"""Program execution against a workcell.

The controller interprets a validated program: it runs the entry sequence
instruction by instruction, drives motion through the workcell simulation,
executes guarded moves with their stop conditions, evaluation queries and
failure behaviors, and manages signaled errors.

Error handling follows the declaration of the signaled error. The
`respond_after` field gates when handling starts (immediately, after the
current instruction, or after the innermost sequence finishes), the optional
recovery sequence then runs with nested errors treated as fatal, and
`return_to` picks where forward execution resumes. Errors declared without a
recovery sequence are delegated to the reverse-execution engine, which
unwinds the recorded trace and resumes.

Every state change is recorded in an `ExecutionTrace`; runs with the same
program, workcell config, and seed produce byte-identical traces.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import reverse as reverse_engine
from .model import (
    AdvMoveRef,
    AdvMoveSpec,
    Call,
    Comparison,
    ForcesExceed,
    Instruction,
    Io,
    MoveJoint,
    Program,
    Query,
    RepeatWithPerturbation,
    RespondAfter,
    ReturnTo,
    ReturnToInitialPosition,
    SelectBit,
    SeqCall,
    SetHigh,
    SetLow,
    Sleep,
    SpeedLevel,
    ThrowError,
    Wait,
)
from .printer import format_instruction
from .reverse import RecoveryImpossible, ResumePolicy
from .trace import EventKind, ExecutionTrace, TraceEvent
from .workcell import (
    BitOutOfRange,
    Pose,
    Workcell,
    WorkcellConfig,
    DEFAULT_SPEED,
)

logger = logging.getLogger("adsl")


# ---------------------------------------------------------------------------
# Outcomes and results


@dataclass(frozen=True)
class Success:
    pass


@dataclass(frozen=True)
class Fail:
    failed_queries: tuple[str, ...]

    def __post_init__(self):
        assert self.failed_queries, "a failed attempt must name what failed"


@dataclass(frozen=True)
class StoppedByGuard:
    covered: float


AttemptOutcome = Union[Success, Fail, StoppedByGuard]


@dataclass(frozen=True)
class RunStats:
    instructions: int
    errors: int
    recoveries: int
    simulated_time: float


@dataclass(frozen=True)
class RunResult:
    completed: bool
    reason: Optional[str]
    stats: RunStats


@dataclass
class ControllerOptions:
    max_call_depth: int = 32
    max_resume_retries: int = 5
    #: How return_to=sequence resumes: "resume" continues after the failed
    #: instruction, "restart" re-runs the enclosing sequence from the top.
    return_to_sequence: str = "resume"
    resume_policy: ResumePolicy = field(default_factory=ResumePolicy)
    max_reversal_occurrences: int = 5
    record_motion_samples: bool = True


# ---------------------------------------------------------------------------
# Action registry for `call` instructions


@dataclass(frozen=True)
class ActionEntry:
    run: Callable
    reverse: Optional[Callable] = None


class ActionRegistry:
    """Name-to-callback table backing `call` instructions.

    Callbacks receive (ctx, items). A registered reverse callback makes the
    call undoable during reverse execution.
    """

    def __init__(self):
        self._table: dict[str, ActionEntry] = {}

    def register(self, name: str, fn: Callable, reverse: Optional[Callable] = None):
        self._table[name] = ActionEntry(fn, reverse)

    def lookup(self, name: str) -> Optional[ActionEntry]:
        return self._table.get(name)

    def has_reverse(self, name: str) -> bool:
        entry = self._table.get(name)
        return entry is not None and entry.reverse is not None


def _noop_action(ctx, items):
    pass


def _log_action(ctx, items):
    logger.info("log action: %s", ", ".join(items) if items else "(no items)")


def default_registry() -> ActionRegistry:
    reg = ActionRegistry()
    reg.register("noop", _noop_action, reverse=_noop_action)
    reg.register("log", _log_action)
    return reg


# ---------------------------------------------------------------------------
# Query evaluation


def evaluate_query(query: Query, covered: float, filtered: float) -> bool:
    """Decide a query against an attempt's covered distance and filtered force.

    All comparisons are strict.
    """
    if isinstance(query, ForcesExceed):
        return filtered > query.threshold
    if query.cmp is Comparison.MORE_THAN:
        return covered > query.value
    return covered < query.value


def _describe_query(query: Query) -> str:
    if isinstance(query, ForcesExceed):
        return f"forces_exceed({query.threshold})"
    return f"distance_covered({query.cmp.value}, {query.value})"


# ---------------------------------------------------------------------------
# Internal control flow


class _AbortRun(Exception):
    """Unrecoverable condition; unwinds to run() and yields Aborted."""


class _ErrorUnwind(Exception):
    """Carries an error record out of an instruction for immediate response."""

    def __init__(self, record):
        super().__init__(record.name)
        self.record = record


class MotionBlocked(RuntimeError):
    """An unguarded move ran into a solid and cannot advance."""


@dataclass
class _PendingError:
    name: str
    site: tuple[tuple[str, int], ...]
    respond: RespondAfter
    bound_frame: object


class Frame:
    __slots__ = ("seq", "index", "entry_joints", "entry_bits")

    def __init__(self, seq: str, index: int = 0, entry_joints=(), entry_bits=()):
        self.seq = seq
        self.index = index
        self.entry_joints = entry_joints
        self.entry_bits = entry_bits

    def __repr__(self):
        return f"Frame({self.seq!r}, {self.index})"


# ---------------------------------------------------------------------------
# Execution context


class ExecutionContext:
    """Everything live during a run: workcell, rng, trace, and error state.

    The reverse engine drives the same context through the motion and I/O
    helpers below, so forward and backward execution share one code path for
    state changes.
    """

    def __init__(self, program, workcell, rng, trace, options, registry):
        self.program: Program = program
        self.workcell: Workcell = workcell
        self.rng: random.Random = rng
        self.trace: ExecutionTrace = trace
        self.options: ControllerOptions = options
        self.registry: ActionRegistry = registry
        self.error_counts: dict[str, int] = {}
        self.saturation_markers: dict[str, tuple] = {}
        self.active_speed: SpeedLevel = DEFAULT_SPEED
        self.in_recovery: bool = False
        self.frame_chain: list[list[Frame]] = []
        self.controller = None

    # -- snapshots ----------------------------------------------------------

    def call_stack(self) -> tuple[tuple[str, int], ...]:
        return tuple(
            (f.seq, f.index) for frames in self.frame_chain for f in frames
        )

    def emit(
        self,
        kind: EventKind,
        data: Optional[dict] = None,
        instruction=None,
        pre_joints=None,
        post_joints=None,
        pre_bits=None,
        post_bits=None,
    ) -> TraceEvent:
        state = self.workcell.state
        joints = state.joints
        bits = state.bits()
        event = TraceEvent(
            index=self.trace.next_index(),
            kind=kind,
            clock=state.clock,
            stack=self.call_stack(),
            speed=self.active_speed,
            pre_joints=pre_joints if pre_joints is not None else joints,
            post_joints=post_joints if post_joints is not None else joints,
            pre_bits=pre_bits if pre_bits is not None else bits,
            post_bits=post_bits if post_bits is not None else bits,
            data=data if data is not None else {},
            instruction=instruction,
        )
        self.trace.append(event)
        return event

    # -- state-change helpers -------------------------------------------------

    def advance_clock(self, seconds: float) -> None:
        self.workcell.state.clock += seconds

    def speed_value(self, level: Optional[SpeedLevel] = None) -> float:
        return self.workcell.speed_value(level or self.active_speed)

    def set_active_speed(self, level: SpeedLevel, why: str) -> None:
        if level is not self.active_speed:
            self.emit(EventKind.SETTING_CHANGE, data={"speed": level.value, "why": why})
            self.active_speed = level

    def move_to_pose(self, target: Pose, speed: Optional[float] = None) -> None:
        """Drive the TCP to `target`; a blocking solid raises MotionBlocked."""
        workcell = self.workcell
        if speed is None:
            speed = self.speed_value()
        record = self.options.record_motion_samples
        while True:
            pose = workcell.tcp_pose()
            if pose.position == target.position and pose.orientation == target.orientation:
                return
            pre_j = workcell.state.joints
            pre_b = workcell.state.bits()
            contact, advanced = workcell.step_motion(target, speed)
            if record:
                self.emit(
                    EventKind.MOTION_SAMPLE,
                    data={"advanced": advanced, "contact": contact},
                    pre_joints=pre_j,
                    pre_bits=pre_b,
                )
            if contact and advanced <= 1e-15:
                raise MotionBlocked(
                    f"blocked at {workcell.tcp_pose().position} moving to {target.position}"
                )

    def move_joints_to(self, joints, speed_level: Optional[SpeedLevel] = None) -> None:
        target = self.workcell.model.fk(tuple(joints))
        self.move_to_pose(target, self.speed_value(speed_level or self.active_speed))

    def apply_primitives(self, primitives) -> None:
        """Run an I/O primitive list.

        A level primitive opens a pending write, the next select commits it
        to that bit, and sleeps advance the clock. A select with no pending
        write commits nothing.
        """
        workcell = self.workcell
        pending: Optional[bool] = None
        for prim in primitives:
            if isinstance(prim, SetLow):
                pending = False
            elif isinstance(prim, SetHigh):
                pending = True
            elif isinstance(prim, SelectBit):
                if pending is not None:
                    pre_b = workcell.state.bits()
                    workcell.set_io(prim.index, pending)
                    self.emit(
                        EventKind.IO_WRITE,
                        data={"bit": prim.index, "level": pending},
                        pre_bits=pre_b,
                    )
                    pending = None
            elif isinstance(prim, Sleep):
                self.advance_clock(prim.seconds)

    def run_basic_instruction(self, instr: Instruction) -> None:
        """Execute a primitive instruction outside the normal sequence flow.

        Used for reverse_with payloads and reverse counterparts; structured
        instructions are not accepted here.
        """
        if isinstance(instr, Io):
            self.apply_primitives(self.program.io_ops[instr.op].primitives)
        elif isinstance(instr, Wait):
            self.advance_clock(instr.seconds)
        elif isinstance(instr, MoveJoint):
            for wp in instr.waypoints:
                self.move_joints_to(self.program.joint_confs[wp].joints)
        elif isinstance(instr, Call):
            entry = self.registry.lookup(instr.action)
            if entry is None:
                raise _AbortRun(f"unregistered action '{instr.action}'")
            entry.run(self, instr.items)
        else:
            raise _AbortRun(f"cannot execute {type(instr).__name__} as a basic instruction")

    def signal_error(self, name: str) -> None:
        """Raise a declared error from a registered action."""
        self.controller._signal(name)


# ---------------------------------------------------------------------------
# Controller


class Controller:
    """Runs one program against one workcell, recording a full trace."""

    def __init__(
        self,
        program: Program,
        config: WorkcellConfig,
        *,
        seed: Optional[int] = None,
        trace_sink=None,
        options: Optional[ControllerOptions] = None,
        registry: Optional[ActionRegistry] = None,
        model=None,
    ):
        if program.entry is None or program.entry not in program.sequences:
            raise ValueError("program has no runnable entry sequence")
        self.program = program
        self.options = options if options is not None else ControllerOptions()
        self.registry = registry if registry is not None else default_registry()
        workcell = Workcell(config, model=model)
        rng = random.Random(config.rng_seed if seed is None else seed)
        self.ctx = ExecutionContext(
            program, workcell, rng, ExecutionTrace(trace_sink), self.options, self.registry
        )
        self.ctx.controller = self
        self.main_frames: list[Frame] = []
        self.ctx.frame_chain.append(self.main_frames)
        self.pending: list[_PendingError] = []
        self._failure_counts: dict[tuple, int] = {}
        self.stats_instructions = 0
        self.stats_errors = 0
        self.stats_recoveries = 0

    # -- public API ---------------------------------------------------------

    def run(self) -> RunResult:
        self.main_frames.append(self._frame(self.program.entry))
        try:
            self._loop(self.main_frames, handle_errors=True)
            completed, reason = True, None
        except _AbortRun as exc:
            completed, reason = False, str(exc)
        except MotionBlocked as exc:
            completed, reason = False, f"collision during move: {exc}"
        except BitOutOfRange as exc:
            completed, reason = False, f"io bit out of range: {exc}"
        stats = RunStats(
            instructions=self.stats_instructions,
            errors=self.stats_errors,
            recoveries=self.stats_recoveries,
            simulated_time=self.ctx.workcell.state.clock,
        )
        return RunResult(completed, reason, stats)

    @property
    def trace(self) -> ExecutionTrace:
        return self.ctx.trace

    # -- frame machine --------------------------------------------------------

    def _frame(self, seq_name: str, index: int = 0) -> Frame:
        state = self.ctx.workcell.state
        return Frame(seq_name, index, state.joints, state.bits())

    def _frame_count(self) -> int:
        return sum(len(frames) for frames in self.ctx.frame_chain)

    def _loop(self, frames: list[Frame], handle_errors: bool) -> None:
        ctx = self.ctx
        program = self.program
        while frames:
            if handle_errors:
                record = self._take_pending(RespondAfter.CURRENT_ACTION, None)
                if record is not None:
                    self._resolve_error(record, frames)
                    continue
            frame = frames[-1]
            sequence = program.sequences[frame.seq]
            if frame.index >= len(sequence.instructions):
                if handle_errors:
                    record = self._take_pending(RespondAfter.CURRENT_SEQUENCE, frame)
                    if record is not None:
                        self._resolve_error(record, frames)
                        continue
                frames.pop()
                if frames:
                    parent = frames[-1]
                    call_instr = program.sequences[parent.seq].instructions[parent.index]
                    ctx.emit(
                        EventKind.INSTR_END,
                        data={"text": format_instruction(call_instr)},
                        instruction=call_instr,
                        pre_joints=frame.entry_joints,
                        pre_bits=frame.entry_bits,
                    )
                    self.stats_instructions += 1
                    parent.index += 1
                continue
            instr = sequence.instructions[frame.index]
            if isinstance(instr, SeqCall):
                if self._frame_count() + 1 > self.options.max_call_depth:
                    raise _AbortRun(
                        f"sequence call depth exceeds {self.options.max_call_depth}"
                    )
                ctx.emit(
                    EventKind.INSTR_BEGIN,
                    data={"text": format_instruction(instr)},
                    instruction=instr,
                )
                frames.append(self._frame(instr.name))
                continue
            try:
                self._execute_leaf(instr)
            except _ErrorUnwind as unwind:
                if not handle_errors:
                    raise _AbortRun("error during recovery") from None
                self._resolve_error(unwind.record, frames)
                continue
            frame.index += 1

    def _take_pending(self, respond: RespondAfter, frame) -> Optional[_PendingError]:
        for i, record in enumerate(self.pending):
            if record.respond is not respond:
                continue
            if respond is RespondAfter.CURRENT_SEQUENCE and record.bound_frame is not frame:
                continue
            return self.pending.pop(i)
        return None

    # -- instruction execution ------------------------------------------------

    def _execute_leaf(self, instr: Instruction) -> None:
        ctx = self.ctx
        state = ctx.workcell.state
        pre_j = state.joints
        pre_b = state.bits()
        text = format_instruction(instr)
        ctx.emit(EventKind.INSTR_BEGIN, data={"text": text}, instruction=instr)
        outcome = None
        finished = False
        try:
            if isinstance(instr, Io):
                ctx.apply_primitives(self.program.io_ops[instr.op].primitives)
            elif isinstance(instr, Wait):
                ctx.advance_clock(instr.seconds)
            elif isinstance(instr, MoveJoint):
                for wp in instr.waypoints:
                    ctx.move_joints_to(self.program.joint_confs[wp].joints)
            elif isinstance(instr, Call):
                entry = self.registry.lookup(instr.action)
                if entry is None:
                    raise _AbortRun(f"unregistered action '{instr.action}'")
                entry.run(ctx, instr.items)
            elif isinstance(instr, AdvMoveRef):
                outcome = self._execute_adv_move(self.program.adv_moves[instr.name])
            else:
                raise AssertionError(f"unexpected instruction {instr!r}")
            finished = True
        finally:
            data = {"text": text}
            if not finished:
                data["aborted"] = True
            if outcome is not None:
                data["outcome"] = "success" if isinstance(outcome, Success) else "fail"
            ctx.emit(
                EventKind.INSTR_END,
                data=data,
                instruction=instr,
                pre_joints=pre_j,
                pre_bits=pre_b,
            )
            self.stats_instructions += 1

    # -- guarded moves ----------------------------------------------------

    def _execute_adv_move(self, spec: AdvMoveSpec) -> AttemptOutcome:
        """Run a guarded move to its final outcome.

        Each attempt moves along the configured direction, sampling the
        force filter every control cycle and stopping early on the guard.
        Success is the conjunction of all evaluation queries. Failure runs
        the on_fail behaviors in order; a repeat behavior with budget left
        perturbs the start pose and begins a new attempt, skipping the rest
        of the list.
        """
        ctx = self.ctx
        workcell = ctx.workcell
        rng = ctx.rng

        if spec.speed is not None:
            ctx.set_active_speed(spec.speed, f"advanced move '{spec.name}'")
        speed = ctx.speed_value()

        initial_pose = workcell.tcp_pose()
        start_pose = initial_pose
        direction = workcell.direction_vector(spec.direction, spec.frame)
        attempts = 0

        while True:
            attempts += 1
            ctx.emit(
                EventKind.ATTEMPT_BEGIN,
                data={"move": spec.name, "attempt": attempts},
            )

            condition_ok = True
            if spec.condition is not None:
                condition_ok = evaluate_query(
                    spec.condition, 0.0, workcell.filtered_force()
                )

            # Each attempt evaluates its own sensor stream.
            workcell.state.force_history.clear()

            covered = 0.0
            guard_stop = None
            if condition_ok:
                covered, guard_stop = self._attempt_motion(spec, start_pose, direction, speed)
                filtered = workcell.filtered_force()
                failed = tuple(
                    _describe_query(q)
                    for q in spec.eval_queries
                    if not evaluate_query(q, covered, filtered)
                )
            else:
                failed = ("condition",)

            success = not failed
            ctx.emit(
                EventKind.ATTEMPT_END,
                data={
                    "move": spec.name,
                    "attempt": attempts,
                    "covered": covered,
                    "guard_stopped": guard_stop is not None,
                    "outcome": "success" if success else "fail",
                    "failed": list(failed),
                },
            )

            behaviors = spec.on_success if success else spec.on_fail
            restart = False
            for behavior in behaviors:
                if isinstance(behavior, ReturnToInitialPosition):
                    ctx.move_to_pose(initial_pose, speed)
                elif isinstance(behavior, RepeatWithPerturbation):
                    if attempts < 1 + behavior.max_retries:
                        offset = _disc_offset(
                            rng, workcell.config.perturbation_radius, direction
                        )
                        start_pose = Pose(
                            (
                                initial_pose.position[0] + offset[0],
                                initial_pose.position[1] + offset[1],
                                initial_pose.position[2] + offset[2],
                            ),
                            initial_pose.orientation,
                        )
                        ctx.move_to_pose(start_pose, speed)
                        restart = True
                        break
                    # Retry budget exhausted: fall through to the next behavior.
                else:
                    assert isinstance(behavior, ThrowError)
                    self._signal(behavior.error)
                    break
            if restart:
                continue
            return Success() if success else Fail(failed)

    def _attempt_motion(self, spec, start_pose, direction, speed):
        """Move up to spec.distance along `direction`.

        Returns (covered meters, StoppedByGuard marker or None). Motion also
        ends when the full distance is covered or when a solid blocks any
        further advance without the guard tripping.
        """
        ctx = self.ctx
        workcell = ctx.workcell
        record = self.options.record_motion_samples
        target = Pose(
            (
                start_pose.position[0] + direction[0] * spec.distance,
                start_pose.position[1] + direction[1] * spec.distance,
                start_pose.position[2] + direction[2] * spec.distance,
            ),
            start_pose.orientation,
        )
        covered = 0.0
        while covered < spec.distance - 1e-12:
            pre_j = workcell.state.joints
            pre_b = workcell.state.bits()
            contact, advanced = workcell.step_motion(target, speed)
            covered += advanced
            reading = workcell.read_force(ctx.rng)
            if record:
                ctx.emit(
                    EventKind.MOTION_SAMPLE,
                    data={
                        "advanced": advanced,
                        "covered": covered,
                        "contact": contact,
                        "raw": reading.raw,
                        "filtered": reading.filtered,
                    },
                    pre_joints=pre_j,
                    pre_bits=pre_b,
                )
            if spec.stop_if is not None and evaluate_query(
                spec.stop_if, covered, reading.filtered
            ):
                return covered, StoppedByGuard(covered)
            if advanced <= 1e-15:
                # Blocked by a solid, or already at the target with the
                # covered sum a rounding error short of the full distance.
                break
        return covered, None

    # -- error signaling and resolution -----------------------------------

    def _signal(self, name: str) -> None:
        ctx = self.ctx
        ctx.emit(EventKind.ERROR_SIGNALED, data={"error": name})
        ctx.error_counts[name] = ctx.error_counts.get(name, 0) + 1
        self.stats_errors += 1
        if ctx.in_recovery:
            raise _AbortRun(f"error '{name}' during recovery")
        spec = self.program.errors.get(name)
        if spec is None:
            raise _AbortRun(f"undeclared error '{name}'")
        record = _PendingError(
            name=name,
            site=ctx.call_stack(),
            respond=spec.respond_after,
            bound_frame=self.main_frames[-1] if self.main_frames else None,
        )
        if spec.respond_after is RespondAfter.IMMEDIATELY:
            raise _ErrorUnwind(record)
        self.pending.append(record)

    def _rebuild(self, snapshot) -> list[Frame]:
        frames = [Frame(seq, index) for seq, index in snapshot]
        state = self.ctx.workcell.state
        for frame in frames:
            frame.entry_joints = state.joints
            frame.entry_bits = state.bits()
        return frames

    def _resolve_error(self, record: _PendingError, frames: list[Frame]) -> None:
        key = (record.site, record.name)
        count = self._failure_counts.get(key, 0) + 1
        self._failure_counts[key] = count
        if count > self.options.max_resume_retries:
            raise _AbortRun(
                f"resume loop guard: error '{record.name}' recurred {count} times"
            )
        spec = self.program.errors[record.name]
        self.stats_recoveries += 1
        ctx = self.ctx
        if spec.recovery_sequence is not None:
            ctx.emit(
                EventKind.RECOVERY_BEGIN,
                data={"error": record.name, "sequence": spec.recovery_sequence},
            )
            self._run_recovery(spec.recovery_sequence)
            ctx.emit(
                EventKind.RECOVERY_END,
                data={"error": record.name, "sequence": spec.recovery_sequence},
            )
            if spec.return_to is ReturnTo.ACTION:
                frames[:] = self._rebuild(record.site)
            elif spec.return_to is ReturnTo.SEQUENCE:
                frames[:] = self._rebuild(record.site)
                if self.options.return_to_sequence == "restart":
                    frames[-1].index = 0
                else:
                    frames[-1].index += 1
            else:  # RESTART_PROGRAM
                frames[:] = [self._frame(self.program.entry)]
                self.pending.clear()
        else:
            try:
                decision = reverse_engine.recover_by_reversal(
                    record.name, ctx, self.options.resume_policy, registry=self.registry
                )
            except RecoveryImpossible as exc:
                raise _AbortRun(str(exc)) from None
            snapshot = decision.resume_stack
            frames[:] = self._rebuild(snapshot if snapshot is not None else record.site)

    def _run_recovery(self, seq_name: str) -> None:
        recovery_frames = [self._frame(seq_name)]
        self.ctx.frame_chain.append(recovery_frames)
        self.ctx.in_recovery = True
        try:
            self._loop(recovery_frames, handle_errors=False)
        finally:
            self.ctx.in_recovery = False
            self.ctx.frame_chain.pop()


# ---------------------------------------------------------------------------
# Helpers


def _disc_offset(rng: random.Random, radius: float, direction):
    """Uniform sample from a disc of `radius` perpendicular to `direction`."""
    u1 = rng.random()
    u2 = rng.random()
    r = radius * math.sqrt(u1)
    theta = 2.0 * math.pi * u2
    ux, uy, uz = _perp_basis(direction)
    vx, vy, vz = _cross(direction, (ux, uy, uz))
    c = r * math.cos(theta)
    s = r * math.sin(theta)
    return (c * ux + s * vx, c * uy + s * vy, c * uz + s * vz)


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _perp_basis(direction):
    ref = (0.0, 0.0, 1.0) if abs(direction[2]) < 0.9 else (1.0, 0.0, 0.0)
    u = _cross(direction, ref)
    norm = math.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
    return (u[0] / norm, u[1] / norm, u[2] / norm)


def run_program(
    program: Program,
    config: WorkcellConfig,
    *,
    seed: Optional[int] = None,
    trace_sink=None,
    options: Optional[ControllerOptions] = None,
    registry: Optional[ActionRegistry] = None,
    model=None,
) -> RunResult:
    """Execute the program's entry sequence; see Controller for the knobs."""
    controller = Controller(
        program,
        config,
        seed=seed,
        trace_sink=trace_sink,
        options=options,
        registry=registry,
        model=model,
    )
    return controller.run()
