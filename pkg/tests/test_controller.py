import math

import pytest
from hypothesis import given, settings, strategies as st

from adsl.controller import (
    Controller,
    ControllerOptions,
    Fail,
    StoppedByGuard,
    Success,
    default_registry,
    evaluate_query,
    run_program,
)
from adsl.model import Comparison, DistanceCovered, ForcesExceed
from adsl.trace import EventKind
from adsl.workcell import WorkcellConfig


from _helpers import build, max_overshoot_past_first_contact, quiet_config


GRIPPER_OPS = """
io_operation "gripper_open" { set_low; bit 0; sleep 0.5; }
io_operation "gripper_close" { set_high; bit 0; sleep 0.5; }
"""


class TestEvaluateQuery:
    def test_forces_exceed(self):
        assert evaluate_query(ForcesExceed(5.0), 0.0, 50.0)
        assert not evaluate_query(ForcesExceed(5.0), 0.0, 5.0)

    def test_distance_boundary_is_strict(self):
        q = DistanceCovered(Comparison.MORE_THAN, 0.20)
        assert not evaluate_query(q, 0.20, 0.0)
        assert evaluate_query(q, 0.2000001, 0.0)

    def test_less_than(self):
        q = DistanceCovered(Comparison.LESS_THAN, 0.20)
        assert evaluate_query(q, 0.15, 0.0)
        assert not evaluate_query(q, 0.20, 0.0)


class TestBasicInstructions:
    def test_io_open_then_close(self):
        program = build(
            GRIPPER_OPS + 'sequence "s" { io "gripper_close"; io "gripper_open"; }'
        )
        controller = Controller(program, quiet_config(), seed=0)
        result = controller.run()
        assert result.completed
        writes = controller.trace.of_kind(EventKind.IO_WRITE)
        assert [w.data for w in writes] == [
            {"bit": 0, "level": True},
            {"bit": 0, "level": False},
        ]
        # Two sleeps of 0.5 s each.
        assert result.stats.simulated_time == pytest.approx(1.0)
        assert controller.ctx.workcell.state.io_bits[0] is False

    def test_wait_advances_clock_only(self):
        program = build('sequence "s" { wait 1.0; }')
        controller = Controller(program, quiet_config(), seed=0)
        before = controller.ctx.workcell.state.joints
        result = controller.run()
        assert result.completed
        assert controller.ctx.workcell.state.clock == pytest.approx(1.0)
        assert controller.ctx.workcell.state.joints == before
        assert controller.ctx.workcell.state.bits() == (False,) * 8

    def test_move_through_waypoints_lands_exactly(self):
        program = build(
            "joint_configuration a = { 0.05, 0.0, 0.1, 0.0, 0.0, 0.0 };\n"
            "joint_configuration b = { 0.05, 0.08, 0.1, 0.0, 0.0, 0.0 };\n"
            'sequence "s" { move to a, b; }'
        )
        controller = Controller(program, quiet_config(), seed=0)
        assert controller.run().completed
        assert controller.ctx.workcell.state.joints == (0.05, 0.08, 0.1, 0.0, 0.0, 0.0)

    def test_unregistered_action_aborts(self):
        program = build('sequence "s" { call "glue" (); }')
        result = run_program(program, quiet_config(), seed=0)
        assert not result.completed
        assert "unregistered action" in result.reason

    def test_registered_stub_runs(self):
        program = build('sequence "s" { call "noop" (); call "log" (); }')
        assert run_program(program, quiet_config(), seed=0).completed

    def test_sequence_call_brackets(self):
        program = build(
            'sequence "inner" { wait 0.1; }\n'
            'sequence "outer" { seq "inner"; wait 0.1; }\n'
            'entry "outer";'
        )
        controller = Controller(program, quiet_config(), seed=0)
        assert controller.run().completed
        texts = [e.data["text"] for e in controller.trace.of_kind(EventKind.INSTR_END)]
        assert texts == ["wait 0.1;", 'seq "inner";', "wait 0.1;"]

    def test_call_depth_guard(self):
        chain = "\n".join(
            f'sequence "s{i}" {{ seq "s{i + 1}"; }}' for i in range(40)
        )
        program = build(chain + '\nsequence "s40" { wait 0.01; }\nentry "s0";')
        result = run_program(program, quiet_config(), seed=0)
        assert not result.completed
        assert "depth" in result.reason


ADV_MOVE_TEMPLATE = """
joint_configuration start = {{ 0.0, 0.0, 0.1, 0.0, 0.0, 0.0 }};
error "stuck" {{ recovery_sequence "rec"; }}
sequence "rec" {{ wait 0.01; }}
advanced_move "probe" {{
  specification {{
    distance {distance} direction forward frame tcp;
    stop_if forces_exceed(5);
    speed slow;
  }}
  evaluation {{
    distance_covered(more_than, {threshold});
  }}
  on_success {{
    return_to_initial_position;
  }}
  on_fail {{
    return_to_initial_position;
    repeat_with_perturbation(3);
    throw_error("stuck");
  }}
}}
sequence "main" {{
  move to start;
  adv_move "probe";
}}
entry "main";
"""

WALL_AT_15CM = {
    "box": {"min": [0.15, -0.5, -0.4], "max": [0.25, 0.5, 0.6]},
}


class TestAdvancedMove:
    def test_free_path_success_returns_to_start(self):
        program = build(ADV_MOVE_TEMPLATE.format(distance=0.30, threshold=0.20))
        controller = Controller(program, quiet_config(), seed=0)
        result = controller.run()
        assert result.completed and result.stats.errors == 0
        ends = controller.trace.of_kind(EventKind.ATTEMPT_END)
        assert len(ends) == 1
        assert ends[0].data["outcome"] == "success"
        assert ends[0].data["covered"] > 0.20
        # on_success return_to_initial_position restored the pose.
        assert controller.ctx.workcell.state.joints == (0.0, 0.0, 0.1, 0.0, 0.0, 0.0)

    def test_wall_trips_guard_and_fails_evaluation(self):
        # Hand-simulated with zero noise: the TCP reaches the wall at
        # covered=0.15, the next read averages 50 into the window and the
        # guard trips; 0.15 < 0.20 so the attempt fails.
        program = build(ADV_MOVE_TEMPLATE.format(distance=0.30, threshold=0.20))
        controller = Controller(program, quiet_config(obstacles=[WALL_AT_15CM]), seed=0)
        result = controller.run()
        ends = controller.trace.of_kind(EventKind.ATTEMPT_END)
        assert len(ends) == 4  # 1 + 3 perturbation retries
        for e in ends:
            assert e.data["guard_stopped"] is True
            assert e.data["covered"] == pytest.approx(0.15, abs=1e-9)
            assert e.data["outcome"] == "fail"
        errors = controller.trace.of_kind(EventKind.ERROR_SIGNALED)
        assert [e.data["error"] for e in errors] == ["stuck"]
        assert result.completed  # recovery ran, sequence resumed

    def test_attempt_bound_without_repeat(self):
        program = build(
            'error "stuck" { recovery_sequence "rec"; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'advanced_move "m" {\n'
            "  specification { distance 0.05 direction forward frame tcp; }\n"
            "  evaluation { distance_covered(more_than, 0.2); }\n"
            '  on_fail { throw_error("stuck"); }\n'
            "}\n"
            'sequence "main" { adv_move "m"; }\n'
            'entry "main";'
        )
        controller = Controller(program, quiet_config(), seed=0)
        controller.run()
        assert len(controller.trace.of_kind(EventKind.ATTEMPT_BEGIN)) == 1

    def test_guard_overshoot_bound(self):
        # speed slow (0.05), dt 0.008, window 5: advance past first contact
        # must stay within speed*dt*(window+1).
        program = build(ADV_MOVE_TEMPLATE.format(distance=0.30, threshold=0.20))
        controller = Controller(program, quiet_config(obstacles=[WALL_AT_15CM]), seed=0)
        controller.run()
        worst = max_overshoot_past_first_contact(controller.trace)
        assert worst is not None
        assert worst <= 0.05 * 0.008 * 6

    def test_adv_speed_is_a_lasting_setting(self):
        program = build(ADV_MOVE_TEMPLATE.format(distance=0.02, threshold=0.01))
        controller = Controller(program, quiet_config(), seed=0)
        controller.run()
        changes = controller.trace.of_kind(EventKind.SETTING_CHANGE)
        assert changes and changes[0].data["speed"] == "slow"
        assert controller.ctx.active_speed.value == "slow"

    def test_condition_false_is_failed_attempt_without_motion(self):
        program = build(
            'error "stuck" { recovery_sequence "rec"; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'advanced_move "m" {\n'
            "  condition forces_exceed(1.0);\n"
            "  specification { distance 0.05 direction forward frame tcp; }\n"
            "  evaluation { distance_covered(more_than, 0.01); }\n"
            '  on_fail { throw_error("stuck"); }\n'
            "}\n"
            'sequence "main" { adv_move "m"; }\n'
            'entry "main";'
        )
        controller = Controller(program, quiet_config(), seed=0)
        controller.run()
        ends = controller.trace.of_kind(EventKind.ATTEMPT_END)
        assert len(ends) == 1
        assert ends[0].data["covered"] == 0.0
        assert ends[0].data["failed"] == ["condition"]

    def test_outcome_types(self):
        assert Success() == Success()
        assert Fail(("x",)).failed_queries == ("x",)
        assert StoppedByGuard(0.15).covered == 0.15
        with pytest.raises(AssertionError):
            Fail(())


def _failing_call_registry(fail_times, error_name="flaky"):
    """Stub action that signals `error_name` on its first `fail_times` runs."""
    registry = default_registry()
    state = {"runs": 0}

    def flaky(ctx, items):
        state["runs"] += 1
        if state["runs"] <= fail_times:
            ctx.signal_error(error_name)

    registry.register("flaky", flaky)
    return registry, state


class TestErrorHandling:
    def test_recovery_then_sequence_resume(self):
        # respond_after current_action + return_to sequence: recovery runs
        # after the failing instruction, then the sequence resumes.
        program = build(
            GRIPPER_OPS
            + 'error "flaky" { recovery_sequence "rec"; respond_after current_action; return_to sequence; }\n'
            'sequence "rec" { io "gripper_open"; }\n'
            'sequence "main" { call "flaky" (); io "gripper_close"; }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(1)
        controller = Controller(program, quiet_config(), seed=0, registry=registry)
        result = controller.run()
        assert result.completed
        assert state["runs"] == 1  # resumed after the call, not at it
        assert result.stats.errors == 1
        assert result.stats.recoveries == 1
        kinds = [e.kind for e in controller.trace.events]
        sig = kinds.index(EventKind.ERROR_SIGNALED)
        rec = kinds.index(EventKind.RECOVERY_BEGIN)
        assert rec > sig
        assert controller.ctx.workcell.state.io_bits[0] is True

    def test_return_to_action_retries_until_success(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; return_to action; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { call "flaky" (); wait 0.1; }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(2)
        result = run_program(program, quiet_config(), seed=0, registry=registry)
        assert result.completed
        assert state["runs"] == 3  # two failures, then success
        assert result.stats.errors == 2

    def test_loop_guard_aborts_after_six_failures(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; return_to action; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { call "flaky" (); }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(10**9)
        result = run_program(program, quiet_config(), seed=0, registry=registry)
        assert not result.completed
        assert "loop guard" in result.reason
        assert result.stats.errors == 6

    def test_restart_program(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; return_to restart_program; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { wait 0.02; call "flaky" (); }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(1)
        controller = Controller(program, quiet_config(), seed=0, registry=registry)
        result = controller.run()
        assert result.completed
        begins = [
            e.data["text"]
            for e in controller.trace.of_kind(EventKind.INSTR_BEGIN)
        ]
        assert begins.count("wait 0.02;") == 2

    def test_respond_after_current_sequence_defers(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; respond_after current_sequence; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { call "flaky" (); wait 0.1; wait 0.2; }\n'
            'entry "main";'
        )
        registry, _ = _failing_call_registry(1)
        controller = Controller(program, quiet_config(), seed=0, registry=registry)
        assert controller.run().completed
        events = controller.trace.events
        sig = next(i for i, e in enumerate(events) if e.kind is EventKind.ERROR_SIGNALED)
        rec = next(i for i, e in enumerate(events) if e.kind is EventKind.RECOVERY_BEGIN)
        later_instrs = [
            e.data["text"]
            for e in events[sig:rec]
            if e.kind is EventKind.INSTR_END
        ]
        # The rest of the sequence ran before recovery started.
        assert "wait 0.1;" in later_instrs and "wait 0.2;" in later_instrs

    def test_respond_immediately_aborts_instruction(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; respond_after immediately; return_to action; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { call "flaky" (); }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(1)
        controller = Controller(program, quiet_config(), seed=0, registry=registry)
        assert controller.run().completed
        aborted = [
            e
            for e in controller.trace.of_kind(EventKind.INSTR_END)
            if e.data.get("aborted")
        ]
        assert len(aborted) == 1
        assert state["runs"] == 2

    def test_error_during_recovery_aborts(self):
        program = build(
            'error "flaky" { recovery_sequence "rec"; }\n'
            'sequence "rec" { call "flaky" (); }\n'
            'sequence "main" { call "flaky" (); }\n'
            'entry "main";'
        )
        registry, _ = _failing_call_registry(10**9)
        result = run_program(program, quiet_config(), seed=0, registry=registry)
        assert not result.completed
        assert "during recovery" in result.reason

    def test_undeclared_error_aborts(self):
        program = build('sequence "main" { call "boom" (); }')
        registry = default_registry()
        registry.register("boom", lambda ctx, items: ctx.signal_error("ghost"))
        result = run_program(program, quiet_config(), seed=0, registry=registry)
        assert not result.completed
        assert "undeclared error" in result.reason

    def test_restart_mode_reruns_sequence_from_top(self):
        program = build(
            GRIPPER_OPS
            + 'error "flaky" { recovery_sequence "rec"; return_to sequence; }\n'
            'sequence "rec" { wait 0.01; }\n'
            'sequence "main" { io "gripper_close"; call "flaky" (); }\n'
            'entry "main";'
        )
        registry, state = _failing_call_registry(1)
        options = ControllerOptions(return_to_sequence="restart")
        controller = Controller(
            program, quiet_config(), seed=0, registry=registry, options=options
        )
        result = controller.run()
        assert result.completed
        assert state["runs"] == 2  # the call re-ran after the restart
        begins = [
            e.data["text"] for e in controller.trace.of_kind(EventKind.INSTR_BEGIN)
        ]
        assert begins.count('io "gripper_close";') == 2

    def test_recovery_bracketing(self, corpus_program, blocked_config):
        controller = Controller(corpus_program, blocked_config, seed=0)
        result = controller.run()
        begins = controller.trace.of_kind(EventKind.RECOVERY_BEGIN)
        ends = controller.trace.of_kind(EventKind.RECOVERY_END)
        assert result.completed
        assert len(begins) == len(ends) == 1


class TestTraceInvariants:
    def test_replay_reproduces_final_state(self, corpus_program, blocked_config):
        controller = Controller(corpus_program, blocked_config, seed=0)
        controller.run()
        joints = controller.ctx.workcell.config.home_joints
        bits = (False,) * controller.ctx.workcell.config.bit_count
        for event in controller.trace.events:
            joints = event.post_joints
            bits = event.post_bits
        final = controller.ctx.workcell.state
        assert bits == final.bits()
        assert all(abs(a - b) <= 1e-12 for a, b in zip(joints, final.joints))

    def test_events_strictly_ordered(self, corpus_program, aligned_config):
        controller = Controller(corpus_program, aligned_config, seed=0)
        controller.run()
        last = (-math.inf, -1)
        for event in controller.trace.events:
            key = (event.clock, event.index)
            assert key > last
            last = key

    def test_trace_determinism(self, corpus_program, blocked_config):
        def run_once():
            controller = Controller(corpus_program, blocked_config, seed=7)
            controller.run()
            return controller.trace.serialize()

        assert run_once() == run_once()

    def test_different_seed_differs(self, corpus_program, blocked_config):
        def run_once(seed):
            controller = Controller(corpus_program, blocked_config, seed=seed)
            controller.run()
            return controller.trace.serialize()

        assert run_once(1) != run_once(2)


# Execution fuzz: any structurally valid program built from resolvable names
# runs without name-resolution failures.

IDENT_POOL = ["alpha", "beta", "gamma", "delta"]


@st.composite
def runnable_programs(draw):
    lines = [
        'io_operation "flip" { set_high; bit 1; }',
        'io_operation "flop" { set_low; bit 1; }',
    ]
    for name in IDENT_POOL:
        x = draw(st.floats(-0.05, 0.05))
        y = draw(st.floats(-0.05, 0.05))
        lines.append(
            f"joint_configuration {name} = {{ {x:.3f}, {y:.3f}, 0.1, 0.0, 0.0, 0.0 }};"
        )
    n_seqs = draw(st.integers(1, 3))
    seq_names = [f"s{i}" for i in range(n_seqs)]
    for i, seq in enumerate(seq_names):
        body = []
        for _ in range(draw(st.integers(1, 4))):
            kind = draw(st.integers(0, 4))
            if kind == 0:
                body.append(f"move to {draw(st.sampled_from(IDENT_POOL))};")
            elif kind == 1:
                body.append(f'io "{draw(st.sampled_from(["flip", "flop"]))}";')
            elif kind == 2:
                body.append(f"wait {draw(st.floats(0.001, 0.01)):.4f};")
            elif kind == 3:
                body.append('call "noop" ();')
            elif i > 0:
                body.append(f'seq "{draw(st.sampled_from(seq_names[:i]))}";')
            else:
                body.append('call "noop" ();')
        lines.append(f'sequence "{seq}" {{ {" ".join(body)} }}')
    lines.append(f'entry "{seq_names[-1]}";')
    return "\n".join(lines)


@given(runnable_programs())
@settings(max_examples=25, deadline=None)
def test_valid_programs_execute_without_resolution_failures(text):
    program = build(text)
    config = WorkcellConfig(noise_sigma=0.0, home_joints=(0, 0, 0.1, 0, 0, 0))
    options = ControllerOptions(record_motion_samples=False)
    result = run_program(program, config, seed=0, options=options)
    assert result.completed, result.reason
