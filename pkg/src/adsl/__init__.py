"""Toolchain for a robot assembly DSL.

Parse textual assembly programs, validate them, run them against a
deterministic kinematic workcell simulation with user-specified error
handling and guarded moves, and reverse-execute recorded traces.
"""

from .controller import (
    ActionRegistry,
    Controller,
    ControllerOptions,
    RunResult,
    default_registry,
    evaluate_query,
    run_program,
)
from .model import Program, resolve, validate_program
from .parser import ParseError, parse_program
from .printer import pretty_print
from .reverse import (
    PolicyMode,
    ResumePolicy,
    ReversibilityClass,
    StopReason,
    classify,
    recover_by_reversal,
    reverse_counterpart,
    reverse_execute,
)
from .workcell import (
    Pose,
    Workcell,
    WorkcellConfig,
    load_workcell_config,
    workcell_config_from_dict,
)

__all__ = [
    "ActionRegistry",
    "Controller",
    "ControllerOptions",
    "ParseError",
    "PolicyMode",
    "Pose",
    "Program",
    "ResumePolicy",
    "ReversibilityClass",
    "RunResult",
    "StopReason",
    "Workcell",
    "WorkcellConfig",
    "classify",
    "default_registry",
    "evaluate_query",
    "load_workcell_config",
    "parse_program",
    "pretty_print",
    "recover_by_reversal",
    "resolve",
    "reverse_counterpart",
    "reverse_execute",
    "run_program",
    "validate_program",
    "workcell_config_from_dict",
]

__version__ = "0.1.0"
