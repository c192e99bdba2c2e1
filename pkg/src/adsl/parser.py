"""Lexer and recursive-descent parser for the textual assembly DSL.

The surface syntax uses braced declaration blocks with semicolon-terminated
statements. Names that behave like symbols (joint configurations, keyframes)
are bare identifiers; everything else is named by a double-quoted string.
Comments run from `#` to end of line. The grammar is documented in
docs/grammar.ebnf and `printer.pretty_print` emits its canonical form.

Parsing is a pure function of the input text: it either returns a complete
`Program` or raises `ParseError` at the first failure point.
"""

from __future__ import annotations

from typing import Optional

from .model import (
    AdvMoveRef,
    AdvMoveSpec,
    Annotation,
    Barrier,
    Call,
    Comparison,
    Direction,
    DistanceCovered,
    ErrorSpec,
    ForcesExceed,
    Frame,
    Instruction,
    Io,
    IOOperation,
    Item,
    JointConfiguration,
    Keyframe,
    MoveJoint,
    NonReversible,
    Program,
    Query,
    RepeatWithPerturbation,
    RespondAfter,
    ReturnTo,
    ReturnToInitialPosition,
    ReverseWith,
    SelectBit,
    SeqCall,
    Sequence,
    SetHigh,
    SetLow,
    SkipOnReverse,
    Sleep,
    SourceLocation,
    SpeedLevel,
    ThrowError,
    Wait,
)


class ParseError(Exception):
    """Raised at the first point the input stops matching the grammar."""

    def __init__(self, location: SourceLocation, expected: tuple[str, ...], found: str):
        assert expected, "a parse error must name at least one expectation"
        self.location = location
        self.expected = tuple(expected)
        self.found = found
        wanted = " or ".join(expected)
        super().__init__(f"{location}: expected {wanted}, found {found!r}")


# ---------------------------------------------------------------------------
# Lexer

_PUNCT = {
    "{": "LBRACE",
    "}": "RBRACE",
    "(": "LPAREN",
    ")": "RPAREN",
    ",": "COMMA",
    ";": "SEMI",
    "=": "EQUALS",
    "@": "AT",
}

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_DIGITS = set("0123456789")


class Token:
    __slots__ = ("kind", "text", "value", "location")

    def __init__(self, kind, text, value, location):
        self.kind = kind
        self.text = text
        self.value = value
        self.location = location

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize(text: str) -> list[Token]:
    """Split `text` into tokens; total over all inputs (errors, not crashes)."""
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def loc():
        return SourceLocation(line, col, i)

    def bump(count=1):
        nonlocal i, line, col
        for _ in range(count):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            bump()
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                bump()
            continue
        start = loc()
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, ch, start))
            bump()
            continue
        if ch == '"':
            bump()
            chars = []
            while True:
                if i >= n:
                    raise ParseError(loc(), ("closing '\"'",), "end of input")
                c = text[i]
                if c == "\n":
                    raise ParseError(loc(), ("closing '\"'",), "newline")
                if c == "\\":
                    bump()
                    if i >= n:
                        raise ParseError(loc(), ("escape character",), "end of input")
                    esc = text[i]
                    if esc not in ('"', "\\"):
                        raise ParseError(loc(), ('escape \\" or \\\\',), esc)
                    chars.append(esc)
                    bump()
                    continue
                if c == '"':
                    bump()
                    break
                chars.append(c)
                bump()
            tokens.append(Token("STRING", text[start.offset : i], "".join(chars), start))
            continue
        if ch in _DIGITS or (ch in "+-" and i + 1 < n and text[i + 1] in _DIGITS):
            if ch in "+-":
                bump()
            while i < n and text[i] in _DIGITS:
                bump()
            is_float = False
            if i < n and text[i] == "." and i + 1 < n and text[i + 1] in _DIGITS:
                is_float = True
                bump()
                while i < n and text[i] in _DIGITS:
                    bump()
            raw = text[start.offset : i]
            value = float(raw) if is_float else int(raw)
            tokens.append(Token("NUMBER", raw, value, start))
            continue
        if ch in _IDENT_START:
            while i < n and text[i] in _IDENT_CONT:
                bump()
            raw = text[start.offset : i]
            tokens.append(Token("IDENT", raw, raw, start))
            continue
        raise ParseError(start, ("declaration", "statement", "token"), ch)

    tokens.append(Token("EOF", "", None, loc()))
    return tokens


# ---------------------------------------------------------------------------
# Parser

_DECL_WORDS = (
    "item",
    "io_operation",
    "joint_configuration",
    "sequence",
    "error",
    "advanced_move",
    "entry",
)

_INSTRUCTION_WORDS = ("move", "io", "wait", "call", "adv_move", "seq")

_DIRECTIONS = {d.value: d for d in Direction}
_FRAMES = {f.value: f for f in Frame}
_SPEEDS = {s.value: s for s in SpeedLevel}
_RESPONDS = {r.value: r for r in RespondAfter}
_RETURNS = {r.value: r for r in ReturnTo}
_COMPARISONS = {c.value: c for c in Comparison}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def fail(self, *expected: str):
        tok = self.peek()
        found = tok.text if tok.kind != "EOF" else "end of input"
        raise ParseError(tok.location, expected, found)

    def expect(self, kind: str, description: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(description)
        return self.advance()

    def expect_word(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value != word:
            self.fail(f"'{word}'")
        return self.advance()

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.value in words

    def string(self, description: str) -> str:
        return self.expect("STRING", description).value

    def ident(self, description: str) -> str:
        return self.expect("IDENT", description).value

    def number(self, description: str = "number") -> float:
        return float(self.expect("NUMBER", description).value)

    def integer(self, description: str) -> int:
        tok = self.peek()
        if tok.kind != "NUMBER" or not isinstance(tok.value, int):
            self.fail(description)
        return self.advance().value

    def keyword_from(self, table: dict, description: str):
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value not in table:
            self.fail(description)
        return table[self.advance().value]

    def semi(self):
        self.expect("SEMI", "';'")

    # -- program ------------------------------------------------------------

    def program(self) -> Program:
        items: dict[str, Item] = {}
        io_ops: dict[str, IOOperation] = {}
        joint_confs: dict[str, JointConfiguration] = {}
        sequences: dict[str, Sequence] = {}
        errors: dict[str, ErrorSpec] = {}
        adv_moves: dict[str, AdvMoveSpec] = {}
        entry: Optional[str] = None
        entry_declared = False

        def declare(table: dict, decl, what: str, location):
            if decl.name in table:
                raise ParseError(location, (f"unique {what} name",), decl.name)
            table[decl.name] = decl

        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.kind != "IDENT" or tok.value not in _DECL_WORDS:
                self.fail(*(f"'{w}'" for w in _DECL_WORDS))
            loc = tok.location
            word = tok.value
            if word == "item":
                declare(items, self.item_decl(), "item", loc)
            elif word == "io_operation":
                declare(io_ops, self.io_decl(), "io operation", loc)
            elif word == "joint_configuration":
                declare(joint_confs, self.joint_decl(), "joint configuration", loc)
            elif word == "sequence":
                declare(sequences, self.sequence_decl(), "sequence", loc)
            elif word == "error":
                declare(errors, self.error_decl(), "error", loc)
            elif word == "advanced_move":
                declare(adv_moves, self.adv_move_decl(), "advanced move", loc)
            else:
                if entry_declared:
                    raise ParseError(loc, ("a single entry declaration",), "entry")
                self.advance()
                entry = self.string("entry sequence name")
                self.semi()
                entry_declared = True

        if entry is None and sequences:
            # Without an explicit entry declaration the last declared
            # sequence is the program entry point.
            entry = next(reversed(sequences))

        return Program(items, io_ops, joint_confs, sequences, errors, adv_moves, entry)

    # -- declarations ---------------------------------------------------------

    def item_decl(self) -> Item:
        loc = self.expect_word("item").location
        name = self.string("item name")
        self.expect("LBRACE", "'{'")
        keyframes = []
        while not self.peek().kind == "RBRACE":
            keyframes.append(self.keyframe())
        if not keyframes:
            self.fail("keyframe")
        self.expect("RBRACE", "'}'")
        return Item(name, tuple(keyframes), location=loc)

    def keyframe(self) -> Keyframe:
        self.expect_word("keyframe")
        name = self.ident("keyframe name")
        self.expect("LBRACE", "'{'")
        coords = []
        while self.peek().kind == "LPAREN":
            self.advance()
            x = self.number()
            self.expect("COMMA", "','")
            y = self.number()
            self.expect("COMMA", "','")
            z = self.number()
            self.expect("RPAREN", "')'")
            self.semi()
            coords.append((x, y, z))
        if not coords:
            self.fail("coordinate '('")
        self.expect("RBRACE", "'}'")
        return Keyframe(name, tuple(coords))

    def io_decl(self) -> IOOperation:
        loc = self.expect_word("io_operation").location
        name = self.string("io operation name")
        self.expect("LBRACE", "'{'")
        primitives = []
        while self.peek().kind != "RBRACE":
            primitives.append(self.primitive())
        self.expect("RBRACE", "'}'")
        return IOOperation(name, tuple(primitives), location=loc)

    def primitive(self):
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail("'set_low'", "'set_high'", "'bit'", "'sleep'")
        word = tok.value
        if word == "set_low":
            self.advance()
            self.semi()
            return SetLow()
        if word == "set_high":
            self.advance()
            self.semi()
            return SetHigh()
        if word == "bit":
            self.advance()
            index = self.integer("bit index")
            self.semi()
            return SelectBit(index)
        if word == "sleep":
            self.advance()
            seconds = self.number("sleep duration")
            self.semi()
            return Sleep(seconds)
        self.fail("'set_low'", "'set_high'", "'bit'", "'sleep'")

    def joint_decl(self) -> JointConfiguration:
        loc = self.expect_word("joint_configuration").location
        name = self.ident("joint configuration name")
        self.expect("EQUALS", "'='")
        self.expect("LBRACE", "'{'")
        joints = [self.number()]
        while self.peek().kind == "COMMA":
            self.advance()
            joints.append(self.number())
        self.expect("RBRACE", "'}'")
        self.semi()
        return JointConfiguration(name, tuple(joints), location=loc)

    def sequence_decl(self) -> Sequence:
        loc = self.expect_word("sequence").location
        name = self.string("sequence name")
        self.expect("LBRACE", "'{'")
        instructions = []
        while self.peek().kind != "RBRACE":
            instructions.append(self.instruction())
        if not instructions:
            self.fail("instruction")
        self.expect("RBRACE", "'}'")
        return Sequence(name, tuple(instructions), location=loc)

    def instruction(self) -> Instruction:
        annotation = None
        if self.peek().kind == "AT":
            annotation = self.annotation()
        instr = self.instruction_core(annotation)
        self.semi()
        return instr

    def annotation(self) -> Annotation:
        self.expect("AT", "'@'")
        word = self.ident("annotation name")
        if word == "nonreversible":
            return NonReversible()
        if word == "skip_on_reverse":
            return SkipOnReverse()
        if word == "barrier":
            return Barrier()
        if word == "reverse_with":
            self.expect("LPAREN", "'('")
            inner = self.instruction_core(None)
            self.expect("RPAREN", "')'")
            return ReverseWith(inner)
        tok = self.tokens[self.pos - 1]
        raise ParseError(
            tok.location,
            ("'nonreversible'", "'skip_on_reverse'", "'barrier'", "'reverse_with'"),
            word,
        )

    def instruction_core(self, annotation) -> Instruction:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value not in _INSTRUCTION_WORDS:
            self.fail("instruction")
        loc = tok.location
        word = tok.value
        self.advance()
        if word == "move":
            self.expect_word("to")
            waypoints = [self.ident("joint configuration name")]
            while self.peek().kind == "COMMA":
                self.advance()
                waypoints.append(self.ident("joint configuration name"))
            return MoveJoint(tuple(waypoints), annotation, location=loc)
        if word == "io":
            return Io(self.string("io operation name"), annotation, location=loc)
        if word == "wait":
            return Wait(self.number("wait duration"), annotation, location=loc)
        if word == "call":
            action = self.string("action name")
            self.expect("LPAREN", "'('")
            items = []
            while self.peek().kind == "STRING":
                items.append(self.advance().value)
            self.expect("RPAREN", "')'")
            return Call(action, tuple(items), annotation, location=loc)
        if word == "adv_move":
            return AdvMoveRef(self.string("advanced move name"), annotation, location=loc)
        return SeqCall(self.string("sequence name"), annotation, location=loc)

    def error_decl(self) -> ErrorSpec:
        loc = self.expect_word("error").location
        name = self.string("error name")
        self.expect("LBRACE", "'{'")
        recovery = None
        respond = None
        ret = None
        while self.peek().kind != "RBRACE":
            tok = self.peek()
            if tok.kind != "IDENT":
                self.fail("'recovery_sequence'", "'respond_after'", "'return_to'")
            word = tok.value
            if word == "recovery_sequence":
                if recovery is not None:
                    raise ParseError(tok.location, ("a single recovery_sequence",), word)
                self.advance()
                recovery = self.string("sequence name")
                self.semi()
            elif word == "respond_after":
                if respond is not None:
                    raise ParseError(tok.location, ("a single respond_after",), word)
                self.advance()
                respond = self.keyword_from(_RESPONDS, "response timing")
                self.semi()
            elif word == "return_to":
                if ret is not None:
                    raise ParseError(tok.location, ("a single return_to",), word)
                self.advance()
                ret = self.keyword_from(_RETURNS, "resume target")
                self.semi()
            else:
                self.fail("'recovery_sequence'", "'respond_after'", "'return_to'")
        self.expect("RBRACE", "'}'")
        return ErrorSpec(
            name,
            recovery_sequence=recovery,
            respond_after=respond if respond is not None else RespondAfter.CURRENT_ACTION,
            return_to=ret if ret is not None else ReturnTo.SEQUENCE,
            location=loc,
        )

    def query(self) -> Query:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail("'forces_exceed'", "'distance_covered'")
        if tok.value == "forces_exceed":
            self.advance()
            self.expect("LPAREN", "'('")
            threshold = self.number("force threshold")
            self.expect("RPAREN", "')'")
            return ForcesExceed(threshold)
        if tok.value == "distance_covered":
            self.advance()
            self.expect("LPAREN", "'('")
            cmp = self.keyword_from(_COMPARISONS, "'more_than' or 'less_than'")
            self.expect("COMMA", "','")
            value = self.number("distance")
            self.expect("RPAREN", "')'")
            return DistanceCovered(cmp, value)
        self.fail("'forces_exceed'", "'distance_covered'")

    def behavior(self):
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail("behavior")
        if tok.value == "return_to_initial_position":
            self.advance()
            self.semi()
            return ReturnToInitialPosition()
        if tok.value == "repeat_with_perturbation":
            self.advance()
            self.expect("LPAREN", "'('")
            retries = self.integer("retry count")
            self.expect("RPAREN", "')'")
            self.semi()
            return RepeatWithPerturbation(retries)
        if tok.value == "throw_error":
            self.advance()
            self.expect("LPAREN", "'('")
            error = self.string("error name")
            self.expect("RPAREN", "')'")
            self.semi()
            return ThrowError(error)
        self.fail(
            "'return_to_initial_position'",
            "'repeat_with_perturbation'",
            "'throw_error'",
        )

    def behavior_block(self, word: str) -> tuple:
        self.expect_word(word)
        self.expect("LBRACE", "'{'")
        behaviors = []
        while self.peek().kind != "RBRACE":
            behaviors.append(self.behavior())
        self.expect("RBRACE", "'}'")
        return tuple(behaviors)

    def adv_move_decl(self) -> AdvMoveSpec:
        loc = self.expect_word("advanced_move").location
        name = self.string("advanced move name")
        self.expect("LBRACE", "'{'")

        condition = None
        if self.at_word("condition"):
            self.advance()
            condition = self.query()
            self.semi()

        self.expect_word("specification")
        self.expect("LBRACE", "'{'")
        self.expect_word("distance")
        distance = self.number("distance")
        self.expect_word("direction")
        direction = self.keyword_from(_DIRECTIONS, "direction")
        self.expect_word("frame")
        frame = self.keyword_from(_FRAMES, "frame")
        self.semi()
        stop_if = None
        if self.at_word("stop_if"):
            self.advance()
            stop_if = self.query()
            self.semi()
        speed = None
        if self.at_word("speed"):
            self.advance()
            speed = self.keyword_from(_SPEEDS, "speed level")
            self.semi()
        self.expect("RBRACE", "'}'")

        self.expect_word("evaluation")
        self.expect("LBRACE", "'{'")
        eval_queries = []
        while self.peek().kind != "RBRACE":
            eval_queries.append(self.query())
            self.semi()
        if not eval_queries:
            self.fail("query")
        self.expect("RBRACE", "'}'")

        on_success = ()
        if self.at_word("on_success"):
            on_success = self.behavior_block("on_success")

        if not self.at_word("on_fail"):
            self.fail("'on_fail'")
        on_fail = self.behavior_block("on_fail")
        if not on_fail:
            tok = self.peek()
            raise ParseError(tok.location, ("at least one on_fail behavior",), tok.text)

        self.expect("RBRACE", "'}'")
        return AdvMoveSpec(
            name,
            distance=distance,
            direction=direction,
            frame=frame,
            eval_queries=tuple(eval_queries),
            on_fail=on_fail,
            condition=condition,
            stop_if=stop_if,
            speed=speed,
            on_success=on_success,
            location=loc,
        )


def parse_program(text: str) -> Program:
    """Parse DSL source text into a Program.

    Raises ParseError at the first failure point; no partial program is
    ever returned. The result may still be semantically invalid; run
    `model.validate_program` before executing it.
    """
    parser = _Parser(tokenize(text))
    program = parser.program()
    parser.expect("EOF", "end of input")
    return program
