"""Line-oriented parser and pretty-printer for ``.qrf`` scenario files.

Grammar (one statement per line, ``#`` starts a comment)::

    scenario NAME
    wavefunction NAME = WFLIT
    particle NAME [= WF]
    unitary NAME
      block INT: PAIR PAIR ... = MATRIX
    end
    prepare FRAME SYSTEM WF
    interact P Q UNITARY
    measure P
    checkpoint NAME
    query distribution IDS [at POINT] [given P=INT, ...]
    query check IDS [reference POINT] [expect pass|fail]
    query transform pair|chain|network [order IDS] [at POINT]

    WF     := NAME | WFLIT
    WFLIT  := '{' [INT ':' VALUE {',' INT ':' VALUE}] '}'
    VALUE  := COMPLEX | '[' REAL ',' REAL ']'
    PAIR   := '(' INT ',' INT ')'
    MATRIX := '[' '[' COMPLEX {',' COMPLEX} ']' {',' ...} ']'
    POINT  := INT | start | prepared | end | NAME   (a checkpoint)
    IDS    := NAME {',' NAME}

Complex literals are sums of terms like ``1/2``, ``-1/sqrt2``, ``1/2i`` or
``i/sqrt6``; a trailing ``i`` multiplies the whole term. Keys of a WFLIT
may be quoted, so a JSON object ``{"0": [re, im], ...}`` is also accepted.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..statevec import NORM_TOL
from .ast import (
    BUILTIN_UNITARIES, RESERVED_POINTS, Amp, BlockDecl, CheckpointStmt, CheckQuery,
    DistributionQuery, InteractStmt, MeasureStmt, ParticleDecl, Pos, PrepareStmt, Scenario,
    ScenarioName, TransformQuery, UnitaryDecl, WavefunctionDecl, WfLiteral, WfRef,
)

TRANSFORM_NAMES = ("pair", "chain", "network")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT = re.compile(r"[+-]?\d+")
_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_REAL = re.compile(r"[+-]?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|[+-]?\.\d+(?:[eE][+-]?\d+)?")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


class ScenarioError(Exception):
    """Carries every diagnostic found in a source file."""

    def __init__(self, errors: list[Diagnostic]):
        self.errors = list(errors)
        super().__init__("\n".join(map(str, self.errors)))


class _LineError(Exception):
    def __init__(self, column: int, message: str):
        self.column = column
        self.message = message


class _Cursor:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.i = 0
        self.lineno = lineno

    def pos(self) -> Pos:
        return Pos(self.lineno, self.i + 1)

    def fail(self, message: str, at: int | None = None):
        raise _LineError((self.i if at is None else at) + 1, message)

    def ws(self):
        while self.i < len(self.text) and self.text[self.i] in " \t":
            self.i += 1

    def at_end(self) -> bool:
        self.ws()
        return self.i >= len(self.text)

    def peek(self) -> str:
        self.ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def accept(self, s: str) -> bool:
        self.ws()
        if self.text.startswith(s, self.i):
            self.i += len(s)
            return True
        return False

    def expect(self, s: str, what: str | None = None):
        if not self.accept(s):
            self.fail(f"expected {what or repr(s)}")

    def match(self, rx: re.Pattern) -> str | None:
        self.ws()
        m = rx.match(self.text, self.i)
        if not m:
            return None
        self.i = m.end()
        return m.group()

    def ident(self, what: str = "a name") -> str:
        s = self.match(_IDENT)
        if s is None:
            self.fail(f"expected {what}")
        return s

    def keyword(self) -> str | None:
        save = self.i
        s = self.match(_IDENT)
        if s is None:
            self.i = save
        return s

    def integer(self, what: str = "an integer") -> int:
        s = self.match(_INT)
        if s is None:
            self.fail(f"expected {what}")
        return int(s)

    def done(self):
        if not self.at_end():
            self.fail(f"unexpected text {self.text[self.i:]!r}")


# -- complex literals ----------------------------------------------------

class _ComplexParser:
    """Recursive descent over one complex expression; stops at , ] } or EOL."""

    def __init__(self, cur: _Cursor):
        self.c = cur

    def parse(self) -> Amp:
        c = self.c
        c.ws()
        start = c.i
        try:
            value = self.expr()
        except ZeroDivisionError:
            c.fail("division by zero in complex literal", start)
        text = re.sub(r"\s+", "", c.text[start:c.i])
        if not text:
            c.fail("malformed complex literal: empty value", start)
        nxt = c.peek()
        if nxt not in ("", ",", "]", "}"):
            c.fail(f"malformed complex literal near {c.text[c.i:]!r}")
        return Amp(text, value)

    def expr(self) -> complex:
        c = self.c
        sign = 1
        if c.accept("-"):
            sign = -1
        elif c.accept("+"):
            pass
        value = sign * self.term()
        while True:
            if c.accept("+"):
                value += self.term()
            elif c.accept("-"):
                value -= self.term()
            else:
                return value

    def term(self) -> complex:
        c = self.c
        value = self.factor()
        while True:
            if c.accept("*"):
                value *= self.factor()
            elif c.accept("/"):
                value /= self.factor()
            else:
                break
        # a directly attached trailing i multiplies the whole term
        if c.text.startswith("i", c.i) and not _IDENT.match(c.text, c.i + 1):
            c.i += 1
            value *= 1j
        return value

    def factor(self) -> complex:
        c = self.c
        c.ws()
        at = c.i
        if c.accept("("):
            v = self.expr()
            c.expect(")")
            return v
        num = c.match(_NUMBER)
        if num is not None:
            return complex(float(num))
        name = c.match(re.compile(r"[A-Za-z_][A-Za-z0-9_]*"))
        if name is None:
            c.fail("malformed complex literal: expected a number, sqrtN, i or '('", at)
        if name == "i":
            return 1j
        m = re.fullmatch(r"sqrt(\d+)(i?)", name)
        if m:
            v = complex(math.sqrt(int(m.group(1))))
            if m.group(2):
                # sqrt2i: the suffix belongs to the enclosing term; give it back
                c.i -= 1
            return v
        if name == "sqrt":
            c.expect("(", "'(' after sqrt")
            v = self.expr()
            c.expect(")")
            if v.imag != 0 or v.real < 0:
                c.fail("sqrt of a negative or complex number", at)
            return complex(math.sqrt(v.real))
        c.fail(f"malformed complex literal: unknown symbol {name!r}", at)


def _value(cur: _Cursor) -> Amp:
    if cur.peek() == "[":
        start = cur.i
        cur.expect("[")
        re_s = cur.match(_REAL)
        cur.expect(",")
        im_s = cur.match(_REAL)
        if re_s is None or im_s is None:
            cur.fail("malformed complex literal: expected [re, im]", start)
        cur.expect("]")
        return Amp(f"[{re_s},{im_s}]", complex(float(re_s), float(im_s)))
    return _ComplexParser(cur).parse()


def _wf_literal(cur: _Cursor) -> WfLiteral:
    start = cur.i
    cur.expect("{")
    entries: dict[int, Amp] = {}
    if not cur.accept("}"):
        while True:
            kat = cur.i
            quoted = cur.accept('"')
            key = cur.integer("an integer momentum label")
            if quoted:
                cur.expect('"')
            cur.expect(":")
            if key in entries:
                cur.fail(f"label {key} given twice", kat)
            entries[key] = _value(cur)
            if cur.accept("}"):
                break
            cur.expect(",", "',' or '}'")
    norm2 = math.fsum(abs(a.value) ** 2 for a in entries.values())
    if abs(norm2 - 1.0) > NORM_TOL:
        cur.fail(f"wavefunction is not normalized (squared norm {norm2:.15g})", start)
    return WfLiteral(tuple(sorted(entries.items())))


def _wf_ref(cur: _Cursor) -> WfRef:
    if cur.peek() == "{":
        return _wf_literal(cur)
    return cur.ident("a wavefunction name or literal")


def _idlist(cur: _Cursor) -> tuple[str, ...]:
    out = [cur.ident("a particle name")]
    while cur.accept(","):
        out.append(cur.ident("a particle name"))
    return tuple(out)


def _point(cur: _Cursor):
    if cur.match(re.compile(r"(?=[+-]?\d)")) is not None:
        return cur.integer()
    return cur.ident("an event index, start, prepared, end or a checkpoint")


def _matrix(cur: _Cursor) -> tuple[tuple[Amp, ...], ...]:
    cur.expect("[")
    rows = []
    while True:
        cur.expect("[", "'[' opening a matrix row")
        row = [_value(cur)]
        while cur.accept(","):
            row.append(_value(cur))
        cur.expect("]")
        rows.append(tuple(row))
        if cur.accept("]"):
            return tuple(rows)
        cur.expect(",", "',' or ']'")


# -- statements ----------------------------------------------------------

def _block(cur: _Cursor) -> BlockDecl:
    pos = cur.pos()
    total = cur.integer("the block's total momentum")
    cur.expect(":")
    basis = []
    while cur.peek() == "(":
        cur.expect("(")
        a = cur.integer()
        cur.expect(",")
        b = cur.integer()
        cur.expect(")")
        basis.append((a, b))
    if not basis:
        cur.fail("a block needs at least one (l, l') pair")
    mat_at = cur.i
    cur.expect("=")
    rows = _matrix(cur)
    n = len(basis)
    if len(rows) != n or any(len(r) != n for r in rows):
        cur.fail(f"matrix must be {n}x{n} to match the listed pairs", mat_at)
    return BlockDecl(total, tuple(basis), rows, pos)


def _query(cur: _Cursor, pos: Pos):
    kind = cur.keyword()
    if kind == "distribution":
        subset = _idlist(cur)
        at, given = None, []
        while not cur.at_end():
            kw = cur.keyword()
            if kw == "at" and at is None:
                at = _point(cur)
            elif kw == "given" and not given:
                while True:
                    name = cur.ident("a particle name")
                    cur.expect("=")
                    given.append((name, cur.integer("an outcome")))
                    if not cur.accept(","):
                        break
            else:
                cur.fail("expected 'at' or 'given'")
        return DistributionQuery(subset, at, tuple(given), pos)
    if kind == "check":
        subset = _idlist(cur)
        ref, expect = None, None
        while not cur.at_end():
            kw = cur.keyword()
            if kw == "reference" and ref is None:
                ref = _point(cur)
            elif kw == "expect" and expect is None:
                at = cur.i
                expect = cur.ident("pass or fail")
                if expect not in ("pass", "fail"):
                    cur.fail("expected pass or fail", at)
            else:
                cur.fail("expected 'reference' or 'expect'")
        return CheckQuery(subset, ref, expect, pos)
    if kind == "transform":
        at_name = cur.i
        name = cur.ident("a transform name")
        if name not in TRANSFORM_NAMES:
            cur.fail(f"unknown transform {name!r} (known: {', '.join(TRANSFORM_NAMES)})", at_name)
        order, at = None, None
        while not cur.at_end():
            kw = cur.keyword()
            if kw == "order" and order is None:
                order = _idlist(cur)
            elif kw == "at" and at is None:
                at = _point(cur)
            else:
                cur.fail("expected 'order' or 'at'")
        return TransformQuery(name, order, at, pos)
    cur.fail("expected distribution, check or transform")


def _strip_comment(line: str) -> str:
    # '#' never occurs inside a literal
    i = line.find("#")
    return line if i < 0 else line[:i]


class _Resolver:
    """Declaration-before-use and preparation-order checks."""

    def __init__(self, errors: list[Diagnostic]):
        self.errors = errors
        self.particles: dict[str, ParticleDecl] = {}
        self.wavefunctions: set[str] = set()
        self.unitaries: set[str] = set()
        self.checkpoints: set[str] = set()
        self.prepared: set[str] = set()
        self.touched: set[str] = set()

    def err(self, pos: Pos, msg: str):
        self.errors.append(Diagnostic(pos.line, pos.column, msg))

    def particle(self, name: str, pos: Pos) -> bool:
        if name not in self.particles:
            self.err(pos, f"undeclared particle {name!r}")
            return False
        return True

    def wf(self, ref: WfRef, pos: Pos):
        if isinstance(ref, str) and ref not in self.wavefunctions:
            self.err(pos, f"undeclared wavefunction {ref!r}")

    def point(self, p, pos: Pos):
        if isinstance(p, str) and p not in RESERVED_POINTS and p not in self.checkpoints:
            self.err(pos, f"undeclared checkpoint {p!r}")

    def declare(self, kind: str, table, name: str, pos: Pos) -> bool:
        if name in table:
            self.err(pos, f"{kind} {name!r} declared twice")
            return False
        return True

    def visit(self, st):
        pos = st.pos
        if isinstance(st, ParticleDecl):
            if self.declare("particle", self.particles, st.name, pos):
                if st.init is not None:
                    self.wf(st.init, pos)
                self.particles[st.name] = st
        elif isinstance(st, WavefunctionDecl):
            if self.declare("wavefunction", self.wavefunctions, st.name, pos):
                self.wavefunctions.add(st.name)
        elif isinstance(st, UnitaryDecl):
            if st.name in BUILTIN_UNITARIES:
                self.err(pos, f"{st.name!r} is a built-in interaction and cannot be redefined")
            elif self.declare("unitary", self.unitaries, st.name, pos):
                self.unitaries.add(st.name)
        elif isinstance(st, CheckpointStmt):
            if st.name in RESERVED_POINTS:
                self.err(pos, f"{st.name!r} is a reserved point name")
            elif self.declare("checkpoint", self.checkpoints, st.name, pos):
                self.checkpoints.add(st.name)
        elif isinstance(st, PrepareStmt):
            ok = self.particle(st.frame, pos) & self.particle(st.system, pos)
            self.wf(st.chi, pos)
            if not ok:
                return
            if st.frame == st.system:
                self.err(pos, f"{st.frame!r} cannot prepare itself")
            elif st.system in self.prepared:
                self.err(pos, f"re-preparation of {st.system!r}, which was already prepared")
            elif self.particles[st.system].init is not None:
                self.err(pos, f"{st.system!r} is declared with an initial state; only zero-momentum particles can be prepared")
            elif st.system in self.touched:
                self.err(pos, f"{st.system!r} has already interacted or been measured; it is no longer in the zero-momentum state")
            self.prepared.add(st.system)
            self.touched.add(st.frame)
        elif isinstance(st, InteractStmt):
            ok = self.particle(st.p, pos) & self.particle(st.q, pos)
            if st.unitary not in BUILTIN_UNITARIES and st.unitary not in self.unitaries:
                self.err(pos, f"undeclared unitary {st.unitary!r}")
            if ok and st.p == st.q:
                self.err(pos, "an interaction needs two distinct particles")
            self.touched.update((st.p, st.q))
        elif isinstance(st, MeasureStmt):
            self.particle(st.particle, pos)
            self.touched.add(st.particle)
        elif isinstance(st, DistributionQuery):
            for p in st.subset:
                self.particle(p, pos)
            for p, _ in st.given:
                self.particle(p, pos)
            if st.at is not None:
                self.point(st.at, pos)
        elif isinstance(st, CheckQuery):
            for p in st.subset:
                self.particle(p, pos)
            if st.reference is not None:
                self.point(st.reference, pos)
        elif isinstance(st, TransformQuery):
            for p in st.order or ():
                self.particle(p, pos)
            if st.at is not None:
                self.point(st.at, pos)


def parse(text: str) -> Scenario:
    """Parse scenario source; raises :class:`ScenarioError` listing every problem."""
    errors: list[Diagnostic] = []
    statements = []
    open_unitary: list | None = None  # [name, pos, blocks, block lines seen]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        cur = _Cursor(line, lineno)
        if cur.at_end():
            continue
        pos = cur.pos()
        try:
            kw = cur.keyword()
            if open_unitary is not None:
                if kw == "block":
                    open_unitary[3] += 1
                    open_unitary[2].append(_block(cur))
                    cur.done()
                elif kw == "end":
                    cur.done()
                    name, upos, blocks, attempted = open_unitary
                    if not attempted:
                        errors.append(Diagnostic(upos.line, upos.column, f"unitary {name!r} has no blocks"))
                    statements.append(UnitaryDecl(name, tuple(blocks), upos))
                    open_unitary = None
                else:
                    cur.fail("expected 'block' or 'end' inside a unitary definition", pos.column - 1)
                continue
            if kw == "scenario":
                statements.append(ScenarioName(cur.ident("a scenario name"), pos))
            elif kw == "particle":
                name = cur.ident("a particle name")
                init = _wf_ref(cur) if cur.accept("=") else None
                statements.append(ParticleDecl(name, init, pos))
            elif kw == "wavefunction":
                name = cur.ident("a wavefunction name")
                cur.expect("=")
                if cur.peek() != "{":
                    cur.fail("expected a wavefunction literal '{...}'")
                statements.append(WavefunctionDecl(name, _wf_literal(cur), pos))
            elif kw == "unitary":
                name = cur.ident("a unitary name")
                cur.done()
                open_unitary = [name, pos, [], 0]
                continue
            elif kw == "prepare":
                frame = cur.ident("a frame name")
                system = cur.ident("a system name")
                statements.append(PrepareStmt(frame, system, _wf_ref(cur), pos))
            elif kw == "interact":
                p = cur.ident("a particle name")
                q = cur.ident("a particle name")
                statements.append(InteractStmt(p, q, cur.ident("a unitary name"), pos))
            elif kw == "measure":
                statements.append(MeasureStmt(cur.ident("a particle name"), pos))
            elif kw == "checkpoint":
                statements.append(CheckpointStmt(cur.ident("a checkpoint name"), pos))
            elif kw == "query":
                statements.append(_query(cur, pos))
            else:
                cur.fail(f"unknown statement {kw!r}" if kw else "expected a statement keyword", pos.column - 1)
            cur.done()
        except _LineError as e:
            errors.append(Diagnostic(lineno, e.column, e.message))

    if open_unitary is not None:
        name, upos = open_unitary[:2]
        errors.append(Diagnostic(upos.line, upos.column, f"unitary {name!r} is missing its 'end'"))

    resolver = _Resolver(errors)
    for st in statements:
        resolver.visit(st)
    names = [s for s in statements if isinstance(s, ScenarioName)]
    for extra in names[1:]:
        errors.append(Diagnostic(extra.pos.line, extra.pos.column, "scenario name given twice"))
    if errors:
        raise ScenarioError(sorted(errors, key=lambda d: (d.line, d.column)))
    return Scenario(tuple(statements))


# -- printing ------------------------------------------------------------

def _fmt_wf(ref: WfRef) -> str:
    if isinstance(ref, str):
        return ref
    return "{" + ", ".join(f"{l}: {a.text}" for l, a in ref.entries) + "}"


def _fmt_point(p) -> str:
    return str(p)


def format_scenario(sc: Scenario) -> str:
    """Canonical source text; ``parse(format_scenario(parse(t)))`` equals ``parse(t)``."""
    out = []
    for st in sc.statements:
        if isinstance(st, ScenarioName):
            out.append(f"scenario {st.name}")
        elif isinstance(st, WavefunctionDecl):
            out.append(f"wavefunction {st.name} = {_fmt_wf(st.literal)}")
        elif isinstance(st, ParticleDecl):
            out.append(f"particle {st.name}" + (f" = {_fmt_wf(st.init)}" if st.init is not None else ""))
        elif isinstance(st, UnitaryDecl):
            out.append(f"unitary {st.name}")
            for b in st.blocks:
                pairs = " ".join(f"({x},{y})" for x, y in b.basis)
                rows = ", ".join("[" + ", ".join(a.text for a in r) + "]" for r in b.rows)
                out.append(f"  block {b.total}: {pairs} = [{rows}]")
            out.append("end")
        elif isinstance(st, PrepareStmt):
            out.append(f"prepare {st.frame} {st.system} {_fmt_wf(st.chi)}")
        elif isinstance(st, InteractStmt):
            out.append(f"interact {st.p} {st.q} {st.unitary}")
        elif isinstance(st, MeasureStmt):
            out.append(f"measure {st.particle}")
        elif isinstance(st, CheckpointStmt):
            out.append(f"checkpoint {st.name}")
        elif isinstance(st, DistributionQuery):
            s = f"query distribution {','.join(st.subset)}"
            if st.at is not None:
                s += f" at {_fmt_point(st.at)}"
            if st.given:
                s += " given " + ", ".join(f"{p}={v}" for p, v in st.given)
            out.append(s)
        elif isinstance(st, CheckQuery):
            s = f"query check {','.join(st.subset)}"
            if st.reference is not None:
                s += f" reference {_fmt_point(st.reference)}"
            if st.expect is not None:
                s += f" expect {st.expect}"
            out.append(s)
        elif isinstance(st, TransformQuery):
            s = f"query transform {st.name}"
            if st.order is not None:
                s += f" order {','.join(st.order)}"
            if st.at is not None:
                s += f" at {_fmt_point(st.at)}"
            out.append(s)
    return "\n".join(out) + "\n"
