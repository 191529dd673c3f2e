"""Scalar arithmetic expressions for membership functions and disturbance signals.

A small closed grammar: numbers, named variables, ``+ - * / ^``, unary minus,
and the functions sin, cos, exp, abs, min, max.  Precedence from loose to
tight: additive, multiplicative, unary minus, power; ``^`` is
right-associative.  Trees are immutable and safe to evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expression",
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "UnboundVariableError",
    "parse",
    "evaluate",
    "to_source",
    "variables",
    "StackProgram",
    "compile_stack_program",
    "run_stack_program",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "min": 2, "max": 2}


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    """Malformed source text; carries the byte offset and a hint."""

    def __init__(self, message, offset, expected=None):
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"at offset {offset}: {message}{hint}")
        self.offset = offset
        self.expected = expected


class ExprDomainError(ExprError):
    """Evaluation left the real domain (division by zero, bad power)."""


class UnboundVariableError(ExprError):
    def __init__(self, name):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: "Expression"
    rhs: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expression = Num | Var | Neg | Bin | Call


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_PUNCT = {"+", "-", "*", "/", "^", "(", ")", ","}


def _tokenize(source):
    tokens = []  # (kind, text, offset)
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _PUNCT:
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal {text!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.take()
        if tok[0] != kind:
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2], expected=what)
        return tok

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            node = Bin(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            node = Bin(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek()[0] == "^":
            self.take()
            # right-associative; exponent may carry a unary minus
            return Bin("^", base, self.parse_unary())
        return base

    def parse_atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Num(text)
        if kind == "(":
            node = self.parse_expr()
            self.expect(")", "')'")
            return node
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", offset,
                                          expected="one of " + ", ".join(sorted(FUNCTIONS)))
                self.take()
                args = [self.parse_expr()]
                while self.peek()[0] == ",":
                    self.take()
                    args.append(self.parse_expr())
                self.expect(")", "')'")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", offset)
                return Call(text, tuple(args))
            return Var(text)
        raise ExprSyntaxError(f"unexpected token {text!r}", offset,
                              expected="number, name or '('")


def parse(source):
    """Parse source text into an expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, expected="an expression")
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    parser.expect("end", "end of input")
    return node


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _exp(x):
    # IEEE semantics: overflow saturates to inf instead of raising
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


_UNARY_FN = {"sin": math.sin, "cos": math.cos, "exp": _exp, "abs": abs}


def _power(base, exponent):
    if base == 0.0 and exponent < 0.0:
        raise ExprDomainError("zero raised to a negative power")
    if base < 0.0 and exponent != math.floor(exponent):
        raise ExprDomainError(
            f"negative base {base!r} with non-integer exponent {exponent!r}")
    try:
        return math.pow(base, exponent)
    except OverflowError:
        if base > 0.0:
            return math.inf
        return math.inf if math.fmod(exponent, 2.0) == 0.0 else -math.inf


def evaluate(expr, env):
    """Evaluate in IEEE-754 double arithmetic with variables bound by ``env``."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(env[expr.name])
        except KeyError:
            raise UnboundVariableError(expr.name) from None
    if isinstance(expr, Neg):
        return -evaluate(expr.arg, env)
    if isinstance(expr, Bin):
        a = evaluate(expr.lhs, env)
        b = evaluate(expr.rhs, env)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero")
            return a / b
        return _power(a, b)
    fn = expr.fn
    if fn in _UNARY_FN:
        return _UNARY_FN[fn](evaluate(expr.args[0], env))
    a = evaluate(expr.args[0], env)
    b = evaluate(expr.args[1], env)
    return min(a, b) if fn == "min" else max(a, b)


def variables(expr):
    """Set of variable names referenced anywhere in the tree."""
    if isinstance(expr, Num):
        return set()
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Neg):
        return variables(expr.arg)
    if isinstance(expr, Bin):
        return variables(expr.lhs) | variables(expr.rhs)
    out = set()
    for a in expr.args:
        out |= variables(a)
    return out


# ---------------------------------------------------------------------------
# printing (round-trip stable: reparse yields a structurally identical tree)
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(expr):
    if isinstance(expr, Bin):
        if expr.op in "+-":
            return _PREC_ADD
        if expr.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(expr, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def to_source(expr):
    """Render with the minimal parentheses that preserve tree structure."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = to_source(expr.arg)
        if _prec(expr.arg) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, Call):
        return expr.fn + "(" + ", ".join(to_source(a) for a in expr.args) + ")"
    op = expr.op
    mine = _prec(expr)
    lhs = to_source(expr.lhs)
    rhs = to_source(expr.rhs)
    if op == "^":
        # right-associative: parenthesize a left operand of equal precedence
        if _prec(expr.lhs) <= mine:
            lhs = f"({lhs})"
        if _prec(expr.rhs) < mine:
            rhs = f"({rhs})"
    else:
        if _prec(expr.lhs) < mine:
            lhs = f"({lhs})"
        # left-associative: a right operand of equal precedence needs parens
        if _prec(expr.rhs) <= mine:
            rhs = f"({rhs})"
    return f"{lhs} {op} {rhs}"


# ---------------------------------------------------------------------------
# stack-program compilation (consumed by the simulation kernels)
# ---------------------------------------------------------------------------

OP_PUSH, OP_LOAD, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_NEG, OP_POW = range(8)
OP_SIN, OP_COS, OP_EXP, OP_ABS, OP_MIN, OP_MAX = range(8, 14)

_FN_OP = {"sin": OP_SIN, "cos": OP_COS, "exp": OP_EXP, "abs": OP_ABS,
          "min": OP_MIN, "max": OP_MAX}
_BIN_OP = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}


@dataclass(frozen=True)
class StackProgram:
    """Postorder opcode stream over a fixed variable-slot layout."""

    code: np.ndarray    # (n, 2) int32: opcode, argument index
    consts: np.ndarray  # float64 constant pool
    max_stack: int


def compile_stack_program(expr, slots):
    """Flatten a tree for the stepping kernels; ``slots`` maps name -> index."""
    code = []
    consts = []

    def emit(node):
        if isinstance(node, Num):
            consts.append(node.value)
            code.append((OP_PUSH, len(consts) - 1))
            return 1
        if isinstance(node, Var):
            if node.name not in slots:
                raise UnboundVariableError(node.name)
            code.append((OP_LOAD, slots[node.name]))
            return 1
        if isinstance(node, Neg):
            depth = emit(node.arg)
            code.append((OP_NEG, 0))
            return depth
        if isinstance(node, Bin):
            d1 = emit(node.lhs)
            d2 = emit(node.rhs)
            code.append((_BIN_OP[node.op], 0))
            return max(d1, d2 + 1)
        depths = []
        for i, a in enumerate(node.args):
            depths.append(emit(a) + i)
        code.append((_FN_OP[node.fn], 0))
        return max(depths)

    depth = emit(expr)
    return StackProgram(
        code=np.asarray(code, dtype=np.int32).reshape(-1, 2),
        consts=np.asarray(consts, dtype=np.float64),
        max_stack=depth,
    )


def run_stack_program(program, values):
    """Reference interpreter; mirrors the arithmetic of the compiled kernel."""
    stack = [0.0] * program.max_stack
    top = -1
    consts = program.consts
    for op, arg in program.code:
        if op == OP_PUSH:
            top += 1
            stack[top] = consts[arg]
        elif op == OP_LOAD:
            top += 1
            stack[top] = values[arg]
        elif op == OP_ADD:
            stack[top - 1] += stack[top]
            top -= 1
        elif op == OP_SUB:
            stack[top - 1] -= stack[top]
            top -= 1
        elif op == OP_MUL:
            stack[top - 1] *= stack[top]
            top -= 1
        elif op == OP_DIV:
            if stack[top] == 0.0:
                raise ExprDomainError("division by zero")
            stack[top - 1] /= stack[top]
            top -= 1
        elif op == OP_NEG:
            stack[top] = -stack[top]
        elif op == OP_POW:
            stack[top - 1] = _power(stack[top - 1], stack[top])
            top -= 1
        elif op == OP_SIN:
            stack[top] = math.sin(stack[top])
        elif op == OP_COS:
            stack[top] = math.cos(stack[top])
        elif op == OP_EXP:
            stack[top] = math.exp(stack[top])
        elif op == OP_ABS:
            stack[top] = abs(stack[top])
        elif op == OP_MIN:
            stack[top - 1] = min(stack[top - 1], stack[top])
            top -= 1
        else:
            stack[top - 1] = max(stack[top - 1], stack[top])
            top -= 1
    return stack[top]
