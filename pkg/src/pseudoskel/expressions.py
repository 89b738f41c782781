"""A small arithmetic expression grammar for scene files.

Supported: + - * / ^ (right associative), unary minus, sin, cos, sqrt, abs,
the constants pi and e, numeric literals and free variables.  Expressions
evaluate vectorized over numpy arrays and differentiate symbolically, so
scene-defined curves and graphs come with analytic tangents.  Everything is a
plain dataclass tree, which keeps compiled pieces picklable for worker pools.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import SceneParseError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")
_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")

_FUNCTIONS = {
    "sin": (np.sin, lambda u: Call("cos", u)),
    "cos": (np.cos, lambda u: Neg(Call("sin", u))),
    "sqrt": (np.sqrt, lambda u: Div(Num(0.5), Call("sqrt", u))),
    "abs": (np.abs, lambda u: Call("sign", u)),
    "sign": (np.sign, lambda u: Num(0.0)),
    "exp": (np.exp, lambda u: Call("exp", u)),
    "log": (np.log, lambda u: Div(Num(1.0), u)),
}

_CONSTANTS = {"pi": np.pi, "e": np.e}


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Num(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise SceneParseError(f"unknown variable {self.name!r}") from None

    def diff(self, var):
        return Num(1.0) if self.name == var else Num(0.0)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return Neg(self.arg.diff(var))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Add:
    a: object
    b: object

    def eval(self, env):
        return self.a.eval(env) + self.b.eval(env)

    def diff(self, var):
        return Add(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"({self.a} + {self.b})"


@dataclass(frozen=True)
class Sub:
    a: object
    b: object

    def eval(self, env):
        return self.a.eval(env) - self.b.eval(env)

    def diff(self, var):
        return Sub(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"({self.a} - {self.b})"


@dataclass(frozen=True)
class Mul:
    a: object
    b: object

    def eval(self, env):
        return self.a.eval(env) * self.b.eval(env)

    def diff(self, var):
        return Add(Mul(self.a.diff(var), self.b), Mul(self.a, self.b.diff(var)))

    def __str__(self):
        return f"({self.a} * {self.b})"


@dataclass(frozen=True)
class Div:
    a: object
    b: object

    def eval(self, env):
        return self.a.eval(env) / self.b.eval(env)

    def diff(self, var):
        num = Sub(Mul(self.a.diff(var), self.b), Mul(self.a, self.b.diff(var)))
        return Div(num, Mul(self.b, self.b))

    def __str__(self):
        return f"({self.a} / {self.b})"


@dataclass(frozen=True)
class Pow:
    a: object
    b: object

    def eval(self, env):
        return self.a.eval(env) ** self.b.eval(env)

    def diff(self, var):
        if isinstance(self.b, Num):
            k = self.b.value
            return Mul(Mul(Num(k), Pow(self.a, Num(k - 1.0))), self.a.diff(var))
        # general a^b = exp(b log a)
        inner = Add(Mul(self.b.diff(var), Call("log", self.a)),
                    Mul(self.b, Div(self.a.diff(var), self.a)))
        return Mul(Pow(self.a, self.b), inner)

    def __str__(self):
        return f"({self.a} ^ {self.b})"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object

    def eval(self, env):
        return _FUNCTIONS[self.fn][0](self.arg.eval(env))

    def diff(self, var):
        outer = _FUNCTIONS[self.fn][1](self.arg)
        return Mul(outer, self.arg.diff(var))

    def __str__(self):
        return f"{self.fn}({self.arg})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text):
        tokens = []
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            m = _NUMBER.match(text, i)
            if m:
                tokens.append(("num", float(m.group(0))))
                i = m.end()
                continue
            m = re.match(r"[A-Za-z_][A-Za-z_0-9]*", text[i:])
            if m:
                tokens.append(("name", m.group(0)))
                i += m.end()
                continue
            if text.startswith("**", i):
                tokens.append(("op", "^"))
                i += 2
                continue
            if text[i] in "+-*/^()":
                tokens.append(("op", text[i]))
                i += 1
                continue
            raise SceneParseError(f"bad character {text[i]!r} in expression {text!r}")
        return tokens

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            raise SceneParseError(f"unexpected token {tok[1]!r} in expression {self.text!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.pos != len(self.tokens):
            raise SceneParseError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        node = self.unary()
        if self.peek() == ("op", "^"):
            self.take()
            return Pow(node, self.factor())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return Num(value)
        if kind == "name":
            self.take()
            if self.peek() == ("op", "("):
                if value not in _FUNCTIONS:
                    raise SceneParseError(f"unknown function {value!r}")
                self.take(value="(")
                arg = self.expr()
                self.take(value=")")
                return Call(value, arg)
            if value in _CONSTANTS:
                return Num(_CONSTANTS[value])
            return Var(value)
        if (kind, value) == ("op", "("):
            self.take()
            node = self.expr()
            self.take(value=")")
            return node
        raise SceneParseError(f"unexpected end of expression {self.text!r}")


def parse_expression(text: str):
    """Parse ``text`` into an AST node."""
    if not isinstance(text, str) or not text.strip():
        raise SceneParseError("expression must be a non-empty string")
    return _Parser(text).parse()


@dataclass(frozen=True)
class CompiledExpr:
    """A parsed expression callable on keyword arrays, e.g. ``f(t=ts)``."""

    source: str
    node: object

    def __call__(self, **env):
        return self.node.eval(env)

    def derivative(self, var: str) -> "CompiledExpr":
        return CompiledExpr(f"d({self.source})/d{var}", self.node.diff(var))


def compile_expression(text: str) -> CompiledExpr:
    return CompiledExpr(text, parse_expression(text))
