"""Small arithmetic grammar for metric coefficients and scalar fields.

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?
    atom    := number | pi | e | func '(' expr [',' expr] ')' | variable | '(' expr ')'

Variables are x1..xn and y1..yn (1-based). Functions: sqrt, exp, log, sin,
cos, tan and pow(a, b). Evaluation works on floats, numpy arrays and jets.
"""
import math
import re
from functools import lru_cache
from typing import Dict, Iterable, Optional, Set

import pyparsing as pp

from finsler import diffengine as fd
from finsler.errors import ExpressionError

_FUNCTIONS = {
    'sqrt': (1, fd.sqrt),
    'exp': (1, fd.exp),
    'log': (1, fd.log),
    'sin': (1, fd.sin),
    'cos': (1, fd.cos),
    'tan': (1, fd.tan),
    'pow': (2, fd.power),
}
_CONSTANTS = {'pi': math.pi, 'e': math.e}
_VARIABLE = re.compile(r'^([xy])([1-9][0-9]*)$')


class Node:
    def evaluate(self, env: Dict[str, object]):
        raise NotImplementedError

    def variables(self) -> Set[str]:
        return set()


class Number(Node):
    def __init__(self, value: float):
        self.value = value

    def evaluate(self, env):
        return self.value

    def __repr__(self):
        return f"Number({self.value})"


class Variable(Node):
    def __init__(self, name: str):
        self.name = name

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ExpressionError(f"Variable '{self.name}' is not bound")

    def variables(self):
        return {self.name}

    def __repr__(self):
        return f"Variable({self.name})"


class Function(Node):
    def __init__(self, name: str, args):
        self.name = name
        self.args = list(args)

    def evaluate(self, env):
        _, impl = _FUNCTIONS[self.name]
        return impl(*(arg.evaluate(env) for arg in self.args))

    def variables(self):
        return set().union(*(arg.variables() for arg in self.args))

    def __repr__(self):
        return "Function({}, {})".format(self.name, ", ".join(repr(a) for a in self.args))


class Negate(Node):
    def __init__(self, operand: Node):
        self.operand = operand

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def variables(self):
        return self.operand.variables()


class Operator(Node):
    def __init__(self, op: str, lhs: Node, rhs: Node):
        self.op = op
        self.lhs = lhs
        self.rhs = rhs

    def evaluate(self, env):
        a = self.lhs.evaluate(env)
        if self.op == '^' and isinstance(self.rhs, Number):
            return a ** self.rhs.value if isinstance(a, fd.JetArray) else fd.power(a, self.rhs.value)
        b = self.rhs.evaluate(env)
        if self.op == '+':
            return a + b
        if self.op == '-':
            return a - b
        if self.op == '*':
            return a * b
        if self.op == '/':
            return a / b
        return fd.power(a, b)

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def __repr__(self):
        return f"Operator({self.op}, {self.lhs}, {self.rhs})"


def _fold_left(toks):
    toks = list(toks[0]) if len(toks) == 1 and isinstance(toks[0], pp.ParseResults) else list(toks)
    node = toks[0]
    for i in range(1, len(toks), 2):
        node = Operator(toks[i], node, toks[i + 1])
    return node


def _make_function(s, loc, toks):
    name = toks[0]
    args = list(toks[1:])
    if name not in _FUNCTIONS:
        raise pp.ParseFatalException(s, loc, f"unknown function '{name}'")
    arity, _ = _FUNCTIONS[name]
    if len(args) != arity:
        raise pp.ParseFatalException(s, loc, f"'{name}' takes {arity} argument(s), got {len(args)}")
    return Function(name, args)


def _make_identifier(s, loc, toks):
    name = toks[0]
    if name in _CONSTANTS:
        return Number(_CONSTANTS[name])
    if _VARIABLE.match(name):
        return Variable(name)
    raise pp.ParseFatalException(s, loc, f"unknown identifier '{name}'")


def _make_power(toks):
    if len(toks) == 1:
        return toks[0]
    return Operator('^', toks[0], toks[2])


def _make_unary(toks):
    if len(toks) == 1:
        return toks[0]
    sign, operand = toks[0], toks[1]
    return Negate(operand) if sign == '-' else operand


@lru_cache(maxsize=1)
def make_grammar() -> pp.ParserElement:
    lpar = pp.Literal('(').suppress()
    rpar = pp.Literal(')').suppress()
    comma = pp.Literal(',').suppress()
    number = pp.Regex(r'(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?')
    number.set_parse_action(lambda toks: Number(float(toks[0])))
    ident = pp.Word(pp.alphas, pp.alphanums + '_')

    expr = pp.Forward()
    unary = pp.Forward()
    call = ident + lpar + expr + pp.Optional(comma + expr) + rpar
    call.set_parse_action(_make_function)
    name = ident.copy().set_parse_action(_make_identifier)
    atom = number | call | name | (lpar + expr + rpar)
    power = atom + pp.Optional(pp.Literal('^') + unary)
    power.set_parse_action(_make_power)
    unary <<= (pp.one_of('- +') + unary).set_parse_action(_make_unary) | power
    term = (unary + pp.ZeroOrMore(pp.one_of('* /') + unary)).set_parse_action(_fold_left)
    expr <<= (term + pp.ZeroOrMore(pp.one_of('+ -') + term)).set_parse_action(_fold_left)
    return expr


@lru_cache(maxsize=256)
def parse(text: str) -> Node:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("Empty expression")
    try:
        result = make_grammar().parse_string(text, parse_all=True)
    except (pp.ParseException, pp.ParseFatalException) as e:
        raise ExpressionError(f"Cannot parse '{text}': {e}")
    return result[0]


class Expression:
    """A parsed expression bound to a chart dimension.

    `allow` limits the variable blocks, e.g. 'x' for coefficient functions of
    the point only.
    """

    def __init__(self, text, dimension: int, allow: Iterable[str] = ('x', 'y')):
        self.text = str(text)
        self.dimension = dimension
        self.tree = parse(self.text)
        allow = set(allow)
        for name in self.tree.variables():
            block, index = _VARIABLE.match(name).groups()
            if block not in allow:
                raise ExpressionError(f"'{name}' is not allowed in '{self.text}' (only {sorted(allow)} variables)")
            if int(index) > dimension:
                raise ExpressionError(f"'{name}' exceeds dimension {dimension} in '{self.text}'")

    def __repr__(self) -> str:
        return f"Expression('{self.text}', n={self.dimension})"

    @property
    def uses_y(self) -> bool:
        return any(v.startswith('y') for v in self.tree.variables())

    def __call__(self, x, y: Optional[object] = None):
        env = {f"x{i + 1}": x[i] for i in range(self.dimension)}
        if y is not None:
            env.update({f"y{i + 1}": y[i] for i in range(self.dimension)})
        return self.tree.evaluate(env)
