"""Closed-form expression language for system definitions.

Expressions are built from real literals, named variables and parameters, the
arithmetic operators ``+ - * /``, unary minus, ``pow(e, n)`` with a literal
integer exponent, and the functions sin, cos, tan, exp, log, sqrt.  Parsing
produces an immutable AST; names are resolved against a declaration set when
an :class:`ExprFunction` is built.  Differentiation is forward propagation of
truncated Taylor coefficients through the AST (see :mod:`framedyn.jets`);
the full grammar is documented in ``docs/exprlang.md``.

Two evaluation routes are provided and cross-checked in the test suite: a
generic tree walk over any coefficient algebra (floats, numpy arrays,
TaylorValues), and per-expression compiled scalar evaluators used on hot
paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import FUNCTION_NAMES, TaylorValue, taylor_fun

__all__ = [
    "Expr", "Const", "Ref", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Fun",
    "parse", "eval_jet2", "eval_value", "ExprFunction",
    "ExprError", "ExprSyntaxError", "UnknownFunctionError",
    "UnboundNameError", "EvalDomainError",
]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundNameError(ExprError):
    pass


class EvalDomainError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Ref(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Fun(Expr):
    name: str
    arg: Expr


def free_names(expr):
    """All variable/parameter names referenced by the expression."""
    out = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Ref):
            out.add(e.name)
        elif isinstance(e, (Neg, Fun)):
            stack.append(e.arg)
        elif isinstance(e, (Add, Sub, Mul, Div)):
            stack.append(e.left)
            stack.append(e.right)
        elif isinstance(e, Pow):
            stack.append(e.base)
    return out


# ---------------------------------------------------------------------------
# Lexer / parser


_OPERATORS = "+-*/(),"


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | one of _OPERATORS | "end"
    text: str
    line: int
    col: int


def _tokenize(source):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
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
            tokens.append(_Token("num", text, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in _OPERATORS:
            tokens.append(_Token(ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


_ADD_BP = 10
_UNARY_BP = 15
_MUL_BP = 20


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.next()
        if tok.kind != kind:
            raise ExprSyntaxError(
                f"expected {what}, found {tok.text or 'end of input'!r}",
                tok.line, tok.col)
        return tok

    def parse_expr(self, min_bp=0):
        tok = self.next()
        if tok.kind == "num":
            left = Const(float(tok.text))
        elif tok.kind == "-":
            left = Neg(self.parse_expr(_UNARY_BP))
        elif tok.kind == "(":
            left = self.parse_expr(0)
            self.expect(")", "')'")
        elif tok.kind == "name":
            left = self.parse_name(tok)
        else:
            raise ExprSyntaxError(
                f"expected a number, name, '(' or '-', found "
                f"{tok.text or 'end of input'!r}", tok.line, tok.col)
        while True:
            op = self.peek()
            if op.kind in "+-":
                bp = _ADD_BP
            elif op.kind in "*/":
                bp = _MUL_BP
            else:
                break
            if bp < min_bp:
                break
            self.next()
            right = self.parse_expr(bp + 1)
            node = {"+": Add, "-": Sub, "*": Mul, "/": Div}[op.kind]
            left = node(left, right)
        return left

    def parse_name(self, tok):
        if self.peek().kind != "(":
            return Ref(tok.text)
        if tok.text == "pow":
            self.next()
            base = self.parse_expr(0)
            self.expect(",", "','")
            exponent = self.parse_exponent()
            self.expect(")", "')'")
            return Pow(base, exponent)
        if tok.text not in FUNCTION_NAMES:
            raise UnknownFunctionError(
                f"unknown function {tok.text!r}", tok.line, tok.col)
        self.next()
        arg = self.parse_expr(0)
        self.expect(")", "')'")
        return Fun(tok.text, arg)

    def parse_exponent(self):
        sign = 1
        tok = self.next()
        if tok.kind == "-":
            sign = -1
            tok = self.next()
        if tok.kind != "num":
            raise ExprSyntaxError(
                "expected an integer exponent", tok.line, tok.col)
        value = float(tok.text)
        if value != int(value):
            raise ExprSyntaxError(
                f"pow exponent must be an integer, got {tok.text}",
                tok.line, tok.col)
        return sign * int(value)


def parse(source):
    """Parse source text into an expression AST.

    Precedence follows the usual convention: ``*``/``/`` bind tighter than
    ``+``/``-``, all left associative; unary minus applies to the whole
    following multiplicative term, as in Python.
    """
    parser = _Parser(_tokenize(source))
    expr = parser.parse_expr(0)
    tok = parser.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(
            f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return expr


# ---------------------------------------------------------------------------
# Generic tree evaluation (floats, arrays, or TaylorValues)


def tree_eval(expr, env):
    """Evaluate with leaves drawn from env (name -> float/array/TaylorValue)."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Ref):
        try:
            return env[expr.name]
        except KeyError:
            raise UnboundNameError(f"unbound name {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -tree_eval(expr.arg, env)
    if isinstance(expr, Add):
        return tree_eval(expr.left, env) + tree_eval(expr.right, env)
    if isinstance(expr, Sub):
        return tree_eval(expr.left, env) - tree_eval(expr.right, env)
    if isinstance(expr, Mul):
        return tree_eval(expr.left, env) * tree_eval(expr.right, env)
    if isinstance(expr, Div):
        return tree_eval(expr.left, env) / tree_eval(expr.right, env)
    if isinstance(expr, Pow):
        return tree_eval(expr.base, env) ** expr.exponent
    if isinstance(expr, Fun):
        return taylor_fun(expr.name, tree_eval(expr.arg, env))
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Compiled scalar evaluators


_MATH_GLOBALS = {
    "_sin": math.sin, "_cos": math.cos, "_tan": math.tan,
    "_exp": math.exp, "_log": math.log, "_sqrt": math.sqrt,
}


class _Codegen:
    """Emit straight-line Python for the Taylor propagation of one expression.

    Slots are represented as source strings, with None marking a structural
    zero (dropped from emitted arithmetic).
    """

    def __init__(self, k, nslots):
        self.k = k
        self.nslots = nslots
        self.lines = []
        self.counter = 0

    def temp(self, src):
        name = f"t{self.counter}"
        self.counter += 1
        self.lines.append(f"    {name} = {src}")
        return name

    def bind(self, slots):
        return [s if (s is None or s.isidentifier()) else self.temp(s)
                for s in slots]

    def add(self, a, b, sign="+"):
        out = []
        for x, y in zip(a, b):
            if x is None and y is None:
                out.append(None)
            elif y is None:
                out.append(x)
            elif x is None:
                out.append(y if sign == "+" else f"(-({y}))")
            else:
                out.append(f"(({x}) {sign} ({y}))")
        return out

    def neg(self, a):
        return [None if x is None else f"(-({x}))" for x in a]

    def mul(self, a, b):
        # Accumulation must mirror TaylorValue.__mul__ exactly (grouped
        # swap-partner terms) so compiled and tree paths stay bit-identical.
        from .jets import _MUL
        a = self.bind(a)
        b = self.bind(b)
        out = []
        for groups in _MUL[self.k]:
            parts = []
            for group in groups:
                terms = [f"{a[s]}*{b[t]}" for s, t in group
                         if a[s] is not None and b[t] is not None]
                if not terms:
                    continue
                if len(terms) == 1:
                    parts.append(terms[0])
                else:
                    parts.append("(" + " + ".join(terms) + ")")
            out.append(" + ".join(parts) if parts else None)
        return out

    def div(self, a, b):
        from .jets import _MUL, _popcount
        a = self.bind(a)
        b = self.bind(b)
        inv = self.temp(f"1.0/{b[0]}" if b[0] is not None else "1.0/0.0")
        out = [None] * self.nslots
        for u in sorted(range(self.nslots), key=_popcount):
            expr = a[u]
            for group in _MUL[self.k][u]:
                terms = [f"{out[s]}*{b[t]}" for s, t in group
                         if s != u and out[s] is not None
                         and b[t] is not None]
                if not terms:
                    continue
                sub = (terms[0] if len(terms) == 1
                       else "(" + " + ".join(terms) + ")")
                expr = f"-{sub}" if expr is None else f"{expr} - {sub}"
            out[u] = None if expr is None else self.temp(f"({expr})*{inv}")
        return out

    def compose(self, a, derivs):
        """Chain rule through g given source strings for g, g', g''(...)."""
        from .jets import _FAA
        a = self.bind(a)
        derivs = self.bind(list(derivs))
        out = [derivs[0]]
        for u in range(1, self.nslots):
            terms = []
            for nblocks, blocks in _FAA[self.k][u]:
                if derivs[nblocks] is None:
                    continue
                factors = [a[bm] for bm in blocks]
                if any(f is None for f in factors):
                    continue
                prod = (factors[0] if len(factors) == 1
                        else "(" + "*".join(factors) + ")")
                terms.append(f"{derivs[nblocks]}*{prod}")
            out.append(" + ".join(terms) if terms else None)
        return out

    def pow(self, a, n):
        a = self.bind(a)
        x = a[0] if a[0] is not None else "0.0"
        derivs = []
        coeff = 1
        p = n
        for _ in range(self.k + 1):
            if coeff == 0:
                derivs.append(None)
            elif p == 0:
                derivs.append(f"{float(coeff)!r}")
            elif p == 1:
                derivs.append(f"{float(coeff)!r}*{x}" if coeff != 1 else x)
            else:
                derivs.append(f"{float(coeff)!r}*{x}**{p}"
                              if coeff != 1 else f"{x}**{p}")
            coeff *= p
            p -= 1
        return self.compose(a, derivs)

    def fun(self, a, name):
        a = self.bind(a)
        x = a[0] if a[0] is not None else "0.0"
        k = self.k
        if name == "sin":
            s = self.temp(f"_sin({x})")
            c = self.temp(f"_cos({x})") if k >= 1 else None
            derivs = (s, c, f"(-{s})", f"(-{c})")
        elif name == "cos":
            c = self.temp(f"_cos({x})")
            s = self.temp(f"_sin({x})") if k >= 1 else None
            derivs = (c, f"(-{s})", f"(-{c})", s)
        elif name == "tan":
            t = self.temp(f"_tan({x})")
            g1 = self.temp(f"1.0 + {t}*{t}") if k >= 1 else None
            derivs = (t, g1, f"2.0*{t}*{g1}", f"{g1}*(2.0 + 6.0*{t}*{t})")
        elif name == "exp":
            e = self.temp(f"_exp({x})")
            derivs = (e, e, e, e)
        elif name == "log":
            inv = self.temp(f"1.0/{x}") if k >= 1 else None
            derivs = (f"_log({x})", inv, f"(-{inv}*{inv})",
                      f"2.0*{inv}*{inv}*{inv}")
        elif name == "sqrt":
            r = self.temp(f"_sqrt({x})")
            inv = self.temp(f"0.5/{r}") if k >= 1 else None
            derivs = (r, inv, f"(-0.5*{inv}/{x})", f"1.5*{inv}/({x}*{x})")
        else:
            raise ValueError(name)
        return self.compose(a, derivs[: k + 1])


def _emit(gen, expr, leaf_slots):
    if isinstance(expr, Const):
        return [f"{expr.value!r}"] + [None] * (gen.nslots - 1)
    if isinstance(expr, Ref):
        return leaf_slots(expr.name)
    if isinstance(expr, Neg):
        return gen.neg(_emit(gen, expr.arg, leaf_slots))
    if isinstance(expr, Add):
        return gen.add(_emit(gen, expr.left, leaf_slots),
                       _emit(gen, expr.right, leaf_slots), "+")
    if isinstance(expr, Sub):
        return gen.add(_emit(gen, expr.left, leaf_slots),
                       _emit(gen, expr.right, leaf_slots), "-")
    if isinstance(expr, Mul):
        return gen.mul(_emit(gen, expr.left, leaf_slots),
                       _emit(gen, expr.right, leaf_slots))
    if isinstance(expr, Div):
        return gen.div(_emit(gen, expr.left, leaf_slots),
                       _emit(gen, expr.right, leaf_slots))
    if isinstance(expr, Pow):
        return gen.pow(_emit(gen, expr.base, leaf_slots), expr.exponent)
    if isinstance(expr, Fun):
        return gen.fun(_emit(gen, expr.arg, leaf_slots), expr.name)
    raise TypeError(f"not an expression node: {expr!r}")


def compile_taylor(expr, var_names, param_names, k):
    """Compile a scalar evaluator f(vals, params, *dirs) -> slot tuple.

    vals and each direction are positional tuples following var_names; params
    follows param_names.  Mixed leaf slots are structurally zero, which the
    generated code exploits.
    """
    var_index = {name: i for i, name in enumerate(var_names)}
    param_index = {name: i for i, name in enumerate(param_names)}
    nslots = 1 << k
    gen = _Codegen(k, nslots)

    def leaf_slots(name):
        if name in var_index:
            i = var_index[name]
            slots = [f"v[{i}]"]
            for d in range(k):
                slots.append(f"d{d}[{i}]")
            # mixed slots of a linear leaf vanish
            slots += [None] * (nslots - k - 1)
            # reorder: singleton masks are 1, 2, 4
            out = [None] * nslots
            out[0] = slots[0]
            for d in range(k):
                out[1 << d] = slots[1 + d]
            return out
        if name in param_index:
            out = [None] * nslots
            out[0] = f"p[{param_index[name]}]"
            return out
        raise UnboundNameError(f"unbound name {name!r}")

    result = gen.bind(_emit(gen, expr, leaf_slots))
    dirs = ", ".join(f"d{d}" for d in range(k))
    header = f"def _f(v, p{', ' + dirs if dirs else ''}):"
    ret = ", ".join("0.0" if s is None else s for s in result)
    source = "\n".join([header] + gen.lines + [f"    return ({ret},)"])
    namespace = dict(_MATH_GLOBALS)
    exec(compile(source, f"<taylor k={k}>", "exec"), namespace)
    fn = namespace["_f"]
    fn.__source__ = source
    return fn


# ---------------------------------------------------------------------------
# Resolved expression functions


class ExprFunction:
    """An expression resolved against an ordered declaration set.

    Provides plain evaluation and exact jets of any order up to three
    directions, over scalars or batched numpy arrays.
    """

    def __init__(self, expr, var_names, param_names=()):
        if isinstance(expr, str):
            expr = parse(expr)
        self.expr = expr
        self.var_names = tuple(var_names)
        self.param_names = tuple(param_names)
        declared = set(self.var_names) | set(self.param_names)
        missing = free_names(expr) - declared
        if missing:
            raise UnboundNameError(
                f"unbound name(s) in expression: {', '.join(sorted(missing))}")
        self._compiled = {}

    def _fn(self, k):
        fn = self._compiled.get(k)
        if fn is None:
            fn = compile_taylor(self.expr, self.var_names, self.param_names, k)
            self._compiled[k] = fn
        return fn

    def value(self, vals, params=()):
        try:
            return self._fn(0)(tuple(vals), tuple(params))[0]
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalDomainError(str(exc)) from exc

    def taylor(self, vals, params, dirs):
        """Slots of the jet along the given directions (tuple per direction)."""
        k = len(dirs)
        try:
            return self._fn(k)(tuple(vals), tuple(params), *map(tuple, dirs))
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalDomainError(str(exc)) from exc

    def taylor_env(self, env):
        """Tree evaluation with arbitrary leaf values (TaylorValues/arrays)."""
        merged = dict(env)
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return tree_eval(self.expr, merged)
        except (ZeroDivisionError, FloatingPointError, ValueError,
                OverflowError) as exc:
            raise EvalDomainError(str(exc)) from exc


def _as_float_map(mapping):
    return {k: float(v) for k, v in mapping.items()}


def eval_value(expr, point, params=None):
    """Plain evaluation with named bindings."""
    env = _as_float_map(point)
    if params:
        env.update(_as_float_map(params))
    try:
        with np.errstate(divide="raise", invalid="raise"):
            return tree_eval(expr, env)
    except (ZeroDivisionError, FloatingPointError, ValueError) as exc:
        raise EvalDomainError(str(exc)) from exc


def eval_jet2(expr, point, params=None, dir1=None, dir2=None):
    """Exact 2-jet of an expression along the plane spanned by two directions.

    Directions assign a rate to each variable; omitted variables move with
    rate zero, and parameters are constants.  Implemented by propagating
    truncated Taylor coefficients through the AST.
    """
    if isinstance(expr, str):
        expr = parse(expr)
    params = params or {}
    dir1 = dir1 or {}
    dir2 = dir2 or {}
    env = {}
    for name, x in point.items():
        env[name] = TaylorValue.variable(
            float(x), (float(dir1.get(name, 0.0)), float(dir2.get(name, 0.0))), 2)
    for name, x in params.items():
        env[name] = TaylorValue.constant(float(x), 2)
    for d in (dir1, dir2):
        for name in d:
            if name not in point:
                raise UnboundNameError(
                    f"direction names unknown variable {name!r}")
    try:
        with np.errstate(divide="raise", invalid="raise"):
            out = tree_eval(expr, env)
    except (ZeroDivisionError, FloatingPointError, ValueError) as exc:
        raise EvalDomainError(str(exc)) from exc
    if not isinstance(out, TaylorValue):
        out = TaylorValue.constant(out, 2)
    return out.jet2()
