"""First-order formulas over finite structures: parsing, evaluation, counting.

Grammar (precedence ! > & > | > ->, quantifier scope extends maximally right):

    formula := quant | impl
    quant   := ("exists" | "forall") IDENT "." formula
    impl    := disj [ "->" impl ]
    disj    := conj { "|" conj }
    conj    := neg { "&" neg }
    neg     := "!" neg | atom
    atom    := "(" formula ")" | term "=" term | IDENT "(" term {"," term} ")"
    term    := factor { ("+"|"-") factor }
    factor  := prim { "*" prim }
    prim    := IDENT | NUMERAL | "(" term ")" | IDENT "(" term {"," term} ")"

The operators +, -, * map to the signature functions add, sub, mul. Before
evaluation, implications and universal quantifiers are rewritten away and
shadowed bound variables are renamed, so a single evaluation path handles
every formula.

Evaluation is brute force over the universe with one optimization: an
existential whose body is an equation with the bound variable isolated on one
side (for example `exists z. z*z = x - y`) is answered by membership in the
precomputed image set of that side, cached per structure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationError,
    FormulaSyntaxError,
    FreeVariableError,
    SignatureMismatchError,
)
from .finitemodels import FiniteStructure, Signature

# ---------------------------------------------------------------------------
# Syntax trees

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Apply:
    func: str
    args: tuple


Term = Var | Num | Apply


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Rel:
    name: str
    args: tuple


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Eq | Rel | Not | And | Or | Implies | Exists | Forall

# Assignments map variable names to element indices.
Assignment = dict[str, int]


def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Num):
        return set()
    out: set[str] = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def free_vars(f: Formula) -> set[str]:
    if isinstance(f, Eq):
        return term_vars(f.left) | term_vars(f.right)
    if isinstance(f, Rel):
        out: set[str] = set()
        for a in f.args:
            out |= term_vars(a)
        return out
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or, Implies)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def quantifier_depth(f: Formula) -> int:
    if isinstance(f, (Eq, Rel)):
        return 0
    if isinstance(f, Not):
        return quantifier_depth(f.body)
    if isinstance(f, (And, Or, Implies)):
        return max(quantifier_depth(f.left), quantifier_depth(f.right))
    if isinstance(f, (Exists, Forall)):
        return 1 + quantifier_depth(f.body)
    raise TypeError(f"not a formula: {f!r}")


def free_vars_in_order(f: Formula) -> list[str]:
    """Free variables in order of first appearance, reading left to right."""
    seen: list[str] = []

    def term(t, bound):
        if isinstance(t, Var):
            if t.name not in bound and t.name not in seen:
                seen.append(t.name)
        elif isinstance(t, Apply):
            for a in t.args:
                term(a, bound)

    def walk(g, bound):
        if isinstance(g, Eq):
            term(g.left, bound)
            term(g.right, bound)
        elif isinstance(g, Rel):
            for a in g.args:
                term(a, bound)
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, (And, Or, Implies)):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, (Exists, Forall)):
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return seen


# ---------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<num>\d+)|(?P<sym>[()=+\-*!&|.,]))"
)

_KEYWORDS = {"exists", "forall"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
            break
        if m.group("arrow"):
            tokens.append(("arrow", "->", m.start("arrow")))
        elif m.group("ident"):
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        elif m.group("num"):
            tokens.append(("num", m.group("num"), m.start("num")))
        else:
            tokens.append(("sym", m.group("sym"), m.start("sym")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, sig: Signature):
        self.text = text
        self.sig = sig
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.next()
        if val != value:
            raise FormulaSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def at(self, value):
        return self.peek()[1] == value

    # formula := quant | impl
    def formula(self) -> Formula:
        kind, val, pos = self.peek()
        if kind == "ident" and val in _KEYWORDS:
            self.next()
            vkind, vname, vpos = self.next()
            if vkind != "ident" or vname in _KEYWORDS:
                raise FormulaSyntaxError("expected a variable after quantifier", vpos)
            if vname in self.sig.functions or vname in self.sig.relations:
                raise FormulaSyntaxError(f"cannot bind signature symbol {vname!r}", vpos)
            self.expect(".")
            body = self.formula()
            return Exists(vname, body) if val == "exists" else Forall(vname, body)
        return self.impl()

    def impl(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.next()
            return Implies(left, self.impl())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.neg()
        while self.at("&"):
            self.next()
            f = And(f, self.neg())
        return f

    def neg(self) -> Formula:
        if self.at("!"):
            self.next()
            return Not(self.neg())
        return self.atom()

    def atom(self) -> Formula:
        kind, val, pos = self.peek()
        if val == "(":
            # Could be a parenthesized formula or a parenthesized term on the
            # left of an equation; try the formula reading, then backtrack.
            mark = self.i
            try:
                self.next()
                f = self.formula()
                self.expect(")")
                return f
            except FormulaSyntaxError:
                self.i = mark
        if kind == "ident" and val in self.sig.relations:
            self.next()
            args = self.arg_list(val, self.sig.relations[val], pos)
            return Rel(val, tuple(args))
        left = self.term()
        self.expect("=")
        right = self.term()
        return Eq(left, right)

    def arg_list(self, name, arity, pos):
        self.expect("(")
        args = [self.term()]
        while self.at(","):
            self.next()
            args.append(self.term())
        self.expect(")")
        if len(args) != arity:
            raise FormulaSyntaxError(
                f"{name!r} expects {arity} argument(s), got {len(args)}", pos
            )
        return args

    def term(self) -> Term:
        t = self.factor()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = Apply("add" if op == "+" else "sub", (t, self.factor()))
        return t

    def factor(self) -> Term:
        t = self.prim()
        while self.at("*"):
            self.next()
            t = Apply("mul", (t, self.prim()))
        return t

    def prim(self) -> Term:
        kind, val, pos = self.next()
        if kind == "num":
            return Num(int(val))
        if val == "(":
            t = self.term()
            self.expect(")")
            return t
        if kind != "ident" or val in _KEYWORDS:
            raise FormulaSyntaxError(f"expected a term, found {val or 'end of input'!r}", pos)
        if val in self.sig.relations:
            raise FormulaSyntaxError(f"relation {val!r} used inside a term", pos)
        if val in self.sig.functions:
            arity = self.sig.functions[val]
            if arity == 0:
                return Apply(val, ())
            if not self.at("("):
                raise FormulaSyntaxError(f"function {val!r} needs {arity} argument(s)", pos)
            args = self.arg_list(val, arity, pos)
            return Apply(val, tuple(args))
        if self.at("("):
            raise SignatureMismatchError(f"unknown symbol {val!r}")
        return Var(val)

    def parse(self) -> Formula:
        f = self.formula()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError(f"trailing input {val!r}", pos)
        return f

    def check_terms(self, f: Formula):
        """Verify arities of every application (terms built by hand too)."""
        def term(t):
            if isinstance(t, Apply):
                if t.func not in self.sig.functions:
                    raise SignatureMismatchError(f"unknown function {t.func!r}")
                if len(t.args) != self.sig.functions[t.func]:
                    raise SignatureMismatchError(f"arity mismatch for {t.func!r}")
                for a in t.args:
                    term(a)

        def walk(g):
            if isinstance(g, Eq):
                term(g.left)
                term(g.right)
            elif isinstance(g, Rel):
                if g.name not in self.sig.relations:
                    raise SignatureMismatchError(f"unknown relation {g.name!r}")
                if len(g.args) != self.sig.relations[g.name]:
                    raise SignatureMismatchError(f"arity mismatch for {g.name!r}")
                for a in g.args:
                    term(a)
            elif isinstance(g, Not):
                walk(g.body)
            elif isinstance(g, (And, Or, Implies)):
                walk(g.left)
                walk(g.right)
            elif isinstance(g, (Exists, Forall)):
                walk(g.body)

        walk(f)


def parse(text: str, sig: Signature) -> Formula:
    """Parse a formula without the object/parameter split."""
    return _Parser(text, sig).parse()


# ---------------------------------------------------------------------------
# Normalization: drop -> and forall, rename shadowed bound variables.

def _rename_term(t: Term, env: dict[str, str]) -> Term:
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name))
    if isinstance(t, Apply):
        return Apply(t.func, tuple(_rename_term(a, env) for a in t.args))
    return t


def normalize(f: Formula) -> Formula:
    """One evaluation path: -> rewritten to !|, forall to !exists!, and any
    bound variable that collides with an enclosing binder or a free variable
    renamed to a fresh name."""
    taken = set(free_vars(f))

    def fresh(name):
        k = 1
        while f"{name}_{k}" in taken:
            k += 1
        return f"{name}_{k}"

    def walk(g, env, active):
        if isinstance(g, Eq):
            return Eq(_rename_term(g.left, env), _rename_term(g.right, env))
        if isinstance(g, Rel):
            return Rel(g.name, tuple(_rename_term(a, env) for a in g.args))
        if isinstance(g, Not):
            return Not(walk(g.body, env, active))
        if isinstance(g, And):
            return And(walk(g.left, env, active), walk(g.right, env, active))
        if isinstance(g, Or):
            return Or(walk(g.left, env, active), walk(g.right, env, active))
        if isinstance(g, Implies):
            return Or(Not(walk(g.left, env, active)), walk(g.right, env, active))
        if isinstance(g, (Exists, Forall)):
            name = g.var
            if name in active or name in free_vars(f):
                name = fresh(g.var)
                taken.add(name)
            body = walk(g.body, {**env, g.var: name}, active | {name})
            if isinstance(g, Exists):
                return Exists(name, body)
            return Not(Exists(name, Not(body)))
        raise TypeError(f"not a formula: {g!r}")

    return walk(f, {}, frozenset())


# ---------------------------------------------------------------------------
# Pretty printing (reparses to the same tree)

_FORMULA_LEVEL = {Implies: 1, Or: 2, And: 3, Not: 4, Eq: 5, Rel: 5}


def _pp_term(t: Term, level: int = 0) -> str:
    # term levels: add/sub chain 1, mul chain 2, prim 3
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        return str(t.value)
    if t.func in ("add", "sub") and len(t.args) == 2:
        op = "+" if t.func == "add" else "-"
        s = f"{_pp_term(t.args[0], 1)} {op} {_pp_term(t.args[1], 2)}"
        return f"({s})" if level > 1 else s
    if t.func == "mul" and len(t.args) == 2:
        s = f"{_pp_term(t.args[0], 2)} * {_pp_term(t.args[1], 3)}"
        return f"({s})" if level > 2 else s
    if not t.args:
        return t.func
    return f"{t.func}({', '.join(_pp_term(a) for a in t.args)})"


def pretty(f: Formula, level: int = 0) -> str:
    if isinstance(f, (Exists, Forall)):
        word = "exists" if isinstance(f, Exists) else "forall"
        s = f"{word} {f.var}. {pretty(f.body)}"
        return f"({s})" if level > 0 else s
    if isinstance(f, Implies):
        s = f"{pretty(f.left, 2)} -> {pretty(f.right, 1)}"
        return f"({s})" if level > 1 else s
    if isinstance(f, Or):
        s = f"{pretty(f.left, 2)} | {pretty(f.right, 3)}"
        return f"({s})" if level > 2 else s
    if isinstance(f, And):
        s = f"{pretty(f.left, 3)} & {pretty(f.right, 4)}"
        return f"({s})" if level > 3 else s
    if isinstance(f, Not):
        body = pretty(f.body, 4)
        if isinstance(f.body, (Eq, Rel)):
            body = f"({pretty(f.body)})"
        return f"!{body}"
    if isinstance(f, Eq):
        return f"{_pp_term(f.left, 1)} = {_pp_term(f.right, 1)}"
    if isinstance(f, Rel):
        return f"{f.name}({', '.join(_pp_term(a) for a in f.args)})"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Parametrized formulas

@dataclass(frozen=True)
class ParamFormula:
    """A formula with one distinguished object variable and an ordered
    parameter tuple; the free variables are exactly {object} + params."""

    formula: Formula
    object_var: str
    params: tuple[str, ...]
    text: str

    @property
    def arity(self) -> int:
        return len(self.params)

    def key(self) -> str:
        return pretty(self.formula)

    def __str__(self):
        return self.text


def parse_formula(
    text: str,
    sig: Signature,
    object_var: str = "x",
    params: tuple[str, ...] | None = None,
) -> ParamFormula:
    """Parse and normalize a parametrized formula.

    When `params` is omitted, the parameters are the free variables other
    than the object variable, in order of first appearance.
    """
    parser = _Parser(text, sig)
    raw = parser.parse()
    parser.check_terms(raw)
    norm = normalize(raw)
    order = free_vars_in_order(norm)
    if object_var not in order:
        raise FreeVariableError(f"object variable {object_var!r} is not free in {text!r}")
    inferred = tuple(v for v in order if v != object_var)
    if params is None:
        params = inferred
    elif set(params) != set(inferred) or len(params) != len(inferred):
        raise FreeVariableError(
            f"declared parameters {params!r} do not match free variables {inferred!r}"
        )
    return ParamFormula(norm, object_var, tuple(params), text)


# ---------------------------------------------------------------------------
# Scalar evaluation

def _image_mask(M: FiniteStructure, term: Term, var: str) -> np.ndarray:
    """Boolean mask over the universe: which values the term attains as the
    variable ranges over the whole universe. Cached on the structure."""
    key = ("image", term, var)
    mask = M._cache.get(key)
    if mask is None:
        vals = _bulk_term(M, term, {var: np.arange(M.size)})
        mask = np.zeros(M.size, dtype=bool)
        mask[np.asarray(vals, dtype=np.intp)] = True
        mask.flags.writeable = False
        M._cache[key] = mask
    return mask


def _memo_split(f: Exists):
    """If the body is an equation with the bound variable confined to one
    side, return (image_term, other_term); else None."""
    if not isinstance(f.body, Eq):
        return None
    lv, rv = term_vars(f.body.left), term_vars(f.body.right)
    if lv <= {f.var} and f.var not in rv:
        return f.body.left, f.body.right
    if rv <= {f.var} and f.var not in lv:
        return f.body.right, f.body.left
    return None


def eval_term(M: FiniteStructure, t: Term, a: Assignment) -> int:
    if isinstance(t, Var):
        try:
            return a[t.name]
        except KeyError:
            raise EvaluationError(f"no binding for variable {t.name!r}") from None
    if isinstance(t, Num):
        return M.numeral(t.value)
    table = M.functions[t.func]
    if not t.args:
        return int(table)
    idx = tuple(eval_term(M, arg, a) for arg in t.args)
    return int(table[idx])


def evaluate(M: FiniteStructure, f: Formula, a: Assignment, use_memo: bool = True) -> bool:
    """Tarskian truth value; quantifiers range over the whole universe."""
    if isinstance(f, Eq):
        return eval_term(M, f.left, a) == eval_term(M, f.right, a)
    if isinstance(f, Rel):
        idx = tuple(eval_term(M, arg, a) for arg in f.args)
        return bool(M.relations[f.name][idx])
    if isinstance(f, Not):
        return not evaluate(M, f.body, a, use_memo)
    if isinstance(f, And):
        return evaluate(M, f.left, a, use_memo) and evaluate(M, f.right, a, use_memo)
    if isinstance(f, Or):
        return evaluate(M, f.left, a, use_memo) or evaluate(M, f.right, a, use_memo)
    if isinstance(f, Implies):
        return (not evaluate(M, f.left, a, use_memo)) or evaluate(M, f.right, a, use_memo)
    if isinstance(f, Forall):
        return not _exists(M, Exists(f.var, Not(f.body)), a, use_memo)
    if isinstance(f, Exists):
        return _exists(M, f, a, use_memo)
    raise TypeError(f"not a formula: {f!r}")


def _exists(M, f: Exists, a: Assignment, use_memo: bool) -> bool:
    if use_memo:
        split = _memo_split(f)
        if split is not None:
            image_term, other = split
            return bool(_image_mask(M, image_term, f.var)[eval_term(M, other, a)])
    saved = a.get(f.var, _MISSING)
    try:
        for c in range(M.size):
            a[f.var] = c
            if evaluate(M, f.body, a, use_memo):
                return True
        return False
    finally:
        if saved is _MISSING:
            a.pop(f.var, None)
        else:
            a[f.var] = saved


_MISSING = object()


def evaluate_naive(M: FiniteStructure, f: Formula, a: Assignment) -> bool:
    """Reference evaluator: nested quantifier loops, no image-set memoization."""
    return evaluate(M, f, dict(a), use_memo=False)


# ---------------------------------------------------------------------------
# Vectorized evaluation

def _bulk_term(M: FiniteStructure, t: Term, env: dict) -> np.ndarray | int:
    if isinstance(t, Var):
        try:
            return env[t.name]
        except KeyError:
            raise EvaluationError(f"no binding for variable {t.name!r}") from None
    if isinstance(t, Num):
        return M.numeral(t.value)
    table = M.functions[t.func]
    if not t.args:
        return int(table)
    args = [_bulk_term(M, arg, env) for arg in t.args]
    return table[tuple(args)]


def eval_bulk(M: FiniteStructure, f: Formula, env: dict) -> np.ndarray:
    """Evaluate over numpy index arrays (broadcast together); returns bool array."""
    if isinstance(f, Eq):
        return np.asarray(_bulk_term(M, f.left, env) == _bulk_term(M, f.right, env))
    if isinstance(f, Rel):
        args = tuple(_bulk_term(M, a, env) for a in f.args)
        return np.asarray(M.relations[f.name][args])
    if isinstance(f, Not):
        return ~eval_bulk(M, f.body, env)
    if isinstance(f, And):
        return eval_bulk(M, f.left, env) & eval_bulk(M, f.right, env)
    if isinstance(f, Or):
        return eval_bulk(M, f.left, env) | eval_bulk(M, f.right, env)
    if isinstance(f, Implies):
        return ~eval_bulk(M, f.left, env) | eval_bulk(M, f.right, env)
    if isinstance(f, Forall):
        return ~eval_bulk(M, Exists(f.var, Not(f.body)), env)
    if isinstance(f, Exists):
        split = _memo_split(f)
        if split is not None:
            image_term, other = split
            mask = _image_mask(M, image_term, f.var)
            return np.asarray(mask[_bulk_term(M, other, env)])
        out = None
        for c in range(M.size):
            r = eval_bulk(M, f.body, {**env, f.var: c})
            out = r.copy() if out is None else out | r
            if out.all():
                break
        return np.asarray(out)
    raise TypeError(f"not a formula: {f!r}")


def _check_params(pf: ParamFormula, params) -> tuple[int, ...]:
    params = tuple(int(v) for v in params)
    if len(params) != pf.arity:
        raise EvaluationError(
            f"formula {pf.text!r} takes {pf.arity} parameter(s), got {len(params)}"
        )
    return params


def solution_set(M: FiniteStructure, pf: ParamFormula, params=()) -> list[int]:
    """Elements satisfying the formula at the given parameters, index order."""
    params = _check_params(pf, params)
    env = {pf.object_var: np.arange(M.size)}
    env.update(zip(pf.params, params))
    mask = eval_bulk(M, pf.formula, env)
    return [int(v) for v in np.flatnonzero(mask)]


def solution_count(M: FiniteStructure, pf: ParamFormula, params=()) -> int:
    params = _check_params(pf, params)
    env = {pf.object_var: np.arange(M.size)}
    env.update(zip(pf.params, params))
    return int(eval_bulk(M, pf.formula, env).sum())


def solution_mask_matrix(
    M: FiniteStructure, pf: ParamFormula, param_columns: np.ndarray
) -> np.ndarray:
    """Boolean matrix of shape (size, m): entry (a, j) says whether element a
    satisfies the formula at the j-th parameter tuple. `param_columns` has
    shape (arity, m)."""
    param_columns = np.atleast_2d(np.asarray(param_columns, dtype=np.intp))
    if param_columns.shape[0] != pf.arity:
        raise EvaluationError(f"expected {pf.arity} parameter rows")
    env = {pf.object_var: np.arange(M.size, dtype=np.intp)[:, None]}
    for name, col in zip(pf.params, param_columns):
        env[name] = col[None, :]
    return eval_bulk(M, pf.formula, env)


def solution_counts_all(
    M: FiniteStructure, pf: ParamFormula, chunk: int = 1 << 24
) -> np.ndarray:
    """Solution counts for every parameter tuple, flattened in lexicographic
    order (shape (size**arity,)). Work is chunked to bound memory."""
    n = M.size
    k = pf.arity
    total = n**k
    counts = np.empty(total, dtype=np.int64)
    step = max(1, chunk // max(n, 1))
    for start in range(0, total, step):
        flat = np.arange(start, min(start + step, total), dtype=np.int64)
        cols = np.array(np.unravel_index(flat, (n,) * k), dtype=np.intp) if k else np.empty((0, len(flat)), dtype=np.intp)
        counts[start : start + len(flat)] = solution_mask_matrix(M, pf, cols).sum(axis=0)
    return counts
