"""Concrete syntax for models: tokenizer, parser, evaluator and printers.

Parsing happens in two passes. The first builds a small syntax tree for every
declaration; the second evaluates those trees against the declared names,
expanding parameters and finite sums into ground terms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterator

from .datastate import BoolOp, Cmp, Predicate
from .model import MAIN_SPEC, ActionDecl, ArityMismatch, Model, ModelError, UndeclaredName
from .terms import (
    Abstract, ActionLabel, Alt, AltG, Atom, AtomPred, Comm, ConflictElim, Encapsulate,
    EmptyDomain, FalseGuard, GuardAtom, GuardExpr, Merge, New, Not, Par, ParG, RecCall, RecVar, Seq,
    SeqG, Shadow, Term, TrueGuard, Unless, alt_of, label, render_guard, subterms,
)


class DslSyntaxError(ModelError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line, self.col, self.expected, self.found = line, col, expected, found
        super().__init__(f"{line}:{col}: expected {expected}, found {found!r}")


KEYWORDS = {
    "model", "domain", "fun", "act", "extern", "comm", "conflict", "order", "when",
    "mailbox", "cap", "var", "pred", "effect", "set", "proc", "system", "spec",
    "delta", "eps", "tau", "theta", "unless", "new", "encap", "hide", "sum",
    "send", "recv", "true", "false", "skip",
}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|//[^\n]*)
  | (?P<nl>\n)
  | (?P<op>\|\|\||\|\||->|:=|<=|==|!=|&&|[|.+(){}\[\],;:=#@!&])
  | (?P<num>[0-9]+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # "op" | "num" | "id" | "kw" | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DslSyntaxError(line, pos - line_start + 1, "a token", text[pos])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            word = m.group()
            if kind == "id" and word in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, word, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ------------------------------------------------------------ syntax trees
# Syntax nodes are plain tuples tagged by their first element.


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text in texts

    def fail(self, expected: str):
        raise DslSyntaxError(self.tok.line, self.tok.col, expected, self.tok.text)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        if self.tok.kind != "id":
            self.fail("an identifier")
        word = self.tok.text
        self.i += 1
        return word

    def value(self) -> str:
        if self.tok.kind not in ("id", "num"):
            self.fail("a value")
        word = self.tok.text
        self.i += 1
        return word

    def number(self) -> int:
        if self.tok.kind != "num":
            self.fail("a number")
        word = self.tok.text
        self.i += 1
        return int(word)

    # ---------------------------------------------------------- declarations

    def model(self) -> list[tuple]:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.declaration())
        return decls

    def declaration(self) -> tuple:
        tok = self.tok
        if tok.kind != "kw":
            self.fail("a declaration keyword")
        handler = getattr(self, f"decl_{tok.text}", None)
        if handler is None:
            self.fail("a declaration keyword")
        self.i += 1
        node = handler()
        self.expect(";")
        return node + ((tok.line, tok.col),)

    def decl_model(self):
        return ("model", self.ident())

    def decl_domain(self):
        name = self.ident()
        self.expect("=")
        return ("domain", name, tuple(self.braced(self.value)))

    def decl_fun(self):
        name = self.ident()
        self.expect(":")
        dom = self.ident()
        self.expect("->")
        cod = self.ident()
        self.expect("=")

        def pair():
            left = self.value()
            self.expect("->")
            return (left, self.value())

        return ("fun", name, dom, cod, tuple(self.braced(pair)))

    def decl_act(self):
        items = [self.act_item()]
        while self.accept(","):
            items.append(self.act_item())
        return ("act", tuple(items))

    def act_item(self):
        name = self.ident()
        params: tuple[str, ...] = ()
        if self.accept("("):
            params = tuple(self.comma_list(self.ident, ")"))
        role = box = None
        if self.accept("["):
            if not self.at("send", "recv"):
                self.fail("'send' or 'recv'")
            role = self.tok.text
            self.i += 1
            box = self.ident()
            self.expect("]")
        return (name, params, role, box)

    def decl_extern(self):
        items = [self.pattern()]
        while self.accept(","):
            items.append(self.pattern())
        return ("extern", tuple(items))

    def decl_comm(self):
        left = self.pattern()
        self.expect("|")
        right = self.pattern()
        self.expect("=")
        return ("comm", left, right, self.pattern())

    def decl_conflict(self):
        left = self.pattern()
        self.expect("#")
        right = self.pattern()
        return ("conflict", left, right, self.when())

    def decl_order(self):
        left = self.pattern()
        self.expect("<=")
        right = self.pattern()
        return ("order", left, right, self.when())

    def when(self):
        if not self.accept("when"):
            return ()
        conds = [self.cond()]
        while self.accept("&&"):
            conds.append(self.cond())
        return tuple(conds)

    def cond(self):
        left = self.arg()
        if self.accept("=="):
            return ("==", left, self.arg())
        self.expect("!=")
        return ("!=", left, self.arg())

    def decl_mailbox(self):
        name = self.ident()
        cap = None
        if self.accept("cap"):
            cap = self.number()
        return ("mailbox", name, cap)

    def decl_var(self):
        name = self.ident()
        self.expect(":")
        dom = self.ident()
        self.expect("=")
        return ("var", name, dom, self.value())

    def decl_pred(self):
        name = self.ident()
        params: tuple = ()
        if self.accept("("):
            params = tuple(self.comma_list(self.typed_param, ")"))
        self.expect("=")
        return ("pred", name, params, self.pred_or())

    def typed_param(self):
        name = self.ident()
        self.expect(":")
        return (name, self.ident())

    def pred_or(self):
        parts = [self.pred_and()]
        while self.accept("||"):
            parts.append(self.pred_and())
        return parts[0] if len(parts) == 1 else BoolOp("or", tuple(parts))

    def pred_and(self):
        parts = [self.pred_not()]
        while self.accept("&&"):
            parts.append(self.pred_not())
        return parts[0] if len(parts) == 1 else BoolOp("and", tuple(parts))

    def pred_not(self):
        if self.accept("!"):
            return BoolOp("not", (self.pred_not(),))
        if self.accept("("):
            inner = self.pred_or()
            self.expect(")")
            return inner
        if self.accept("true"):
            return BoolOp("true")
        if self.accept("false"):
            return BoolOp("false")
        var = self.ident()
        if self.accept("=="):
            return Cmp(var, self.value())
        self.expect("!=")
        return Cmp(var, self.value(), True)

    def decl_effect(self):
        target = self.pattern()
        self.expect("=")
        branches = [self.assignments()]
        while self.accept("|"):
            branches.append(self.assignments())
        return ("effect", target, tuple(branches))

    def assignments(self):
        if self.accept("skip"):
            return ()
        out = [self.assignment()]
        while self.accept(","):
            out.append(self.assignment())
        return tuple(out)

    def assignment(self):
        var = self.ident()
        self.expect(":=")
        return (var, self.arg())

    def decl_set(self):
        name = self.ident()
        self.expect("=")
        return ("set", name, tuple(self.braced(self.pattern)))

    def decl_proc(self):
        name = self.ident()
        params: tuple = ()
        if self.accept("("):
            params = tuple(self.comma_list(self.proc_param, ")"))
        self.expect("=")
        return ("proc", name, params, self.term())

    def proc_param(self):
        if self.peek().kind == "op" and self.peek().text == ":":
            return ("bind",) + self.typed_param()
        return ("lit", self.value())

    def decl_system(self):
        self.expect("=")
        return ("system", self.term())

    def decl_spec(self):
        self.expect("=")
        return ("spec", self.term())

    # ---------------------------------------------------------- shared pieces

    def braced(self, item) -> list:
        self.expect("{")
        if self.accept("}"):
            return []
        return self.comma_list(item, "}")

    def comma_list(self, item, close: str) -> list:
        out = [item()]
        while self.accept(","):
            out.append(item())
        self.expect(close)
        return out

    def pattern(self) -> tuple:
        name = self.ident() if self.tok.kind == "id" else self.fail("an action")
        args: tuple = ()
        if self.accept("("):
            args = tuple(self.comma_list(self.arg, ")"))
        return ("pat", name, args)

    def arg(self) -> tuple:
        word = self.value()
        if self.accept("("):
            inner = self.arg()
            self.expect(")")
            return ("fun", word, inner)
        return ("val", word)

    # ---------------------------------------------------------- terms

    def term(self) -> tuple:
        parts = [self.par()]
        while self.accept("+"):
            parts.append(self.par())
        node = parts[-1]
        for p in reversed(parts[:-1]):
            node = ("alt", p, node)
        return node

    def par(self) -> tuple:
        node = self.seq()
        while self.at("|||", "||", "|"):
            op = {"|||": "par", "||": "merge", "|": "comm"}[self.tok.text]
            self.i += 1
            node = (op, node, self.seq())
        return node

    def seq(self) -> tuple:
        head = self.primary()
        if self.accept("."):
            return ("seq", head, self.seq())
        return head

    def primary(self) -> tuple:
        tok = self.tok
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        if tok.kind == "kw":
            if tok.text in ("delta", "eps", "tau"):
                self.i += 1
                return ("const", tok.text)
            if tok.text in ("theta", "new"):
                self.i += 1
                self.expect("(")
                body = self.term()
                self.expect(")")
                return (tok.text, body)
            if tok.text == "unless":
                self.i += 1
                self.expect("(")
                left = self.term()
                self.expect(",")
                right = self.term()
                self.expect(")")
                return ("unless", left, right)
            if tok.text in ("encap", "hide"):
                self.i += 1
                self.expect("(")
                names = self.set_ref()
                self.expect(",")
                body = self.term()
                self.expect(")")
                return (tok.text, names, body)
            if tok.text == "sum":
                self.i += 1
                var = self.ident()
                self.expect(":")
                dom = self.ident()
                self.expect(".")
                return ("sum", var, dom, self.term())
        if self.accept("@"):
            pat = self.pattern()
            index = None
            if self.accept("#"):
                index = self.number()
            return ("shadow", pat, index)
        if self.accept("["):
            guard = self.guard_or()
            self.expect("]")
            if self.accept("->"):
                return ("seq", ("guard", guard), self.seq())
            return ("guard", guard)
        if tok.kind == "id":
            return ("call",) + self.pattern()[1:]
        self.fail("a term")

    def set_ref(self) -> tuple:
        if self.at("{"):
            return ("items", tuple(self.braced(self.pattern)))
        return ("named", self.ident())

    def guard_or(self):
        node = self.guard_and()
        while self.accept("+"):
            node = ("altg", node, self.guard_and())
        return node

    def guard_and(self):
        node = self.guard_par()
        while self.accept("&"):
            node = ("seqg", node, self.guard_par())
        return node

    def guard_par(self):
        node = self.guard_not()
        while self.accept("|||"):
            node = ("parg", node, self.guard_not())
        return node

    def guard_not(self):
        if self.accept("!"):
            return ("not", self.guard_not())
        if self.accept("("):
            inner = self.guard_or()
            self.expect(")")
            return inner
        if self.accept("true"):
            return ("true",)
        if self.accept("false"):
            return ("false",)
        return ("gpat",) + self.pattern()[1:]


# ------------------------------------------------------------ evaluation


class _Evaluator:
    def __init__(self, decls: list[tuple]):
        self.decls = decls
        self.m = Model()
        self.values: set[str] = set()
        self.procs: dict[str, list[tuple]] = {}
        self.shadow_counter: dict[ActionLabel, int] = {}

    def run(self) -> Model:
        m = self.m
        for d in self.decls:
            kind = d[0]
            if kind == "model":
                m.name = d[1]
            elif kind == "domain":
                self._check_fresh(d[1], m.domains, "domain")
                m.domains[d[1]] = d[2]
                self.values.update(d[2])
            elif kind == "fun":
                _, name, dom, cod, pairs, _ = d
                for n in (dom, cod):
                    if n not in m.domains:
                        raise UndeclaredName(n)
                m.functions[name] = (dom, cod, dict(pairs))
            elif kind == "act":
                for name, params, role, box in d[1]:
                    self._check_fresh(name, m.actions, "action")
                    for p in params:
                        if p not in m.domains:
                            raise UndeclaredName(p)
                    m.actions[name] = ActionDecl(name, params, box, role)
            elif kind == "mailbox":
                m.mailboxes[d[1]] = d[2] if d[2] is not None else 4
            elif kind == "var":
                _, name, dom, init, _ = d
                if dom not in m.domains:
                    raise UndeclaredName(dom)
                if init not in m.domains[dom]:
                    raise ArityMismatch(f"initial value {init} not in {dom}")
                m.variables[name] = (dom, init)
            elif kind == "proc":
                self.procs.setdefault(d[1], []).append(d)
        for name, decl in m.actions.items():
            if decl.mailbox is not None and decl.mailbox not in m.mailboxes:
                raise UndeclaredName(decl.mailbox)
        for d in self.decls:
            kind = d[0]
            if kind == "extern":
                for pat in d[1]:
                    m.externs.add(self._ground_label(pat, {}))
            elif kind == "comm":
                for env in self._bindings((d[1], d[2], d[3]), ()):
                    m.add_gamma(self._ground_label(d[1], env), self._ground_label(d[2], env),
                                self._ground_label(d[3], env))
            elif kind in ("conflict", "order"):
                for env in self._bindings((d[1], d[2]), d[3]):
                    left, right = self._ground_label(d[1], env), self._ground_label(d[2], env)
                    if kind == "conflict":
                        if left == right:
                            raise ModelError(f"conflict must be irreflexive: {left}")
                        m.conflicts.add(frozenset((left, right)))
                    else:
                        m.order.add((left, right))
            elif kind == "pred":
                _, name, params, body, _ = d
                for _, dom in params:
                    if dom not in m.domains:
                        raise UndeclaredName(dom)
                self._check_pred_body(body, {p for p, _ in params})
                m.predicates[name] = Predicate(
                    name, tuple(p for p, _ in params), body, tuple(dom for _, dom in params))
            elif kind == "effect":
                for env in self._bindings((d[1],), ()):
                    target = self._ground_label(d[1], env)
                    branches = []
                    for branch in d[2]:
                        assigns = []
                        for var, arg in branch:
                            if var not in m.variables:
                                raise UndeclaredName(var)
                            assigns.append((var, self._effect_value(arg, env, var)))
                        branches.append(tuple(assigns))
                    m.effects.add(target, branches)
            elif kind == "set":
                m.sets[d[1]] = frozenset(self._set_item(p) for p in d[2])
        pending = []
        for decls in self.procs.values():
            for d in decls:
                pending.extend(self._instantiate_proc(d))
        for ground, body, env in pending:
            m.spec.equations[ground] = self.term(body, env)
        for d in self.decls:
            if d[0] == "system":
                m.system = self.term(d[1], {})
            elif d[0] == "spec":
                m.spec_term = self.term(d[1], {})
        overlap = {n for n in m.H & m.I}
        if overlap:
            raise ModelError(f"H and I overlap on {sorted(overlap)}")
        return m

    def _check_fresh(self, name, table, what):
        if name in table:
            raise ModelError(f"duplicate {what} {name}")

    def _check_pred_body(self, body, params):
        if isinstance(body, Cmp):
            if body.var not in self.m.variables:
                raise UndeclaredName(body.var)
            if body.value not in params and body.value not in self.values:
                raise UndeclaredName(body.value)
        else:
            for a in body.args:
                self._check_pred_body(a, params)

    # -- data values

    def arg(self, node: tuple, env: dict[str, str]) -> str:
        if node[0] == "fun":
            fn = self.m.functions.get(node[1])
            if fn is None:
                raise UndeclaredName(node[1])
            inner = self.arg(node[2], env)
            if inner not in fn[2]:
                raise ArityMismatch(f"{node[1]} undefined on {inner}")
            return fn[2][inner]
        word = node[1]
        if word in env:
            return env[word]
        if word in self.values:
            return word
        raise UndeclaredName(word)

    def _effect_value(self, node, env, var):
        if node[0] == "val" and node[1] in self.m.variables:
            return node[1]
        value = self.arg(node, env)
        dom = self.m.variables[var][0]
        if value not in self.m.domains[dom]:
            raise ArityMismatch(f"{value} not in {dom}")
        return value

    def _ground_label(self, pat: tuple, env: dict[str, str]) -> ActionLabel:
        _, name, args = pat
        if name in ("tau", "delta", "eps"):
            return label(name)
        decl = self.m.actions.get(name)
        if decl is None:
            raise UndeclaredName(name)
        if len(args) != len(decl.params):
            raise ArityMismatch(f"{name} expects {len(decl.params)} arguments, got {len(args)}")
        values = tuple(self.arg(a, env) for a in args)
        for v, dom in zip(values, decl.params):
            if v not in self.m.domains[dom]:
                raise ArityMismatch(f"{v} is not in domain {dom} of {name}")
        return ActionLabel(name, values)

    def _bindings(self, pats: tuple, conds: tuple) -> Iterator[dict[str, str]]:
        """All assignments of pattern variables over the domains of their positions."""
        var_domains: dict[str, str] = {}
        for pat in pats:
            decl = self.m.actions.get(pat[1])
            if decl is None:
                raise UndeclaredName(pat[1])
            if len(pat[2]) != len(decl.params):
                raise ArityMismatch(f"{pat[1]} expects {len(decl.params)} arguments")
            for a, dom in zip(pat[2], decl.params):
                if a[0] == "val" and a[1] not in self.values:
                    var_domains.setdefault(a[1], dom)
        names = list(var_domains)
        for combo in product(*(self.m.domains[var_domains[n]] for n in names)):
            env = dict(zip(names, combo))
            if all(self._cond(c, env) for c in conds):
                yield env

    def _cond(self, cond, env) -> bool:
        op, left, right = cond
        lv, rv = self.arg(left, env), self.arg(right, env)
        return (lv == rv) if op == "==" else (lv != rv)

    def _set_item(self, pat: tuple) -> str:
        _, name, args = pat
        if not args:
            if name not in self.m.actions and name not in self.m.predicates:
                raise UndeclaredName(name)
            return name
        return str(self._ground_label(pat, {}))

    # -- processes

    def _instantiate_proc(self, d: tuple) -> list[tuple]:
        """Register every ground equation name; bodies are evaluated later."""
        _, name, params, body, _ = d
        domains = []
        pending = []
        for p in params:
            if p[0] == "bind":
                if p[2] not in self.m.domains:
                    raise UndeclaredName(p[2])
                domains.append([(p[1], v) for v in self.m.domains[p[2]]])
            else:
                if p[1] not in self.values:
                    raise UndeclaredName(p[1])
                domains.append([(None, p[1])])
        for combo in product(*domains):
            env = {k: v for k, v in combo if k is not None}
            ground = self._proc_name(name, tuple(v for _, v in combo))
            if ground in self.m.spec.equations:
                raise ModelError(f"duplicate equation {ground}")
            self.m.spec.equations[ground] = None
            pending.append((ground, body, env))
        return pending

    def _proc_name(self, name: str, values: tuple[str, ...]) -> str:
        return f"{name}({','.join(values)})" if values else name

    def term(self, node: tuple, env: dict[str, str]) -> Term:
        kind = node[0]
        if kind == "alt":
            return Alt(self.term(node[1], env), self.term(node[2], env))
        if kind == "seq":
            return Seq(self.term(node[1], env), self.term(node[2], env))
        if kind == "par":
            return Par(self.term(node[1], env), self.term(node[2], env))
        if kind == "merge":
            return Merge(self.term(node[1], env), self.term(node[2], env))
        if kind == "comm":
            return Comm(self.term(node[1], env), self.term(node[2], env))
        if kind == "const":
            return Atom(label(node[1]))
        if kind == "theta":
            return ConflictElim(self.term(node[1], env))
        if kind == "new":
            return New(self.term(node[1], env))
        if kind == "unless":
            return Unless(self.term(node[1], env), self.term(node[2], env))
        if kind in ("encap", "hide"):
            names, alias = self._names(node[1])
            cls = Encapsulate if kind == "encap" else Abstract
            return cls(names, self.term(node[2], env), alias)
        if kind == "sum":
            _, var, dom, body = node
            if dom not in self.m.domains:
                raise UndeclaredName(dom)
            values = self.m.domains[dom]
            if not values:
                raise EmptyDomain(var)
            return alt_of(self.term(body, {**env, var: v}) for v in values)
        if kind == "shadow":
            base = self._ground_label(node[1], env)
            index = node[2]
            if index is None:
                index = self.shadow_counter.get(base, 0) + 1
            self.shadow_counter[base] = max(self.shadow_counter.get(base, 0), index)
            return Shadow(base, index)
        if kind == "guard":
            return GuardAtom(self.guard(node[1], env))
        if kind == "call":
            _, name, args = node
            if name in self.procs:
                ground = self._proc_name(name, tuple(self.arg(a, env) for a in args))
                if ground not in self.m.spec.equations:
                    raise UndeclaredName(ground)
                return RecCall(ground, MAIN_SPEC)
            return Atom(self._ground_label(("pat", name, args), env))
        raise ModelError(f"unknown syntax node {kind}")

    def _names(self, ref: tuple) -> tuple[frozenset, str | None]:
        if ref[0] == "named":
            if ref[1] not in self.m.sets:
                raise UndeclaredName(ref[1])
            return self.m.sets[ref[1]], ref[1]
        return frozenset(self._set_item(p) for p in ref[1]), None

    def guard(self, node: tuple, env: dict[str, str]) -> GuardExpr:
        kind = node[0]
        if kind == "true":
            return TrueGuard()
        if kind == "false":
            return FalseGuard()
        if kind == "not":
            return Not(self.guard(node[1], env))
        if kind in ("altg", "seqg", "parg"):
            cls = {"altg": AltG, "seqg": SeqG, "parg": ParG}[kind]
            return cls(self.guard(node[1], env), self.guard(node[2], env))
        _, name, args = node
        pred = self.m.predicates.get(name)
        if pred is None:
            raise UndeclaredName(name)
        values = tuple(self.arg(a, env) for a in args)
        if len(values) != len(pred.params):
            raise ArityMismatch(f"{name} expects {len(pred.params)} arguments")
        return AtomPred(name, values)


def parse_model(text: str) -> Model:
    return _Evaluator(_Parser(text).model()).run()


def load_model(path: str | Path) -> Model:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def parse_term(text: str, model: Model) -> Term:
    """Parse a term in the context of a model's declarations.

    The names "system" and "spec" refer to the model's terms.
    """
    stripped = text.strip()
    if stripped == "system" and model.system is not None:
        return model.system
    if stripped == "spec" and model.spec_term is not None:
        return model.spec_term
    p = _Parser(text)
    node = p.term()
    if p.tok.kind != "eof":
        p.fail("end of term")
    ev = _Evaluator([])
    ev.m = model
    ev.values = {v for vals in model.domains.values() for v in vals}
    for ground in model.spec.equations:
        base = ground.split("(", 1)[0]
        ev.procs.setdefault(base, [])
    ev.shadow_counter = _shadow_counters(model)
    return ev.term(node, {})


def _shadow_counters(model: Model) -> dict[ActionLabel, int]:
    counters: dict[ActionLabel, int] = {}
    roots = list(model.spec.equations.values()) + [t for t in (model.system, model.spec_term) if t]
    for root in roots:
        for node in subterms(root):
            if isinstance(node, Shadow):
                counters[node.base] = max(counters.get(node.base, 0), node.index)
    return counters


# ------------------------------------------------------------ printers


def _names_text(names: frozenset, alias: str | None) -> str:
    if alias is not None:
        return alias
    return "{" + ",".join(sorted(names)) + "}"


def render_term(t: Term) -> str:
    """Fully parenthesised text that parses back to the same term."""
    if isinstance(t, Atom):
        return str(t.label)
    if isinstance(t, Shadow):
        return f"@{t.base}#{t.index}"
    if isinstance(t, GuardAtom):
        return f"[{render_guard(t.guard)}]"
    if isinstance(t, (RecCall, RecVar)):
        return t.name
    if isinstance(t, ConflictElim):
        return f"theta({render_term(t.body)})"
    if isinstance(t, New):
        return f"new({render_term(t.body)})"
    if isinstance(t, Unless):
        return f"unless({render_term(t.left)}, {render_term(t.right)})"
    if isinstance(t, Encapsulate):
        return f"encap({_names_text(t.names, t.alias)}, {render_term(t.body)})"
    if isinstance(t, Abstract):
        return f"hide({_names_text(t.names, t.alias)}, {render_term(t.body)})"
    op = {Seq: ".", Alt: "+", Par: "|||", Comm: "|", Merge: "||"}[type(t)]
    return f"({render_term(t.left)} {op} {render_term(t.right)})"


_PREC = {Alt: 1, Par: 2, Comm: 2, Merge: 2, Seq: 3}


def pretty(t: Term, dot: str = ".") -> str:
    """Compact rendering with minimal parentheses, used in traces and normal forms."""

    def go(node: Term, ctx: int) -> str:
        cls = type(node)
        if cls in _PREC:
            prec = _PREC[cls]
            if cls is Seq:
                text = f"{go(node.left, prec + 1)}{dot}{go(node.right, prec)}"
            elif cls is Alt:
                text = f"{go(node.left, prec + 1)}+{go(node.right, prec)}"
            else:
                op = {Par: "|||", Comm: "|", Merge: "||"}[cls]
                text = f"{go(node.left, prec)}{op}{go(node.right, prec + 1)}"
            return f"({text})" if prec < ctx else text
        if isinstance(node, ConflictElim):
            return f"theta({go(node.body, 0)})"
        if isinstance(node, New):
            return f"new({go(node.body, 0)})"
        if isinstance(node, Unless):
            return f"unless({go(node.left, 0)},{go(node.right, 0)})"
        if isinstance(node, Encapsulate):
            return f"encap({_names_text(node.names, node.alias)},{go(node.body, 0)})"
        if isinstance(node, Abstract):
            return f"hide({_names_text(node.names, node.alias)},{go(node.body, 0)})"
        return render_term(node)

    return go(t, 0)


def _render_pred_expr(expr) -> str:
    if isinstance(expr, Cmp):
        return f"{expr.var} {'!=' if expr.negated else '=='} {expr.value}"
    if expr.op in ("true", "false"):
        return expr.op
    if expr.op == "not":
        return f"!({_render_pred_expr(expr.args[0])})"
    joiner = " && " if expr.op == "and" else " || "
    return "(" + joiner.join(_render_pred_expr(a) for a in expr.args) + ")"


def render_model(m: Model) -> str:
    """Ground textual form of a model; parse_model inverts it."""
    lines = [f"model {m.name};"]
    for name, values in m.domains.items():
        lines.append(f"domain {name} = {{{', '.join(values)}}};")
    for name, (dom, cod, mapping) in m.functions.items():
        pairs = ", ".join(f"{k} -> {v}" for k, v in mapping.items())
        lines.append(f"fun {name} : {dom} -> {cod} = {{{pairs}}};")
    for box, cap in m.mailboxes.items():
        lines.append(f"mailbox {box} cap {cap};")
    for decl in m.actions.values():
        text = decl.name
        if decl.params:
            text += f"({', '.join(decl.params)})"
        if decl.mailbox is not None:
            text += f" [{decl.role} {decl.mailbox}]"
        lines.append(f"act {text};")
    for lab in sorted(m.externs, key=str):
        lines.append(f"extern {lab};")
    for var, (dom, init) in m.variables.items():
        lines.append(f"var {var} : {dom} = {init};")
    for name, pred in m.predicates.items():
        if not isinstance(pred, Predicate):
            raise ModelError(f"predicate {name} has no textual form")
        params = ""
        if pred.params:
            params = "(" + ", ".join(f"{p}:{d}" for p, d in zip(pred.params, pred.param_domains)) + ")"
        lines.append(f"pred {name}{params} = {_render_pred_expr(pred.body)};")
    for left, right, result in m.gamma_rules():
        lines.append(f"comm {left} | {right} = {result};")
    for pair in sorted(m.conflicts, key=lambda p: sorted(map(str, p))):
        a, b = sorted(pair, key=str)
        lines.append(f"conflict {a} # {b};")
    for a, b in sorted(m.order, key=lambda p: (str(p[0]), str(p[1]))):
        lines.append(f"order {a} <= {b};")
    for lab, branches in m.effects.entries.items():
        text = " | ".join(", ".join(f"{v} := {x}" for v, x in br) or "skip" for br in branches)
        lines.append(f"effect {lab} = {text};")
    for name, names in m.sets.items():
        lines.append(f"set {name} = {{{', '.join(sorted(names))}}};")
    for name, body in m.spec.equations.items():
        lines.append(f"proc {name} = {render_term(body)};")
    if m.system is not None:
        lines.append(f"system = {render_term(m.system)};")
    if m.spec_term is not None:
        lines.append(f"spec = {render_term(m.spec_term)};")
    return "\n".join(lines) + "\n"
