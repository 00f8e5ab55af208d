"""Actor templates and their composition into verifiable systems.

An actor is a mailbox plus a cyclic behaviour: a list of stages run in order,
after which the actor re-enters its first stage. The first stage must receive,
so that a finished actor waits for its next message instead of disappearing.

Messages travel through mailboxes in the data state: a send deposits the
message, a receive is enabled only once the message is present. Matched
send/receive pairs therefore need no encapsulation and H stays empty; the
order constraints of the pattern are carried by enabledness.

Assemblies are rendered to model text and parsed, so a composed system is an
ordinary model that can be saved, edited and re-checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .dsl import parse_model
from .equivalence import RBS, Verdict, compare_terms
from .model import Model, ModelError
from .sos import DEFAULT_BOUND


class ActorError(ModelError):
    pass


class UnboundParam(ActorError):
    pass


class DuplicateMailbox(ActorError):
    pass


class DanglingSend(ActorError):
    pass


class PersistenceViolation(ActorError):
    """The behaviour does not start by receiving, so the actor cannot wait for work."""


class ConstrainedCreation(ActorError):
    """A template marked as unable to create actors contains a creation stage."""


EXTERNAL_CHANNEL = "O"
MESSAGE_DOMAIN = "Msg"
FLAG_DOMAIN = "Flag"


@dataclass(frozen=True)
class Recv:
    """Read a message from the actor's own mailbox; external reads come from the environment."""

    msg: str
    external: bool = False


@dataclass(frozen=True)
class Send:
    to: str
    msg: str


@dataclass(frozen=True)
class Output:
    """Send a message to the environment."""

    msg: str
    channel: str = EXTERNAL_CHANNEL


@dataclass(frozen=True)
class Local:
    """A local computation; by default the actor's single internal action."""

    name: str | None = None
    effect: str | None = None


@dataclass(frozen=True)
class Create:
    """Spawn point. With once, creation happens only on the first pass."""

    children: tuple[str, ...]
    once: bool = False


@dataclass(frozen=True)
class Choice:
    """Guarded alternatives: (predicate, stages) pairs."""

    branches: tuple[tuple[str, tuple], ...]


Prim = Union[Recv, Send, Output, Local, Create, Choice]
Stage = Union[Prim, tuple]


@dataclass(frozen=True)
class ActorTemplate:
    name: str
    mailbox: str
    behavior: tuple[Stage, ...]
    creations: frozenset[str] = frozenset()
    params: tuple[str, ...] = ()
    constrained: bool = False
    declarations: tuple[str, ...] = ()


@dataclass(frozen=True)
class ActorInstance:
    name: str
    mailbox: str
    stages: tuple[tuple[Prim, ...], ...]
    creations: tuple[str, ...]
    declarations: tuple[str, ...]

    @property
    def internal(self) -> str:
        return f"i_{self.name}"

    def equations(self) -> list[tuple[str, str]]:
        """One (state, body) equation per stage; the last re-enters the first."""
        names = [self.name] + [f"{self.name}_{k}" for k in range(1, len(self.stages))]
        out = []
        for k, stage in enumerate(self.stages):
            nxt = names[(k + 1) % len(names)]
            out.append((names[k], f"{self._stage(stage)} . {nxt}"))
        return out

    def equations_text(self) -> str:
        return "\n".join(f"proc {lhs} = {rhs};" for lhs, rhs in self.equations())

    def _stage(self, stage: tuple[Prim, ...]) -> str:
        parts = [self._prim(p) for p in stage]
        if len(parts) == 1:
            return parts[0]
        return "(" + " ||| ".join(parts) + ")"

    def _prim(self, p: Prim) -> str:
        if isinstance(p, Recv):
            return f"r_{self.mailbox}({p.msg})"
        if isinstance(p, Send):
            return f"s_{p.to}({p.msg})"
        if isinstance(p, Output):
            return f"s_{p.channel}({p.msg})"
        if isinstance(p, Local):
            return p.name or self.internal
        if isinstance(p, Create):
            spawn = " ||| ".join(f"cr_{self.name}_{c}" for c in p.children)
            if len(p.children) > 1:
                spawn = f"({spawn})"
            if p.once:
                return f"([fresh_{self.name}] -> {spawn} + [!fresh_{self.name}])"
            return spawn
        if isinstance(p, Choice):
            alts = []
            for pred, stages in p.branches:
                body = " . ".join(self._stage(_as_stage(s)) for s in stages)
                alts.append(f"[{pred}] -> {body}")
            return "(" + " + ".join(alts) + ")"
        raise ActorError(f"unknown stage element {p!r}")


def _as_stage(stage: Stage) -> tuple[Prim, ...]:
    return stage if isinstance(stage, tuple) else (stage,)


def _walk(stages) -> list[Prim]:
    out = []
    for stage in stages:
        for p in _as_stage(stage):
            out.append(p)
            if isinstance(p, Choice):
                for _, inner in p.branches:
                    out.extend(_walk(inner))
    return out


def _fill(text: str, params: dict, where: str) -> str:
    try:
        return text.format(**params)
    except (KeyError, IndexError) as exc:
        raise UnboundParam(f"{where}: parameter {exc} is not bound") from None


def _fill_prim(p: Prim, params: dict, where: str) -> Prim:
    if isinstance(p, Recv):
        return Recv(_fill(p.msg, params, where), p.external)
    if isinstance(p, Send):
        return Send(_fill(p.to, params, where), _fill(p.msg, params, where))
    if isinstance(p, Output):
        return Output(_fill(p.msg, params, where), p.channel)
    if isinstance(p, Local):
        return Local(p.name and _fill(p.name, params, where), p.effect and _fill(p.effect, params, where))
    if isinstance(p, Create):
        return Create(tuple(_fill(c, params, where) for c in p.children), p.once)
    if isinstance(p, Choice):
        return Choice(tuple(
            (_fill(pred, params, where), tuple(_fill_stage(s, params, where) for s in stages))
            for pred, stages in p.branches))
    raise ActorError(f"unknown stage element {p!r}")


def _fill_stage(stage: Stage, params: dict, where: str) -> tuple[Prim, ...]:
    return tuple(_fill_prim(p, params, where) for p in _as_stage(stage))


def instantiate_actor(t: ActorTemplate, params: dict | None = None) -> ActorInstance:
    """Ground a template: fill its parameters and check the actor recipe."""
    params = dict(params or {})
    missing = [p for p in t.params if p not in params]
    if missing:
        raise UnboundParam(f"{t.name}: parameters {missing} are not bound")
    name = _fill(t.name, params, t.name)
    if not t.behavior:
        raise PersistenceViolation(f"{name}: empty behaviour")
    stages = tuple(_fill_stage(s, params, name) for s in t.behavior)
    if not any(isinstance(p, Recv) for p in stages[0]):
        raise PersistenceViolation(f"{name}: behaviour must start by receiving")
    prims = _walk(stages)
    creates = [c for p in prims if isinstance(p, Create) for c in p.children]
    if creates and t.constrained:
        raise ConstrainedCreation(f"{name} may not create actors")
    return ActorInstance(
        name=name,
        mailbox=_fill(t.mailbox, params, name),
        stages=stages,
        creations=tuple(creates),
        declarations=tuple(_fill(d, params, name) for d in t.declarations),
    )


@dataclass
class SystemAssembly:
    name: str
    actors: list[ActorInstance]
    topology: list[tuple[str, str, str]]
    H: frozenset
    I: frozenset  # noqa: E741
    text: str
    model: Model
    external: frozenset = frozenset()
    spec_text: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def system(self):
        return self.model.system

    @property
    def spec(self):
        return self.model.spec_term


def compose_system(actors: list[ActorInstance], spec: str, name: str = "system",
                   capacity: int = 4, header: str = "") -> SystemAssembly:
    """Fold the actors with the full merge, derive H and I, and parse the result.

    Each mailbox holds at least one copy of every message it can receive, so a
    round never blocks on a full mailbox.

    spec is the body of the recursive external-behaviour equation Spec, which
    must end by calling Spec.
    """
    boxes: dict[str, str] = {}
    for a in actors:
        if a.mailbox in boxes:
            raise DuplicateMailbox(f"{a.name} and {boxes[a.mailbox]} share mailbox {a.mailbox}")
        boxes[a.mailbox] = a.name
    sends: list[tuple[str, str, str]] = []
    receives: set[tuple[str, str]] = set()
    external_in: list[tuple[str, str]] = []
    outputs: list[tuple[str, str]] = []
    locals_: dict[str, str | None] = {}
    creations: list[str] = []
    messages: dict[str, None] = {}
    for a in actors:
        for p in _walk(a.stages):
            if isinstance(p, Recv):
                messages[p.msg] = None
                if p.external:
                    external_in.append((a.mailbox, p.msg))
                else:
                    receives.add((a.mailbox, p.msg))
            elif isinstance(p, Send):
                messages[p.msg] = None
                sends.append((a.name, p.to, p.msg))
            elif isinstance(p, Output):
                messages[p.msg] = None
                outputs.append((p.channel, p.msg))
            elif isinstance(p, Local):
                locals_[p.name or a.internal] = p.effect
            elif isinstance(p, Create):
                creations.extend(f"cr_{a.name}_{c}" for c in p.children)
    for sender, box, msg in sends:
        if box not in boxes:
            raise DanglingSend(f"{sender} sends {msg} to undeclared mailbox {box}")
        if (box, msg) not in receives:
            raise DanglingSend(f"{sender} sends {msg} to {box}, which never reads it")
    topology = sorted({(s, box, msg) for s, box, msg in sends})
    channels = sorted({c for c, _ in outputs})
    hidden = sorted({f"s_{box}({msg})" for _, box, msg in sends}
                    | {f"r_{box}({msg})" for box, msg in receives})
    hidden += sorted(locals_) + sorted(set(creations))
    creators = sorted({a.name for a in actors if a.creations and _creates_once(a)})

    lines = [f"model {name};", ""]
    if header:
        lines += [header.rstrip(), ""]
    lines.append(f"domain {MESSAGE_DOMAIN} = {{{', '.join(messages)}}};")
    if creators:
        lines.append(f"domain {FLAG_DOMAIN} = {{no, yes}};")
    lines.append("")
    for a in actors:
        inbound = sum(1 for box, _ in receives if box == a.mailbox)
        lines.append(f"mailbox {a.mailbox} cap {max(capacity, inbound)};")
    lines.append("")
    for a in actors:
        lines.append(f"act s_{a.mailbox}({MESSAGE_DOMAIN})[send {a.mailbox}], "
                     f"r_{a.mailbox}({MESSAGE_DOMAIN})[recv {a.mailbox}];")
    for c in channels:
        lines.append(f"act s_{c}({MESSAGE_DOMAIN});")
    lines.append(f"act {', '.join(sorted(locals_) + sorted(set(creations)))};")
    for box, msg in external_in:
        lines.append(f"extern r_{box}({msg});")
    lines.append("")
    for creator in creators:
        lines.append(f"var up_{creator} : {FLAG_DOMAIN} = no;")
        lines.append(f"pred fresh_{creator} = up_{creator} == no;")
        for c in creations:
            if c.startswith(f"cr_{creator}_"):
                lines.append(f"effect {c} = up_{creator} := yes;")
    for a in actors:
        lines.extend(a.declarations)
    for local, effect in sorted(locals_.items()):
        if effect:
            lines.append(f"effect {local} = {effect};")
    lines.append("")
    for a in actors:
        lines.append(f"// {a.name}")
        lines.append(a.equations_text())
        lines.append("")
    lines.append("set H = {};")
    lines.append(_wrap_set("I", hidden))
    lines.append("")
    lines.append(f"proc Spec = {spec};")
    lines.append("")
    fold = _fold([a.name if not _is_created(a, actors) else f"new({a.name})" for a in actors])
    lines.append(f"system = hide(I, encap(H, {fold}));")
    lines.append("spec = Spec;")
    text = "\n".join(lines) + "\n"
    model = parse_model(text)
    return SystemAssembly(
        name=name, actors=list(actors), topology=topology, H=model.H, I=model.I,
        text=text, model=model,
        external=frozenset(f"r_{b}({m})" for b, m in external_in) | frozenset(
            f"s_{c}({m})" for c, m in outputs),
        spec_text=spec,
    )


def _creates_once(a: ActorInstance) -> bool:
    return any(isinstance(p, Create) and p.once for p in _walk(a.stages))


def _is_created(a: ActorInstance, actors: list[ActorInstance]) -> bool:
    return any(a.name in other.creations for other in actors)


def _fold(names: list[str]) -> str:
    return " || ".join(names)


def _wrap_set(name: str, items: list[str], width: int = 88) -> str:
    out, line = [], f"set {name} = {{"
    for k, item in enumerate(items):
        piece = item + (", " if k < len(items) - 1 else "")
        if len(line) + len(piece) > width:
            out.append(line.rstrip())
            line = "    "
        line += piece
    out.append(line + "};")
    return "\n".join(out)


def verify_external_behavior(a: SystemAssembly | Model, bound: int = DEFAULT_BOUND,
                             jobs: int = 1) -> Verdict:
    """Compare the assembled system with its external-behaviour spec."""
    m = a.model if isinstance(a, SystemAssembly) else a
    if m.system is None or m.spec_term is None:
        raise ActorError("model needs both a system and a spec")
    return compare_terms(m, m.system, m.spec_term, RBS, bound, jobs)
