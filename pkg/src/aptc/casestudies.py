"""Bundled case studies: builders, catalogue and mutation checks."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .actors import (
    ActorTemplate, Choice, Create, Local, Output, Recv, Send, SystemAssembly,
    compose_system, instantiate_actor, verify_external_behavior,
)
from .dsl import parse_model
from .equivalence import RBS, Verdict, compare, validate_verdict
from .model import Model
from .sos import DEFAULT_BOUND, generate_lts


class UnknownCaseStudy(ValueError):
    pass


@dataclass(frozen=True)
class Mutation:
    """A single textual edit of a model that should break its external behaviour."""

    description: str
    old: str
    new: str

    def apply(self, text: str) -> str:
        hits = text.count(self.old)
        if hits != 1:
            raise ValueError(f"mutation site {self.old!r} occurs {hits} times")
        return text.replace(self.old, self.new)


@dataclass(frozen=True)
class CaseStudyInfo:
    id: str
    name: str
    params: dict
    expected: str
    system_states: int
    spec_states: int
    mutation: Mutation


# ------------------------------------------------------------------ ABP


def _bundled(name: str) -> str:
    return resources.files("aptc").joinpath("models").joinpath(f"{name}.aptc").read_text(encoding="utf-8")


def _abp_assembly(name: str) -> SystemAssembly:
    text = _bundled(name)
    m = parse_model(text)
    topology = [(str(a), str(b), str(c)) for a, b, c in m.gamma_rules()]
    return SystemAssembly(name=name, actors=[], topology=topology, H=m.H, I=m.I,
                          text=text, model=m)


# ------------------------------------------------------------------ actor systems


def _worker(name: str, boss: str, param: str = "i") -> ActorTemplate:
    """Receive a task, compute, report back to the boss: the shape shared by all workers."""
    return ActorTemplate(
        name=f"{name}{{{param}}}", mailbox=f"{name}{{{param}}}",
        behavior=(Recv(f"DI_{name}{{{param}}}"), Local(), Send(boss, f"DO_{name}{{{param}}}")),
        params=(param,), constrained=True)


def mapreduce(m: int = 2, n: int = 1) -> SystemAssembly:
    maps = [f"MapA{i}" for i in range(1, m + 1)]
    reducers = [f"RA{j}" for j in range(1, n + 1)]
    master = ActorTemplate("Mas", "Mas", (
        Recv("DI_Mas", external=True),
        Local(),
        Create(tuple(maps)),
        tuple(Send(x, f"DI_{x}") for x in maps),
        tuple(Recv(f"DO_{x}") for x in maps),
        Local(),
        Create(tuple(reducers)),
        tuple(Send(x, f"DI_{x}") for x in reducers),
        tuple(Recv(f"DO_{x}") for x in reducers),
        Local(),
        Output("DO_Mas"),
    ), creations=frozenset(maps + reducers))
    actors = [instantiate_actor(master)]
    actors += [instantiate_actor(_worker("MapA", "Mas"), {"i": i}) for i in range(1, m + 1)]
    actors += [instantiate_actor(_worker("RA", "Mas", "j"), {"j": j}) for j in range(1, n + 1)]
    return compose_system(actors, "r_Mas(DI_Mas) . s_O(DO_Mas) . Spec", name="mapreduce")


def gfs(n: int = 2) -> SystemAssembly:
    servers = [f"CSA{i}" for i in range(1, n + 1)]
    client = ActorTemplate("CA", "CA", (
        Recv("DI_CA", external=True),
        Local(),
        Send("Mas", "DI_Mas"),
        tuple(Recv(f"DO_{x}") for x in servers),
        Local(),
        Output("DO_CA"),
    ))
    master = ActorTemplate("Mas", "Mas", (
        Recv("DI_Mas"),
        Local(),
        Create(tuple(servers)),
        tuple(Send(x, f"DI_{x}") for x in servers),
    ), creations=frozenset(servers))
    actors = [instantiate_actor(client), instantiate_actor(master)]
    actors += [instantiate_actor(_worker("CSA", "CA"), {"i": i}) for i in range(1, n + 1)]
    return compose_system(actors, "r_CA(DI_CA) . s_O(DO_CA) . Spec", name="gfs")


def cloud_rm(n: int = 2) -> SystemAssembly:
    vms = [f"VA{i}" for i in range(1, n + 1)]
    client = ActorTemplate("CA", "CA", (
        Recv("DI_CA", external=True),
        Local(),
        Send("RA", "DI_RA"),
        Recv("RS_RA"),
        Local(),
        Output("RS_CA"),
        Recv("CR_RA"),
        Local(),
        Output("CR_CA"),
    ))
    vm = ActorTemplate("VA{i}", "VA{i}", (
        Recv("DI_VA{i}"),
        Local(),
        Send("SA", "RS_VA{i}"),
        Local(),
        Send("RA", "CR_VA{i}"),
    ), params=("i",), constrained=True)
    resources_ = ActorTemplate("RA", "RA", (
        Recv("DI_RA"),
        Local(),
        Create(tuple(vms)),
        tuple(Send(x, f"DI_{x}") for x in vms),
        Recv("RS_SA"),
        Local(),
        Send("CA", "RS_RA"),
        tuple(Recv(f"CR_{x}") for x in vms),
        Local(),
        Send("CA", "CR_RA"),
    ), creations=frozenset(vms))
    state = ActorTemplate("SA", "SA", (
        tuple(Recv(f"RS_{x}") for x in vms),
        Local(),
        Send("RA", "RS_SA"),
    ))
    actors = [instantiate_actor(client), instantiate_actor(resources_), instantiate_actor(state)]
    actors += [instantiate_actor(vm, {"i": i}) for i in range(1, n + 1)]
    return compose_system(actors, "r_CA(DI_CA) . s_O(RS_CA) . s_O(CR_CA) . Spec", name="cloud_rm")


def _orchestrate(owner: str, steps: list[tuple[str, str]]) -> list:
    """Stages that hand each task to its agent and wait for the answer."""
    out: list = []
    for agent, task in steps:
        out += [Local(), Send(agent, task.replace("@", "WA")), Recv(task.replace("@", "AW"))]
    return out


BUYINGBOOKS_AGENTS = {
    "1": ("RequestLB", "ReceiveLB", "SendSB", "ReceivePB", "PayB"),
    "2": ("ReceiveRB", "SendLB", "ReceiveSB", "SendPB", "GetPShipB"),
}


def buyingbooks() -> SystemAssembly:
    def agent(k: str, j: int) -> str:
        return f"AA{k}{j}"

    wsc = ActorTemplate("WSC", "WSC", (
        Recv("DI_WSC", external=True),
        Create(("WS1", "WS2"), once=True),
        Local(),
        Send("WS1", "ReBuyingBooks_WC1"),
        Recv("GetPShipB_WC2"),
        Local(),
        Output("DO_WSC"),
    ), creations=frozenset({"WS1", "WS2"}))
    ws1 = ActorTemplate("WS1", "WS1", (
        Recv("ReBuyingBooks_WC1"),
        Create(("WSO1",), once=True),
        Local(), Send("WSO1", "ReBuyingBooks_WW1"),
        Recv("RequestLB_WW1"), Local(), Send("WS2", "RequestLB_WW12"),
        Recv("SendLB_WW21"), Local(), Send("WSO1", "ReceiveLB_WW1"),
        Recv("SendSB_WW1"), Local(), Send("WS2", "SendSB_WW12"),
        Recv("SendPB_WW21"), Local(), Send("WSO1", "ReceivePB_WW1"),
        Recv("PayB_WW1"), Local(), Send("WS2", "PayB_WW12"),
    ), creations=frozenset({"WSO1"}))
    ws2 = ActorTemplate("WS2", "WS2", (
        Recv("RequestLB_WW12"),
        Create(("WSO2",), once=True),
        Local(), Send("WSO2", "ReceiveRB_WW2"),
        Recv("SendLB_WW2"), Local(), Send("WS1", "SendLB_WW21"),
        Recv("SendSB_WW12"), Local(), Send("WSO2", "ReceiveSB_WW2"),
        Recv("SendPB_WW2"), Local(), Send("WS1", "SendPB_WW21"),
        Recv("PayB_WW12"), Local(), Send("WSO2", "GetPShipB_WW2"),
        Recv("GetPShipB_WW2"), Local(), Send("WSC", "GetPShipB_WC2"),
    ), creations=frozenset({"WSO2"}))
    a1 = [agent("1", j) for j in range(1, 6)]
    a2 = [agent("2", j) for j in range(1, 6)]
    t1 = BUYINGBOOKS_AGENTS["1"]
    t2 = BUYINGBOOKS_AGENTS["2"]
    wso1 = ActorTemplate("WSO1", "WSO1", (
        Recv("ReBuyingBooks_WW1"),
        Create(tuple(a1), once=True),
        *_orchestrate("WSO1", [(a1[0], f"{t1[0]}_@1")]),
        Local(), Send("WS1", "RequestLB_WW1"), Recv("ReceiveLB_WW1"),
        *_orchestrate("WSO1", [(a1[1], f"{t1[1]}_@1"), (a1[2], f"{t1[2]}_@1")]),
        Local(), Send("WS1", "SendSB_WW1"), Recv("ReceivePB_WW1"),
        *_orchestrate("WSO1", [(a1[3], f"{t1[3]}_@1"), (a1[4], f"{t1[4]}_@1")]),
        Local(), Send("WS1", "PayB_WW1"),
    ), creations=frozenset(a1))
    wso2 = ActorTemplate("WSO2", "WSO2", (
        Recv("ReceiveRB_WW2"),
        Create(tuple(a2), once=True),
        *_orchestrate("WSO2", [(a2[0], f"{t2[0]}_@2"), (a2[1], f"{t2[1]}_@2")]),
        Local(), Send("WS2", "SendLB_WW2"), Recv("ReceiveSB_WW2"),
        *_orchestrate("WSO2", [(a2[2], f"{t2[2]}_@2"), (a2[3], f"{t2[3]}_@2")]),
        Local(), Send("WS2", "SendPB_WW2"), Recv("GetPShipB_WW2"),
        *_orchestrate("WSO2", [(a2[4], f"{t2[4]}_@2")]),
        Local(), Send("WS2", "GetPShipB_WW2"),
    ), creations=frozenset(a2))
    actors = [instantiate_actor(t) for t in (wsc, ws1, ws2, wso1, wso2)]
    for k, orch, tasks in (("1", "WSO1", t1), ("2", "WSO2", t2)):
        for j, task in enumerate(tasks, 1):
            actors.append(instantiate_actor(ActorTemplate(
                agent(k, j), agent(k, j),
                (Recv(f"{task}_WA{k}"), Local(), Send(orch, f"{task}_AW{k}")),
                constrained=True)))
    return compose_system(actors, "r_WSC(DI_WSC) . s_O(DO_WSC) . Spec", name="buyingbooks")


QOS_AGENTS = ("ReceiveRB", "SendLB", "ReceiveSB", "CalculateP", "SendP", "GetPays")


def qos_wsoe() -> SystemAssembly:
    agents = [f"AA{j}" for j in range(1, len(QOS_AGENTS) + 1)]

    def ask(j: int) -> list:
        task = QOS_AGENTS[j]
        return [Local(), Send(agents[j], f"{task}_WA"), Recv(f"{task}_AW")]

    ws1 = ActorTemplate("WS1", "WS1", (
        Recv("SendLB_WW1"), Local(), Send("WSO", "ReceiveSB_WW1"),
        Recv("SendP_WW1"), Local(), Send("WSO", "GetPays_WW1"),
    ))
    ws2 = ActorTemplate("WS2", "WS2", (
        Recv("RequestLB_WS2", external=True), Local(), Send("WSOIM", "ReceiveRB_WM"),
        Recv("BBFinish_WW2"), Local(), Output("BBFinish_O"),
    ))
    ws3 = ActorTemplate("WS3", "WS3", (Recv("ShipByT_WW3"), Local(), Send("WSO", "ShipFinish_WW3")))
    ws4 = ActorTemplate("WS4", "WS4", (Recv("ShipByA_WW4"), Local(), Send("WSO", "ShipFinish_WW4")))
    wsoim = ActorTemplate("WSOIM", "WSOIM", (
        Recv("ReceiveRB_WM"),
        Create(("WSO",), once=True),
        Local(),
        Send("WSO", "ReceiveRB_MW"),
    ), creations=frozenset({"WSO"}))
    ss = ActorTemplate("SS", "SS", (Recv("DI_SS"), Local(), Send("WSO", "DO_SS")))
    wso = ActorTemplate("WSO", "WSO", (
        Recv("ReceiveRB_MW"),
        Create(tuple(agents), once=True),
        *ask(0), *ask(1),
        Local(), Send("WS1", "SendLB_WW1"), Recv("ReceiveSB_WW1"),
        *ask(2), *ask(3), *ask(4),
        Local(), Send("WS1", "SendP_WW1"), Recv("GetPays_WW1"),
        *ask(5),
        Local(), Send("SS", "DI_SS"), Recv("DO_SS"),
        Local("price_WSO", "pays := low | pays := high"),
        Choice((
            ("cheap", (Send("WS3", "ShipByT_WW3"), Recv("ShipFinish_WW3"))),
            ("!cheap", (Send("WS4", "ShipByA_WW4"), Recv("ShipFinish_WW4"))),
        )),
        Local(),
        Send("WS2", "BBFinish_WW2"),
    ), creations=frozenset(agents), declarations=(
        "domain Price = {{low, high}};",
        "var pays : Price = low;",
        "pred cheap = pays == low;",
    ))
    actors = [instantiate_actor(t) for t in (ws1, ws2, ws3, ws4, wsoim, ss, wso)]
    for j, task in enumerate(QOS_AGENTS):
        actors.append(instantiate_actor(ActorTemplate(
            agents[j], agents[j], (Recv(f"{task}_WA"), Local(), Send("WSO", f"{task}_AW")),
            constrained=True)))
    return compose_system(actors, "r_WS2(RequestLB_WS2) . s_O(BBFinish_O) . Spec", name="qos_wsoe")


# ------------------------------------------------------------------ catalogue

_BUILDERS = {
    "abp": lambda: _abp_assembly("abp"),
    "abp-shadow": lambda: _abp_assembly("abp-shadow"),
    "mapreduce": mapreduce,
    "gfs": gfs,
    "cloud-rm": cloud_rm,
    "buyingbooks": buyingbooks,
    "qos-wsoe": qos_wsoe,
}

_DEFAULTS = {
    "abp": {}, "abp-shadow": {}, "mapreduce": {"m": 2, "n": 1}, "gfs": {"n": 2},
    "cloud-rm": {"n": 2}, "buyingbooks": {}, "qos-wsoe": {},
}

_MUTATIONS = {
    "abp": Mutation("receiver keeps its bit after acknowledging",
                    "proc Q(b:Bit) = s_D(b) . R(flip(b))", "proc Q(b:Bit) = s_D(b) . R(b)"),
    "abp-shadow": Mutation("receiver keeps its bit after acknowledging",
                           "proc Q(b:Bit) = s_D(b) . R(flip(b))", "proc Q(b:Bit) = s_D(b) . R(b)"),
    "mapreduce": Mutation("second map actor never reports back",
                          "proc MapA2_2 = s_Mas(DO_MapA2) . MapA2;", "proc MapA2_2 = MapA2;"),
    "gfs": Mutation("first chunk server never answers the client",
                    "proc CSA1_2 = s_CA(DO_CSA1) . CSA1;", "proc CSA1_2 = CSA1;"),
    "cloud-rm": Mutation("state actor never reports the resource state",
                         "proc SA_2 = s_RA(RS_SA) . SA;", "proc SA_2 = SA;"),
    "buyingbooks": Mutation("seller never confirms shipment to the client",
                            "s_WSC(GetPShipB_WC2) . WS2;", "WS2;"),
    "qos-wsoe": Mutation("air shipping service never reports completion",
                         "proc WS4_2 = s_WSO(ShipFinish_WW4) . WS4;", "proc WS4_2 = WS4;"),
}

# system and spec LTS sizes for the default parameters, from the first verified run
_GOLDEN_STATES = {
    "abp": (22, 3),
    "abp-shadow": (22, 3),
    "mapreduce": (29, 2),
    "gfs": (21, 2),
    "cloud-rm": (30, 3),
    "buyingbooks": (244, 2),
    "qos-wsoe": (206, 2),
}

CASE_STUDY_IDS = tuple(_BUILDERS)


def parse_case_id(text: str) -> tuple[str, dict]:
    """'mapreduce(3,1)' -> ('mapreduce', {'m': 3, 'n': 1})."""
    match = re.fullmatch(r"\s*([a-z-]+)\s*(?:\(([^)]*)\))?\s*", text)
    if match is None or match.group(1) not in _BUILDERS:
        raise UnknownCaseStudy(text)
    name, args = match.group(1), match.group(2)
    params = dict(_DEFAULTS[name])
    if args is not None and args.strip():
        values = [int(v) for v in args.split(",")]
        if len(values) != len(params):
            raise UnknownCaseStudy(f"{name} takes {len(params)} parameters")
        params = dict(zip(params, values))
    if any(v < 1 for v in params.values()):
        raise UnknownCaseStudy(f"{text}: parameters must be at least 1")
    return name, params


def build_case_study(case_id: str, **params) -> tuple[Model, SystemAssembly]:
    name, parsed = parse_case_id(case_id)
    parsed.update(params)
    assembly = _BUILDERS[name](**parsed)
    return assembly.model, assembly


def list_case_studies() -> list[CaseStudyInfo]:
    return [
        CaseStudyInfo(id=name, name=name, params=dict(_DEFAULTS[name]), expected="related",
                      system_states=_GOLDEN_STATES[name][0], spec_states=_GOLDEN_STATES[name][1],
                      mutation=_MUTATIONS[name])
        for name in CASE_STUDY_IDS
    ]


def case_study_text(case_id: str) -> str:
    return build_case_study(case_id)[1].text


def verify_case_study(case_id: str, bound: int = DEFAULT_BOUND, jobs: int = 1) -> Verdict:
    return verify_external_behavior(build_case_study(case_id)[1], bound, jobs)


@dataclass
class MutationResult:
    case: str
    mutation: Mutation
    verdict: Verdict
    replayed: bool


def run_mutation(case_id: str, bound: int = DEFAULT_BOUND) -> MutationResult:
    """Apply the documented mutation, re-verify, and replay the witness."""
    name, _ = parse_case_id(case_id)
    mutation = _MUTATIONS[name]
    m = parse_model(mutation.apply(case_study_text(case_id)))
    left = generate_lts(m, m.system, bound, guard_steps=True)
    right = generate_lts(m, m.spec_term, bound, guard_steps=True)
    verdict = compare(left, right, RBS)
    return MutationResult(name, mutation, verdict, validate_verdict(left, right, verdict))
