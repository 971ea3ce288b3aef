"""Scenario files: which feeder, profiles, agents, topology and settings to run.

Same sectioned ``key=value`` format as the feeder file::

    [files]       feeder=<path> profiles=<path>      (relative to the scenario)
    [agents]      id=PV_1 bus=250 rating=1500 dc=1800 [beta=...]
    [topology]    a=PV_1 b=PV_2                      (one undirected link per record)
    [simulation]  start=06:30 end=17:30 step=10 control=20 beta=150
                  tolerance=1e-8 max_iter=100 curtailment=true
                  methods=noctl,fc,ac-nocm,ac-fw,ac-dw
    [voltvar]     v_ref=1.0 deadband_low=0.98 deadband_high=1.02 v_min=0.92 v_max=1.08
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .coordination import CommTopology, ControlMethod, ReachabilityError, build_topology
from .feeder import FeederModel, load_feeder
from .inverter import InverterAgent, VoltVarParams
from .simulation import Profiles, SimConfig, load_profiles, parse_time
from .textfmt import FormatError, Record, parse_sections

_SECTIONS = {"files", "agents", "topology", "simulation", "voltvar"}
BUNDLED = "bundled"


class ScenarioError(ValueError):
    pass


def bundled_scenario_path() -> Path:
    return Path(str(resources.files("gridcollab") / "data" / "two_pv.scn"))


def resolve(path: str | Path) -> Path:
    return bundled_scenario_path() if str(path) == BUNDLED else Path(path)


@dataclass(frozen=True)
class AgentSpec:
    id: str
    bus: str
    rating_s: float
    dc_capacity: float
    beta: float | None = None


@dataclass
class ScenarioFile:
    path: Path
    feeder_path: Path
    profiles_path: Path
    agents: list[AgentSpec]
    links: list[tuple[str, str]]
    window: tuple[int, int] = (23400, 63000)
    sim_step: int = 10
    control_period: int = 20
    beta: float = 0.1
    tolerance: float = 1e-8
    max_iterations: int = 100
    curtailment: bool = True
    volt_var: VoltVarParams = field(default_factory=VoltVarParams)
    methods: list[ControlMethod] = field(default_factory=lambda: list(ControlMethod))


def _bool(rec: Record, key: str, default: bool) -> bool:
    raw = rec.fields.get(key)
    if raw is None:
        return default
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise FormatError(f"not a boolean: {raw!r}", rec.line, key)


def parse_method(raw: str) -> ControlMethod:
    try:
        return ControlMethod(raw.strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in ControlMethod)
        raise ScenarioError(f"unknown method {raw!r} (choose from {choices})") from None


def parse_scenario(text: str, path: Path) -> ScenarioFile:
    sec = parse_sections(text, known=_SECTIONS)
    base = path.parent
    files = sec.get("files", [])
    if len(files) != 1:
        raise ScenarioError("exactly one [files] record is required")
    files[0].check_keys({"feeder", "profiles"})
    feeder_path = base / files[0].text("feeder")
    profiles_path = base / files[0].text("profiles")

    agents = []
    for rec in sec.get("agents", []):
        rec.check_keys({"id", "bus", "rating", "dc", "beta"})
        agents.append(AgentSpec(
            rec.text("id"), rec.text("bus"), rec.number("rating"), rec.number("dc"),
            rec.number("beta") if "beta" in rec.fields else None,
        ))
    if not agents:
        raise ScenarioError("scenario defines no agents")

    links = []
    for rec in sec.get("topology", []):
        rec.check_keys({"a", "b"})
        links.append((rec.text("a"), rec.text("b")))

    scn = ScenarioFile(path, feeder_path, profiles_path, agents, links)
    for rec in sec.get("simulation", []):
        rec.check_keys({"start", "end", "step", "control", "beta", "tolerance", "max_iter",
                        "curtailment", "methods"})
        try:
            start = parse_time(rec.text("start", "06:30"))
            end = parse_time(rec.text("end", "17:30"))
        except ValueError as exc:
            raise FormatError(str(exc), rec.line) from None
        scn.window = (start, end)
        scn.sim_step = int(rec.number("step", scn.sim_step))
        scn.control_period = int(rec.number("control", scn.control_period))
        scn.beta = rec.number("beta", scn.beta)
        scn.tolerance = rec.number("tolerance", scn.tolerance)
        scn.max_iterations = int(rec.number("max_iter", scn.max_iterations))
        scn.curtailment = _bool(rec, "curtailment", scn.curtailment)
        if "methods" in rec.fields:
            scn.methods = [parse_method(m) for m in rec.fields["methods"].split(",") if m]
    for rec in sec.get("voltvar", []):
        rec.check_keys({"v_ref", "deadband_low", "deadband_high", "v_min", "v_max"})
        d = VoltVarParams()
        try:
            scn.volt_var = VoltVarParams(
                rec.number("v_ref", d.v_ref), rec.number("deadband_low", d.deadband_low),
                rec.number("deadband_high", d.deadband_high), rec.number("v_min", d.v_min),
                rec.number("v_max", d.v_max),
            )
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(str(exc), rec.line) from None
    return scn


def read_scenario(path: str | Path) -> ScenarioFile:
    p = resolve(path)
    return parse_scenario(p.read_text(), p)


@dataclass
class Scenario:
    """Fully loaded, cross-validated inputs ready for :func:`run_scenario`."""

    spec: ScenarioFile
    feeder: FeederModel
    profiles: Profiles
    agents: list[InverterAgent]
    topology: CommTopology | None

    def config(self, method: ControlMethod) -> SimConfig:
        s = self.spec
        return SimConfig(
            method=method, window_start=s.window[0], window_end=s.window[1], sim_step=s.sim_step,
            control_period=s.control_period, tolerance=s.tolerance, max_iterations=s.max_iterations,
            volt_var=s.volt_var, curtailment=s.curtailment,
        )


def agent_topology(spec: ScenarioFile) -> CommTopology:
    ids = [a.id for a in spec.agents]
    pairs = []
    for a, b in spec.links:
        for x in (a, b):
            if x not in ids:
                raise ScenarioError(f"topology link references unknown agent {x!r}")
        pairs.append((ids.index(a) + 1, ids.index(b) + 1))
    return build_topology(pairs, len(ids))


def build_agents(spec: ScenarioFile, feeder: FeederModel) -> list[InverterAgent]:
    known = {b.id for b in feeder.buses}
    seen = set()
    out = []
    for a in spec.agents:
        if a.id in seen:
            raise ScenarioError(f"duplicate agent id {a.id!r}")
        seen.add(a.id)
        if a.bus not in known:
            raise ScenarioError(f"agent {a.id!r} sits on unknown bus {a.bus!r}")
        try:
            out.append(InverterAgent(a.id, a.bus, a.rating_s, a.dc_capacity,
                                     a.beta if a.beta is not None else spec.beta))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    return out


def load_scenario(path: str | Path, methods: list[ControlMethod] | None = None) -> Scenario:
    """Read and cross-validate a scenario. Raises on the first failure."""
    spec = read_scenario(path)
    if methods is not None:
        spec = replace(spec, methods=methods)
    feeder = load_feeder(spec.feeder_path)
    profiles = load_profiles(spec.profiles_path.read_text(), window=spec.window)
    agents = build_agents(spec, feeder)
    topology = None
    if any(m.communicates for m in spec.methods):
        topology = agent_topology(spec)
    elif spec.links:
        try:
            topology = agent_topology(spec)
        except ReachabilityError:
            topology = None
    return Scenario(spec, feeder, profiles, agents, topology)


def validate(path: str | Path, methods: list[ControlMethod] | None = None) -> dict:
    """Run every static check and collect the outcomes instead of raising."""
    checks: list[dict] = []

    def record(name, fn):
        try:
            result = fn()
        except (OSError, ValueError) as exc:
            checks.append({"check": name, "ok": False, "detail": str(exc)})
            return None
        checks.append({"check": name, "ok": True, "detail": ""})
        return result

    spec = record("scenario", lambda: read_scenario(path))
    if spec is not None:
        if methods is not None:
            spec = replace(spec, methods=methods)
        feeder = record("feeder", lambda: load_feeder(spec.feeder_path))
        profiles = record("profiles", lambda: load_profiles(spec.profiles_path.read_text()))
        if profiles is not None:
            def coverage():
                if not profiles.covers(*spec.window):
                    raise ScenarioError("profiles do not cover the simulation window")
            record("coverage", coverage)
        if feeder is not None:
            record("agents", lambda: build_agents(spec, feeder))
        if any(m.communicates for m in spec.methods):
            record("topology", lambda: agent_topology(spec))
        record("config", lambda: [SimConfig(m, spec.window[0], spec.window[1], spec.sim_step,
                                            spec.control_period) for m in spec.methods])
    return {"scenario": str(path), "ok": all(c["ok"] for c in checks), "checks": checks}
