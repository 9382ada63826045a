"""Scenario files: a small sectioned text format.

Example::

    [network]
    gamma = 1000
    y = 1000
    requests = 100
    w_ca = 1.88e-6
    period = 10
    delta_floor = 1e-4

    [nodes]
    # id parent eps_r eps_t eps_c capacity
    0 - 5e-08 2e-07 8e-08 ample
    1 0 5e-08 2e-07 8e-08 ample

    [leaves]
    # id y requests   (optional per-leaf overrides)
    1 1000 100

    [solver]
    mode = c3
    epsilon = 0.001
    time_limit = 400
    theta = 0.01

    [sweep]
    axis = requests
    from = 1
    to = 200
    step = 1

``#`` starts a comment.  A capacity of ``ample`` means room for all data
generated in the network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import c3model
from .c3model import NetworkSpec, NodeParams
from .errors import InvalidTree, ScenarioError
from .sbb import SolverParams

MODES = ("c3", "c2o", "c2a", "compare")
AXES = ("requests", "gamma")


@dataclass
class Sweep:
    axis: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ScenarioError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.step > 0:
            raise ScenarioError("sweep step must be positive")
        if self.stop < self.start:
            raise ScenarioError("sweep range is empty")

    def values(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        vals = [self.start + i * self.step for i in range(count)]
        if self.axis == "requests":
            return [float(int(round(v))) for v in vals]
        return [round(v, 12) for v in vals]


@dataclass
class Scenario:
    network: NetworkSpec
    solver: SolverParams = field(default_factory=SolverParams)
    sweep: Optional[Sweep] = None
    mode: str = "c3"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")

    def at(self, value: float) -> NetworkSpec:
        """The network with the sweep axis set to ``value``."""
        if self.sweep is None:
            return self.network
        if self.sweep.axis == "requests":
            return self.network.with_requests(int(value))
        return self.network.with_gamma(value)


def _num(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(f"{where}: expected a number, got {text!r}") from None


def _kv(lines, section) -> dict[str, str]:
    out = {}
    for lineno, line in lines:
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value in [{section}]")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def parse(text: str) -> Scenario:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ScenarioError(f"line {lineno}: duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            raise ScenarioError(f"line {lineno}: content before the first section")
        sections[current].append((lineno, line))
    unknown = set(sections) - {"network", "nodes", "leaves", "solver", "sweep"}
    if unknown:
        raise ScenarioError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if "network" not in sections or "nodes" not in sections:
        raise ScenarioError("a scenario needs [network] and [nodes] sections")

    net = _kv(sections["network"], "network")
    ids, parents, nodes = [], [], []
    for lineno, line in sections["nodes"]:
        parts = line.split()
        if len(parts) != 6:
            raise ScenarioError(f"line {lineno}: node lines are 'id parent eps_r eps_t eps_c capacity'")
        where = f"line {lineno}"
        ids.append(int(_num(parts[0], where)))
        parents.append(None if parts[1] == "-" else int(_num(parts[1], where)))
        cap = None if parts[5].lower() == "ample" else _num(parts[5], where)
        try:
            nodes.append(NodeParams(_num(parts[2], where), _num(parts[3], where), _num(parts[4], where), cap))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    if sorted(ids) != list(range(len(ids))):
        raise ScenarioError("node ids must be 0..n-1")
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    nodes = [nodes[i] for i in order]
    parents = [parents[i] for i in order]

    has_child = {p for p in parents if p is not None}
    leaves = [v for v in range(len(nodes)) if v not in has_child]
    y0 = _num(net.get("y", str(c3model.Y_BITS)), "[network] y")
    r0 = int(_num(net.get("requests", str(c3model.REQUESTS)), "[network] requests"))
    y = {k: y0 for k in leaves}
    req = {k: r0 for k in leaves}
    for lineno, line in sections.get("leaves", []):
        parts = line.split()
        if len(parts) != 3:
            raise ScenarioError(f"line {lineno}: leaf lines are 'id y requests'")
        k = int(_num(parts[0], f"line {lineno}"))
        if k not in y:
            raise ScenarioError(f"line {lineno}: node {k} is not a leaf")
        y[k] = _num(parts[1], f"line {lineno}")
        req[k] = int(_num(parts[2], f"line {lineno}"))
    if "gamma" not in net:
        raise ScenarioError("[network] needs gamma")
    try:
        spec = NetworkSpec(
            nodes=nodes, parent=parents, y=y, requests=req,
            gamma=_num(net["gamma"], "[network] gamma"),
            w_ca=_num(net.get("w_ca", str(c3model.W_CA)), "[network] w_ca"),
            period=_num(net.get("period", str(c3model.PERIOD)), "[network] period"),
            delta_floor=_num(net.get("delta_floor", str(c3model.DELTA_FLOOR)), "[network] delta_floor"),
        )
    except (ValueError, InvalidTree) as exc:
        raise ScenarioError(str(exc)) from None

    sol = _kv(sections.get("solver", []), "solver")
    mode = sol.pop("mode", "c3")
    try:
        params = SolverParams(
            epsilon=_num(sol.get("epsilon", "0.001"), "[solver] epsilon"),
            time_limit=_num(sol.get("time_limit", "400"), "[solver] time_limit"),
            delta_floor=spec.delta_floor,
            theta=_num(sol.get("theta", "0.01"), "[solver] theta"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    sweep = None
    if "sweep" in sections:
        sw = _kv(sections["sweep"], "sweep")
        for key in ("axis", "from", "to", "step"):
            if key not in sw:
                raise ScenarioError(f"[sweep] needs {key}")
        sweep = Sweep(sw["axis"], _num(sw["from"], "[sweep] from"),
                      _num(sw["to"], "[sweep] to"), _num(sw["step"], "[sweep] step"))
    return Scenario(spec, params, sweep, mode)


def dumps(sc: Scenario) -> str:
    spec = sc.network
    leaves = spec.leaves
    y0 = spec.y[leaves[0]]
    r0 = spec.requests[leaves[0]]
    lines = [
        "[network]",
        f"gamma = {spec.gamma!r}",
        f"y = {y0!r}",
        f"requests = {r0}",
        f"w_ca = {spec.w_ca!r}",
        f"period = {spec.period!r}",
        f"delta_floor = {spec.delta_floor!r}",
        "",
        "[nodes]",
        "# id parent eps_r eps_t eps_c capacity",
    ]
    for v, (node, p) in enumerate(zip(spec.nodes, spec.parent)):
        cap = "ample" if node.cache_capacity is None else repr(node.cache_capacity)
        par = "-" if p is None else str(p)
        lines.append(f"{v} {par} {node.eps_r!r} {node.eps_t!r} {node.eps_c!r} {cap}")
    overrides = [k for k in leaves if spec.y[k] != y0 or spec.requests[k] != r0]
    if overrides:
        lines += ["", "[leaves]", "# id y requests"]
        lines += [f"{k} {spec.y[k]!r} {spec.requests[k]}" for k in overrides]
    s = sc.solver
    lines += ["", "[solver]", f"mode = {sc.mode}", f"epsilon = {s.epsilon!r}",
              f"time_limit = {s.time_limit!r}", f"theta = {s.theta!r}"]
    if sc.sweep is not None:
        w = sc.sweep
        lines += ["", "[sweep]", f"axis = {w.axis}", f"from = {w.start!r}",
                  f"to = {w.stop!r}", f"step = {w.step!r}"]
    return "\n".join(lines) + "\n"


def bundled() -> list[str]:
    root = resources.files("c3sbb") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def load(name_or_path: str) -> Scenario:
    """Read a scenario from a path, or by bundled name such as ``two_node_g1000``."""
    path = Path(name_or_path)
    if path.exists():
        return parse(path.read_text())
    res = resources.files("c3sbb") / "scenarios" / f"{name_or_path}.scn"
    if res.is_file():
        return parse(res.read_text())
    raise ScenarioError(f"no scenario file or bundled scenario named {name_or_path!r}")
