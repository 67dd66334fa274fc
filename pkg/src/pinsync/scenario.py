"""Scenario files: parsing, validation, serialization and random fixtures.

A scenario is a YAML document::

    name: two-node
    system:
      A: [[0.0]]          # node dynamics, n x n
      Lambda: [[1.0]]     # inner coupling, n x n
      r: 1.0              # coupling strength
    schedule:
      node_count: 2
      period: 1.0
      phases:
        - dwell_fraction: 1.0
          edges:          # "from" feeds its state to "to"
            - {from: 2, to: 1, weight: 2.0}
            - {from: 1, to: 2, weight: 1.0}
    gain: 5.0
    candidate_pins: [1, 2]   # optional, defaults to every node
    init:
      node_states: [[0.0], [1.0]]
      reference: [0.5]

Node indices are 1-based.  Every validation failure raises
:class:`~pinsync.errors.ValidationError` with the offending field path
and, when known, its line in the file.
"""

from dataclasses import dataclass
import math

import numpy as np
import yaml

from .analysis import SystemSpec
from .errors import PinsyncError, ValidationError
from .network import Edge, Phase, SwitchingSchedule, Topology, has_spanning_tree, laplacian_set
from .simulate import InitialCondition

__all__ = [
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "dump_scenario",
    "random_scenario",
    "bundled_scenario",
]

_TOP_KEYS = {"name", "system", "schedule", "gain", "candidate_pins", "init"}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    spec: SystemSpec
    schedule: SwitchingSchedule
    gain: float
    init: InitialCondition
    candidate_pins: tuple = None

    def __post_init__(self):
        N = self.schedule.node_count
        if self.init.node_states.shape != (N, self.spec.n):
            raise ValidationError(
                f"init.node_states must be {N} x {self.spec.n}, got {self.init.node_states.shape}",
                code="E_DIMENSION", path="init.node_states",
            )
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValidationError(f"gain must be positive, got {self.gain!r}", code="E_GAIN", path="gain")
        if self.candidate_pins is not None:
            pins = tuple(int(i) for i in self.candidate_pins)
            if not pins or len(set(pins)) != len(pins) or not all(1 <= i <= N for i in pins):
                raise ValidationError(f"candidate_pins must be distinct indices in [1, {N}], got {list(pins)}",
                                      code="E_NODE_INDEX", path="candidate_pins")
            object.__setattr__(self, "candidate_pins", pins)

    @property
    def node_count(self):
        return self.schedule.node_count

    @property
    def candidates(self):
        return self.candidate_pins or tuple(range(1, self.node_count + 1))

    def warnings(self):
        """Non-fatal diagnostics, one line each."""
        out = []
        if not has_spanning_tree(laplacian_set(self.schedule).average):
            out.append("W_SPANNING_TREE: the average topology has no directed spanning tree; "
                       "synchronization may be impossible")
        return out

    def to_dict(self):
        phases = []
        for p in self.schedule.phases:
            phases.append({
                "dwell_fraction": float(p.dwell_fraction),
                "edges": [{"from": e.src, "to": e.dst, "weight": float(e.weight)} for e in p.topology.edges],
            })
        d = {
            "name": self.name,
            "system": {
                "A": self.spec.A.tolist(),
                "Lambda": self.spec.Lambda.tolist(),
                "r": self.spec.r,
            },
            "schedule": {
                "node_count": self.node_count,
                "period": float(self.schedule.period),
                "phases": phases,
            },
            "gain": float(self.gain),
        }
        if self.candidate_pins is not None:
            d["candidate_pins"] = list(self.candidate_pins)
        d["init"] = {
            "node_states": self.init.node_states.tolist(),
            "reference": self.init.reference.tolist(),
        }
        return d

    def with_period(self, period):
        return Scenario(self.name, self.spec, self.schedule.with_period(period), self.gain, self.init,
                        self.candidate_pins)


# ---------------------------------------------------------------- parsing


def _line_map(text):
    """Map field paths to 1-based line numbers using the YAML node tree."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        # a mapping key's own line wins over its value's
        lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                child = f"{path}.{k.value}" if path else str(k.value)
                lines[child] = k.start_mark.line + 1
                walk(v, child)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return lines


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, message, code):
        line = self._line(path)
        raise ValidationError(message, code=code, path=path, line=line)

    def _line(self, path):
        p = path
        while p:
            if p in self.lines:
                return self.lines[p]
            cut = max(p.rfind("."), p.rfind("["))
            p = p[:cut] if cut > 0 else ""
        return None

    def get(self, obj, key, path, required=True):
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping", "E_TYPE")
        full = f"{path}.{key}" if path else key
        if key not in obj:
            if required:
                self.fail(full, f"missing required field '{full}'", "E_MISSING_FIELD")
            return None
        return obj[key]

    def number(self, value, path, positive=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}", "E_TYPE")
        value = float(value)
        if not math.isfinite(value):
            self.fail(path, f"expected a finite number, got {value!r}", "E_NONFINITE")
        if positive and value <= 0:
            self.fail(path, f"expected a positive number, got {value!r}", "E_NOT_POSITIVE")
        return value

    def integer(self, value, path):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}", "E_TYPE")
        return value

    def matrix(self, value, path, shape=None):
        if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
            self.fail(path, "expected a matrix as a non-empty list of rows", "E_TYPE")
        width = len(value[0])
        rows = []
        for i, row in enumerate(value):
            if len(row) != width:
                self.fail(f"{path}[{i}]", f"row {i} has {len(row)} entries, expected {width}", "E_DIMENSION")
            rows.append([self.number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
        a = np.array(rows, dtype=float)
        if shape is not None and a.shape != shape:
            self.fail(path, f"expected shape {shape}, got {a.shape}", "E_DIMENSION")
        return a

    def vector(self, value, path, size=None):
        if not isinstance(value, list) or not value:
            self.fail(path, "expected a non-empty list of numbers", "E_TYPE")
        v = np.array([self.number(x, f"{path}[{i}]") for i, x in enumerate(value)])
        if size is not None and v.size != size:
            self.fail(path, f"expected {size} entries, got {v.size}", "E_DIMENSION")
        return v

    def wrap(self, prefix, fn, *args):
        """Call a constructor, re-raising its ValidationError under ``prefix``."""
        try:
            return fn(*args)
        except ValidationError as exc:
            sub = exc.path
            if not sub:
                path = prefix
            elif not prefix or sub.startswith(prefix):
                path = sub
            else:
                path = f"{prefix}.{sub}"
            raise ValidationError(str(exc), code=exc.code, path=path, line=self._line(path)) from None


def _build(data, rd):
    if not isinstance(data, dict):
        rd.fail("", "scenario must be a YAML mapping", "E_TYPE")
    for key in data:
        if key not in _TOP_KEYS:
            rd.fail(str(key), f"unknown field '{key}'", "E_UNKNOWN_FIELD")
    name = rd.get(data, "name", "", required=False)
    name = "scenario" if name is None else str(name)

    sysd = rd.get(data, "system", "")
    A = rd.matrix(rd.get(sysd, "A", "system"), "system.A")
    if A.shape[0] != A.shape[1]:
        rd.fail("system.A", f"A must be square, got {A.shape}", "E_DIMENSION")
    Lam = rd.matrix(rd.get(sysd, "Lambda", "system"), "system.Lambda", shape=A.shape)
    r = rd.number(rd.get(sysd, "r", "system"), "system.r", positive=True)
    spec = rd.wrap("system", SystemSpec, A, Lam, r)

    sch = rd.get(data, "schedule", "")
    N = rd.integer(rd.get(sch, "node_count", "schedule"), "schedule.node_count")
    if N < 1:
        rd.fail("schedule.node_count", f"node_count must be >= 1, got {N}", "E_NODE_COUNT")
    period = rd.number(rd.get(sch, "period", "schedule"), "schedule.period", positive=True)
    phases_raw = rd.get(sch, "phases", "schedule")
    if not isinstance(phases_raw, list) or not phases_raw:
        rd.fail("schedule.phases", "phases must be a non-empty list", "E_NO_PHASES")
    phases = []
    for k, ph in enumerate(phases_raw):
        base = f"schedule.phases[{k}]"
        dwell = rd.number(rd.get(ph, "dwell_fraction", base), f"{base}.dwell_fraction", positive=True)
        edges_raw = rd.get(ph, "edges", base, required=False) or []
        if not isinstance(edges_raw, list):
            rd.fail(f"{base}.edges", "edges must be a list", "E_TYPE")
        edges = []
        for m, e in enumerate(edges_raw):
            ep = f"{base}.edges[{m}]"
            src = rd.integer(rd.get(e, "from", ep), f"{ep}.from")
            dst = rd.integer(rd.get(e, "to", ep), f"{ep}.to")
            w = rd.get(e, "weight", ep, required=False)
            w = 1.0 if w is None else rd.number(w, f"{ep}.weight")
            if w <= 0:
                rd.fail(f"{ep}.weight", f"edge weight must be positive, got {w!r}", "E_NEGATIVE_WEIGHT")
            edges.append(Edge(src, dst, w))
        topo = rd.wrap(base, Topology, N, tuple(edges))
        phases.append(Phase(topo, dwell))
    schedule = rd.wrap("schedule", SwitchingSchedule, tuple(phases), period)

    gain = rd.number(rd.get(data, "gain", ""), "gain", positive=True)
    cands = rd.get(data, "candidate_pins", "", required=False)
    if cands is not None:
        if not isinstance(cands, list):
            rd.fail("candidate_pins", "candidate_pins must be a list of node indices", "E_TYPE")
        cands = tuple(rd.integer(c, f"candidate_pins[{i}]") for i, c in enumerate(cands))

    initd = rd.get(data, "init", "")
    xs = rd.matrix(rd.get(initd, "node_states", "init"), "init.node_states", shape=(N, spec.n))
    c0 = rd.vector(rd.get(initd, "reference", "init"), "init.reference", size=spec.n)
    init = InitialCondition(xs, c0)
    return rd.wrap("", Scenario, name, spec, schedule, gain, init, cands)


def parse_scenario(text):
    """Parse and validate scenario YAML text."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ValidationError(f"invalid YAML: {exc}".replace("\n", " "), code="E_YAML",
                              line=mark.line + 1 if mark else None, path="<document>") from None
    return _build(data, _Reader(_line_map(text)))


def load_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise PinsyncError(f"cannot read scenario file: {exc}", code="E_IO", path=str(path)) from None
    return parse_scenario(text)


def dump_scenario(scenario):
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


def bundled_scenario(name="threshold_standin"):
    """Load one of the scenario files shipped with the package."""
    from importlib.resources import files

    return parse_scenario(files("pinsync.scenarios").joinpath(f"{name}.yaml").read_text(encoding="utf-8"))


# ---------------------------------------------------------------- fixtures


def random_scenario(rng, N=None, n=None, phases=None, period=None, identity_coupling=False,
                    edge_prob=0.5, weight_range=(0.2, 1.5), gain_range=(1.0, 5.0), a_scale=0.5,
                    equal_dwell=False, name=None):
    """Random scenario whose average topology has a directed spanning tree.

    ``rng`` is a :class:`numpy.random.Generator`.  Unspecified sizes are
    drawn from N in 2..5, n in 1..2 and 2..4 phases.
    """
    N = int(rng.integers(2, 6)) if N is None else N
    n = int(rng.integers(1, 3)) if n is None else n
    p = int(rng.integers(2, 5)) if phases is None else phases
    period = float(rng.uniform(0.2, 3.0)) if period is None else float(period)
    while True:
        topos = []
        for _ in range(p):
            edges = [Edge(j + 1, i + 1, float(rng.uniform(*weight_range)))
                     for i in range(N) for j in range(N) if i != j and rng.random() < edge_prob]
            topos.append(Topology(N, tuple(edges)))
        if equal_dwell:
            dwell = np.full(p, 1.0 / p)
        else:
            dwell = rng.dirichlet(np.full(p, 2.0))
            dwell = np.maximum(dwell, 0.05)
            dwell /= dwell.sum()
            dwell[-1] = 1.0 - math.fsum(dwell[:-1])
        schedule = SwitchingSchedule(tuple(Phase(t, float(f)) for t, f in zip(topos, dwell)), period)
        if has_spanning_tree(laplacian_set(schedule).average):
            break
    A = a_scale * rng.standard_normal((n, n))
    if identity_coupling:
        Lam = np.eye(n)
    else:
        M = rng.standard_normal((n, n))
        Lam = np.eye(n) + 0.3 * M
    spec = SystemSpec(A, Lam, float(rng.uniform(0.5, 1.5)))
    init = InitialCondition(rng.uniform(-3, 3, size=(N, n)), rng.uniform(-1, 1, size=n))
    return Scenario(name or f"random-N{N}-n{n}-p{p}", spec, schedule, float(rng.uniform(*gain_range)), init)
