"""Reading, writing and generating instances.

File format (version header "stochcuts-v1"): line-oriented, whitespace
separated, '#' starts a comment.  Matrices and vectors are sparse triplets
or (index, value) pairs; omitted entries are zero.  Numbers are written
with repr, i.e. the shortest decimal that round-trips the double.

    stochcuts-v1
    name example
    dims <n1> <n2> <m1> <m2> <scenarios>
    mark <continuous|binary|integer> <index...>
    c <j> <value>          first-stage cost
    d <j> <value>          second-stage cost
    A <i> <j> <value>      first-stage rows  (A x = b)
    b <i> <value>
    W <i> <j> <value>      recourse matrix
    scenario <s> <probability>
    T <s> <i> <j> <value>
    h <s> <i> <value>

Duplicate triplets are summed and reported as warnings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Instance, Scenario, CONTINUOUS, BINARY, INTEGER, validate

FORMAT_TAG = "stochcuts-v1"

BUILTIN_NAMES = ("thm1", "dim1-random-<seed>", "refinement-example")


class FormatError(ValueError):
    """Malformed line or token."""


class SchemaError(FormatError):
    """Missing or unsupported format tag."""


class DimensionError(FormatError):
    """Index or count incompatible with the declared dimensions."""


def _num(tok, where):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"{where}: expected a number, got {tok!r}")


def _idx(tok, limit, where):
    try:
        i = int(tok)
    except ValueError:
        raise FormatError(f"{where}: expected an index, got {tok!r}")
    if not 0 <= i < limit:
        raise DimensionError(f"{where}: index {i} out of range [0, {limit})")
    return i


def parse_verbose(source):
    """Parse an instance; returns (instance, warnings)."""
    if hasattr(source, "read"):
        source = source.read()
    lines = source.splitlines()
    warnings = []
    it = iter(enumerate(lines, start=1))

    tag = None
    for lineno, raw in it:
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        tag = text
        break
    if tag != FORMAT_TAG:
        raise SchemaError(f"unknown schema {tag!r}; expected {FORMAT_TAG!r}")

    dims = None
    name = "unnamed"
    marks = None
    arrays = {}
    probs = None
    seen = {}

    def put(field, key, value, where):
        if key in arrays[field]:
            arrays[field][key] += value
            warnings.append(f"{where}: duplicate {field} entry {key} summed")
        else:
            arrays[field][key] = value

    for lineno, raw in it:
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        toks = text.split()
        where = f"line {lineno}"
        head = toks[0]
        if head == "name":
            if len(toks) < 2:
                raise FormatError(f"{where}: name needs a value")
            name = " ".join(toks[1:])
            continue
        if head == "dims":
            if len(toks) != 6:
                raise FormatError(f"{where}: dims needs n1 n2 m1 m2 scenarios")
            try:
                dims = tuple(int(t) for t in toks[1:])
            except ValueError:
                raise FormatError(f"{where}: dims must be integers")
            n1, n2, m1, m2, ns = dims
            if min(dims) < 0:
                raise DimensionError(f"{where}: negative dimension")
            if n1 == 0 or n2 == 0 or m2 == 0:
                raise DimensionError(f"{where}: n1, n2 and m2 must be positive")
            if ns == 0:
                raise DimensionError(f"{where}: no scenarios")
            marks = [CONTINUOUS] * n1
            arrays = {"c": {}, "d": {}, "A": {}, "b": {}, "W": {},
                      "T": {}, "h": {}}
            probs = [None] * ns
            continue
        if dims is None:
            raise FormatError(f"{where}: dims must come before {head!r}")
        n1, n2, m1, m2, ns = dims
        if head == "mark":
            if len(toks) < 3:
                raise FormatError(f"{where}: mark needs a kind and indices")
            kind = toks[1]
            if kind not in (CONTINUOUS, BINARY, INTEGER):
                raise FormatError(f"{where}: unknown integrality mark {kind!r}")
            for t in toks[2:]:
                marks[_idx(t, n1, where)] = kind
        elif head == "c":
            if len(toks) != 3:
                raise FormatError(f"{where}: c needs index and value")
            put("c", _idx(toks[1], n1, where), _num(toks[2], where), where)
        elif head == "d":
            if len(toks) != 3:
                raise FormatError(f"{where}: d needs index and value")
            put("d", _idx(toks[1], n2, where), _num(toks[2], where), where)
        elif head == "b":
            if len(toks) != 3:
                raise FormatError(f"{where}: b needs index and value")
            put("b", _idx(toks[1], m1, where), _num(toks[2], where), where)
        elif head == "A":
            if len(toks) != 4:
                raise FormatError(f"{where}: A needs row, column and value")
            key = (_idx(toks[1], m1, where), _idx(toks[2], n1, where))
            put("A", key, _num(toks[3], where), where)
        elif head == "W":
            if len(toks) != 4:
                raise FormatError(f"{where}: W needs row, column and value")
            key = (_idx(toks[1], m2, where), _idx(toks[2], n2, where))
            put("W", key, _num(toks[3], where), where)
        elif head == "scenario":
            if len(toks) != 3:
                raise FormatError(f"{where}: scenario needs index and probability")
            s = _idx(toks[1], ns, where)
            if probs[s] is not None:
                raise FormatError(f"{where}: scenario {s} declared twice")
            probs[s] = _num(toks[2], where)
        elif head == "T":
            if len(toks) != 5:
                raise FormatError(f"{where}: T needs scenario, row, column, value")
            s = _idx(toks[1], ns, where)
            key = (s, _idx(toks[2], m2, where), _idx(toks[3], n1, where))
            put("T", key, _num(toks[4], where), where)
        elif head == "h":
            if len(toks) != 4:
                raise FormatError(f"{where}: h needs scenario, row, value")
            s = _idx(toks[1], ns, where)
            key = (s, _idx(toks[2], m2, where))
            put("h", key, _num(toks[3], where), where)
        else:
            raise FormatError(f"{where}: unknown directive {head!r}")

    if dims is None:
        raise FormatError("missing dims line")
    n1, n2, m1, m2, ns = dims
    for s in range(ns):
        if probs[s] is None:
            raise DimensionError(f"scenario {s} never declared")
    c = np.zeros(n1)
    for j, v in arrays["c"].items():
        c[j] = v
    d = np.zeros(n2)
    for j, v in arrays["d"].items():
        d[j] = v
    a = np.zeros((m1, n1))
    for (i, j), v in arrays["A"].items():
        a[i, j] = v
    b = np.zeros(m1)
    for i, v in arrays["b"].items():
        b[i] = v
    w = np.zeros((m2, n2))
    for (i, j), v in arrays["W"].items():
        w[i, j] = v
    scenarios = []
    for s in range(ns):
        t = np.zeros((m2, n1))
        h = np.zeros(m2)
        for (si, i, j), v in arrays["T"].items():
            if si == s:
                t[i, j] = v
        for (si, i), v in arrays["h"].items():
            if si == s:
                h[i] = v
        scenarios.append(Scenario(probs[s], t, h))
    instance = Instance(name, c, a, b, tuple(marks), d, w, tuple(scenarios))
    return instance, warnings


def parse(source):
    """Parse an instance, discarding duplicate-entry warnings."""
    return parse_verbose(source)[0]


def _fmt(v):
    return repr(float(v))


def emit(instance):
    """Deterministic, full-precision text form; parse(emit(i)) == i."""
    out = [FORMAT_TAG]
    out.append(f"name {instance.name or 'unnamed'}")
    out.append(f"dims {instance.n1} {instance.n2} {instance.m1} "
               f"{instance.m2} {instance.n_scenarios}")
    for kind in (BINARY, INTEGER):
        idx = [str(j) for j, m in enumerate(instance.integrality) if m == kind]
        if idx:
            out.append(f"mark {kind} " + " ".join(idx))
    for j, v in enumerate(instance.first_stage_cost):
        if v != 0.0:
            out.append(f"c {j} {_fmt(v)}")
    for j, v in enumerate(instance.second_stage_cost):
        if v != 0.0:
            out.append(f"d {j} {_fmt(v)}")
    for i in range(instance.m1):
        for j in range(instance.n1):
            v = instance.first_stage_matrix[i, j]
            if v != 0.0:
                out.append(f"A {i} {j} {_fmt(v)}")
    for i, v in enumerate(instance.first_stage_rhs):
        if v != 0.0:
            out.append(f"b {i} {_fmt(v)}")
    for i in range(instance.m2):
        for j in range(instance.n2):
            v = instance.recourse[i, j]
            if v != 0.0:
                out.append(f"W {i} {j} {_fmt(v)}")
    for s, sc in enumerate(instance.scenarios):
        out.append(f"scenario {s} {_fmt(sc.probability)}")
        for i in range(instance.m2):
            for j in range(instance.n1):
                v = sc.technology[i, j]
                if v != 0.0:
                    out.append(f"T {s} {i} {j} {_fmt(v)}")
        for i, v in enumerate(sc.rhs):
            if v != 0.0:
                out.append(f"h {s} {i} {_fmt(v)}")
    return "\n".join(out) + "\n"


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh)


def save(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit(instance))


@dataclass
class GeneratorConfig:
    """Server-location family: binary site openings, continuous assignment
    recourse, per-scenario client availability on the demand rows."""

    sites: int = 5
    clients: int = 10
    scenarios: int = 10
    seed: int = 0
    site_cost_range: tuple = (40, 80)
    demand_range: tuple = (1, 25)
    service_cost_range: tuple = (1, 25)
    capacity_slack: float = 1.5
    site_budget: int = None    # optional row: open exactly this many sites

    def __post_init__(self):
        if self.sites < 1 or self.clients < 1:
            raise ValueError("sites and clients must be at least 1")
        if self.scenarios < 1:
            raise ValueError("scenario_count must be >= 1")
        if self.site_budget is not None and not 1 <= self.site_budget <= self.sites:
            raise ValueError("site_budget must lie in [1, sites]")
        for label, (lo, hi) in (("site_cost_range", self.site_cost_range),
                                ("demand_range", self.demand_range),
                                ("service_cost_range", self.service_cost_range)):
            if lo > hi or lo <= 0:
                raise ValueError(f"{label} must satisfy 0 < low <= high")
        if self.capacity_slack < 1.0:
            raise ValueError("capacity_slack must be at least 1")


def generate_sslp(config):
    """Deterministic server-location instance for the given seed.

    Sites j carry binary open/close variables with positive cost; client i
    is served fractionally (y_ij >= 0, unit cost per site) against per-site
    capacity u = max(ceil(slack * total_demand / sites), max_demand), which
    keeps the all-open first stage feasible for every availability pattern.
    Scenario s only toggles the demand-row rhs h_s in {0, 1}: absent
    clients leave their rows slack, present ones must be covered, so the
    demand-row duals (the marginal service prices) vary scenario by
    scenario.
    """
    rng = np.random.default_rng(config.seed)
    ns1, m = config.sites, config.clients
    n2 = m * ns1
    m2 = ns1 + m
    lo, hi = config.site_cost_range
    c = rng.integers(lo, hi + 1, size=ns1).astype(float)
    dlo, dhi = config.demand_range
    dem = rng.integers(dlo, dhi + 1, size=(m, ns1)).astype(float)
    slo, shi = config.service_cost_range
    cost = rng.integers(slo, shi + 1, size=(m, ns1)).astype(float)
    total = float(dem.max(axis=1).sum())
    u = max(math.ceil(config.capacity_slack * total / ns1), float(dem.max()))
    d = np.zeros(n2)
    w = np.zeros((m2, n2))
    t = np.zeros((m2, ns1))
    for i in range(m):
        for j in range(ns1):
            col = i * ns1 + j
            d[col] = cost[i, j]
            w[j, col] = -dem[i, j]           # capacity row of site j
            w[ns1 + i, col] = 1.0            # demand row of client i
    for j in range(ns1):
        t[j, j] = float(u)                   # capacity: u x_j - sum dem y >= 0
    scenarios = []
    p = 1.0 / config.scenarios
    for _ in range(config.scenarios):
        h = np.zeros(m2)
        h[ns1:] = rng.integers(0, 2, size=m).astype(float)
        scenarios.append(Scenario(p, t, h))
    if config.site_budget is None:
        a = np.zeros((0, ns1))
        b = np.zeros(0)
    else:
        a = np.ones((1, ns1))
        b = np.array([float(config.site_budget)])
    name = f"sslp-{ns1}-{m}-{config.scenarios}-s{config.seed}"
    instance = Instance(name, c, a, b, (BINARY,) * ns1, d, w, tuple(scenarios))
    bad = validate(instance)
    if bad:
        raise RuntimeError("generator produced an invalid instance: "
                           + "; ".join(bad))
    return instance


def _thm1():
    scenarios = (
        Scenario(0.5, [[-1.0, 1.0], [1.0, -1.0]], [0.0, 0.0]),
        Scenario(0.5, [[1.0, 1.0], [-1.0, -1.0]], [1.0, -1.0]),
    )
    return Instance("thm1", [0.0, 0.0], np.zeros((0, 2)), [],
                    (BINARY, BINARY), [1.0], [[1.0], [1.0]], scenarios)


def _dim1_random(seed):
    rng = np.random.default_rng(seed)
    ns = 3 + seed % 4
    w = np.hstack([np.ones((3, 1)),
                   rng.integers(0, 4, size=(3, 2)).astype(float)])
    d = np.concatenate([[6.0], rng.integers(1, 6, size=2).astype(float)])
    scenarios = []
    weights = rng.integers(1, 6, size=ns).astype(float)
    probs = weights / weights.sum()
    for s in range(ns):
        t = rng.integers(-3, 4, size=(3, 1)).astype(float)
        h = rng.integers(-2, 5, size=3).astype(float)
        scenarios.append(Scenario(float(probs[s]), t, h))
    return Instance(f"dim1-random-{seed}", [1.0], np.zeros((0, 1)), [],
                    (BINARY,), d, w, tuple(scenarios))


def _refinement_example():
    # Four scenarios over one binary x whose technology averages nearly
    # cancel, so the single-cluster aggregation is almost information-free
    # (value 0 versus the true optimum 1.875) while the subproblem duals at
    # x = 0 come out as (3, 3, 0, 0) and split the partition cleanly into
    # {0,1} | {2,3}, after which the aggregation is exact at both integer
    # points.
    data = [(2.0, 1.0), (1.0, 1.5), (-2.0, -1.0), (-2.0, -1.5)]  # (t, h)
    scenarios = tuple(Scenario(0.25, [[t]], [h]) for t, h in data)
    return Instance("refinement-example", [1.0], np.zeros((0, 1)), [],
                    (BINARY,), [3.0], [[1.0]], scenarios)


def builtin(name):
    """Named instances used throughout the tests and the verification suite."""
    if name == "thm1":
        return _thm1()
    if name == "refinement-example":
        return _refinement_example()
    if name.startswith("dim1-random-"):
        try:
            seed = int(name[len("dim1-random-"):])
        except ValueError:
            raise ValueError(f"bad seed in builtin name {name!r}")
        return _dim1_random(seed)
    raise ValueError(f"unknown builtin {name!r}; available: "
                     + ", ".join(BUILTIN_NAMES))
