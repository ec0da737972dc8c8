"""Scenario files: loading, defaults, validation and digests.

A scenario is a YAML mapping with a ``format`` header and a ``kind``
selecting the experiment. Defaults are merged in before validation, so the
digest covers every value a run actually uses. Errors carry the dotted
path of the offending field.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

FORMAT_VERSION = 1
KINDS = ("cluster", "transfer", "pdr", "drive", "broadcast")


class ScenarioError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


_LINK = {"loss": 0.0, "bandwidth": 100.0, "latency": 0.2}
_BATS = {"batch_size": 8, "degree": "dense", "max_degree": 64, "K": 64, "packet_len": 1024}
_SEEDS = {"master": 0}

DEFAULTS = {
    "cluster": {
        "horizon_ms": 30000.0,
        "nodes": {"sensing_range": 50.0, "list": []},
        "links": {**_LINK, "skip": None, "recovery": True, "overrides": []},
        "profiles": {},
        "tasks": [],
        "vehicles": [],
        "mcs": {"environment": "campus", "tables": None},
        "coding": {"bats": dict(_BATS), "ecc": {"k": 32, "redundancy": "adaptive", "seed": 7, "packet_len": 1024}},
        "policy": {
            "system": "soar",
            "queue": "edf",
            "lite": True,
            "inflation_sigma": 0.0,
            "switch_cost_ms": 5.0,
            "reassociation_ms": 500.0,
            "beacon_period_ms": 100.0,
            "bandwidth": "bottleneck",
            "app_rate": 10.0,
            "capacity": 1.0,
        },
        "deadline_derivation": None,
        "seeds": dict(_SEEDS),
    },
    "transfer": {
        "chain": {**_LINK, "hops": 1, "skip": None},
        "block": {"K": 256, "packet_len": 1024},
        "coding": {"schemes": ["bats", "arq"], "bats": dict(_BATS, K=None), "window": 32},
        "runs": 30,
        "seeds": dict(_SEEDS),
    },
    "pdr": {
        "mcs": {"environment": "public", "tables": None},
        "ecc": {"k": 32, "redundancy": "adaptive", "seed": 7},
        "app_rate": 10.0,
        "erasure": None,
        "blocks": 2000,
        "seeds": dict(_SEEDS),
    },
    "drive": {
        "nodes": {"count": 5, "spacing": 25.0, "sensing_range": 15.0, "first": 0.0},
        "vehicle": {"start_m": -20.0, "end_m": 115.0, "speed_kmh": 20.0},
        "mcs": {"environment": "campus", "tables": None},
        "app_rate": 1000.0,
        "switch_cost_ms": 5.0,
        "beacon_period_ms": 100.0,
        "seeds": dict(_SEEDS),
    },
    "broadcast": {
        "mcs": {"environment": "campus", "tables": None},
        "vehicles": [1, 2, 3, 4, 5, 6],
        "app_rate": 1000.0,
        "basic_rate": 6.0,
        "modes": ["soar", "plain_broadcast", "unicast"],
        "seeds": dict(_SEEDS),
    },
}

# sections whose defaults are merged key-by-key; everything else is replaced
_MERGE = {
    "nodes", "links", "mcs", "coding", "coding.bats", "coding.ecc", "policy", "seeds",
    "chain", "block", "ecc", "vehicle",
}


@dataclass
class ScenarioConfig:
    kind: str
    name: str
    data: dict
    source: str = "<memory>"

    @property
    def digest(self):
        return config_digest(self.data)

    def get(self, dotted):
        return resolve(self.data, dotted)

    @property
    def master_seed(self):
        return self.data["seeds"]["master"]


def config_digest(data):
    """sha256 over canonical JSON (sorted keys, no whitespace)."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def resolve(data, dotted):
    cur = data
    for part in dotted.split("."):
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
        elif isinstance(cur, list) and part.isdigit() and int(part) < len(cur):
            cur = cur[int(part)]
        else:
            raise KeyError(dotted)
    return cur


def assign(data, dotted, value):
    parts = dotted.split(".")
    cur = data
    for part in parts[:-1]:
        cur = cur[int(part)] if isinstance(cur, list) else cur[part]
    last = parts[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        cur[last] = value


def load_scenario(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError("", f"cannot read scenario {p}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("", f"{p} is not valid YAML: {exc}") from None
    return parse_scenario(raw, source=str(p))


def parse_scenario(raw, source="<memory>"):
    if not isinstance(raw, dict):
        raise ScenarioError("", "scenario must be a mapping")
    fmt = raw.get("format")
    if fmt != FORMAT_VERSION:
        raise ScenarioError("format", f"expected format {FORMAT_VERSION}, got {fmt!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ScenarioError("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    name = raw.get("name", Path(source).stem)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name", "must be a non-empty string")
    body = {k: v for k, v in raw.items() if k not in ("format", "kind", "name")}
    data = _merge(DEFAULTS[kind], body, "")
    _VALIDATORS[kind](data)
    data = {"format": FORMAT_VERSION, "kind": kind, "name": name, **data}
    return ScenarioConfig(kind, name, data, source)


def with_overrides(config, overrides):
    """New config with dotted-path ``overrides`` applied and re-validated."""
    data = copy.deepcopy(config.data)
    for key, value in overrides.items():
        try:
            resolve(data, key)
        except KeyError:
            raise ScenarioError(key, "no such configuration path") from None
        assign(data, key, value)
    cfg = parse_scenario(data, config.source)
    return cfg


def _merge(defaults, given, prefix):
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ScenarioError(prefix, "must be a mapping")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in defaults:
            raise ScenarioError(path, "unknown field")
        if path in _MERGE and isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value, path)
        else:
            out[key] = copy.deepcopy(value)
    return out


# -- field checks -------------------------------------------------------


def _number(value, path, lo=None, hi=None, integer=False, lo_open=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ScenarioError(path, f"must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ScenarioError(path, f"must be {'>' if lo_open else '>='} {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ScenarioError(path, f"must be <= {hi}, got {value!r}")
    return value


def _choice(value, path, options):
    if value not in options:
        raise ScenarioError(path, f"must be one of {', '.join(map(str, options))}, got {value!r}")
    return value


def _list(value, path):
    if not isinstance(value, list):
        raise ScenarioError(path, "must be a list")
    return value


def _link(d, path, partial=False):
    for key, lo, hi, lo_open in (("loss", 0, 1, False), ("bandwidth", 0, None, True), ("latency", 0, None, False)):
        if key in d:
            _number(d[key], f"{path}.{key}", lo=lo, hi=hi, lo_open=lo_open)
        elif not partial:
            raise ScenarioError(f"{path}.{key}", "missing")


def _seeds(d):
    s = d["seeds"]
    if not isinstance(s, dict) or "master" not in s:
        raise ScenarioError("seeds.master", "missing")
    _number(s["master"], "seeds.master", lo=0, integer=True)
    for key in s:
        if key != "master":
            raise ScenarioError(f"seeds.{key}", "unknown field (per-component seeds derive from master)")


def _mcs(d, path="mcs"):
    from lampnet import i2v

    m = d
    if m.get("tables") is not None:
        try:
            table = i2v.McsTable(m["tables"])
        except (i2v.ConfigurationError, TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}.tables", str(exc)) from None
    else:
        table = i2v.DEFAULT_MCS
    if m["environment"] not in table.environments:
        raise ScenarioError(f"{path}.environment", f"unknown road environment {m['environment']!r}")


def _bats(b, path):
    _number(b["batch_size"], f"{path}.batch_size", lo=1, integer=True)
    _number(b["max_degree"], f"{path}.max_degree", lo=1, integer=True)
    if b.get("K") is not None:
        _number(b["K"], f"{path}.K", lo=1, integer=True)
    if "packet_len" in b:
        _number(b["packet_len"], f"{path}.packet_len", lo=1, integer=True)
    deg = b["degree"]
    if deg not in ("dense", "robust_soliton"):
        _number(deg, f"{path}.degree", lo=1, integer=True)


def _redundancy(v, path):
    if v != "adaptive":
        _number(v, path, lo=0)


def _validate_cluster(d):
    _seeds(d)
    _number(d["horizon_ms"], "horizon_ms", lo=0, lo_open=True)
    nodes = d["nodes"]
    _number(nodes["sensing_range"], "nodes.sensing_range", lo=0, lo_open=True)
    lst = _list(nodes["list"], "nodes.list")
    if not lst:
        raise ScenarioError("nodes.list", "at least one node is required")
    ids, positions = set(), []
    for i, n in enumerate(lst):
        p = f"nodes.list.{i}"
        if not isinstance(n, dict):
            raise ScenarioError(p, "must be a mapping")
        for key in n:
            if key not in ("id", "position", "base_load"):
                raise ScenarioError(f"{p}.{key}", "unknown field")
        nid = _number(n.get("id"), f"{p}.id", integer=True)
        if nid in ids:
            raise ScenarioError(f"{p}.id", f"duplicate node id {nid}")
        ids.add(nid)
        positions.append(_number(n.get("position"), f"{p}.position"))
        _number(n.get("base_load", 0.0), f"{p}.base_load", lo=0)
    if len(set(positions)) != len(positions):
        raise ScenarioError("nodes.list", "node positions must be distinct")

    links = d["links"]
    _link(links, "links")
    if links["skip"] is not None:
        if not isinstance(links["skip"], dict):
            raise ScenarioError("links.skip", "must be a mapping or null")
        _link(links["skip"], "links.skip")
    if not isinstance(links["recovery"], bool):
        raise ScenarioError("links.recovery", "must be true or false")
    for i, o in enumerate(_list(links["overrides"], "links.overrides")):
        p = f"links.overrides.{i}"
        if not isinstance(o, dict):
            raise ScenarioError(p, "must be a mapping")
        for end in ("a", "b"):
            if o.get(end) not in ids:
                raise ScenarioError(f"{p}.{end}", f"unknown node {o.get(end)!r}")
        for key in o:
            if key not in ("a", "b", "loss", "bandwidth", "latency", "status"):
                raise ScenarioError(f"{p}.{key}", "unknown field")
        _link(o, p, partial=True)
        if "status" in o:
            _choice(o["status"], f"{p}.status", ("up", "down"))

    profiles = d["profiles"]
    if not isinstance(profiles, dict) or not profiles:
        raise ScenarioError("profiles", "at least one task profile is required")
    for name, prof in profiles.items():
        p = f"profiles.{name}"
        if not isinstance(prof, dict):
            raise ScenarioError(p, "must be a mapping")
        for key in prof:
            if key not in ("original", "lite", "input_size", "result_size"):
                raise ScenarioError(f"{p}.{key}", "unknown field")
        for variant in ("original", "lite"):
            v = prof.get(variant)
            if v is None:
                if variant == "original":
                    raise ScenarioError(f"{p}.original", "missing")
                continue
            vp = f"{p}.{variant}"
            if not isinstance(v, dict):
                raise ScenarioError(vp, "must be a mapping")
            for key in v:
                if key not in ("inference", "accuracy", "sensor_read", "preprocess", "postprocess"):
                    raise ScenarioError(f"{vp}.{key}", "unknown field")
            _number(v.get("inference"), f"{vp}.inference", lo=0, lo_open=True)
            _number(v.get("accuracy", 1.0), f"{vp}.accuracy", lo=0, hi=1)
            for key in ("sensor_read", "preprocess", "postprocess"):
                _number(v.get(key, 0.0), f"{vp}.{key}", lo=0)
        _number(prof.get("input_size", 0.0), f"{p}.input_size", lo=0)
        _number(prof.get("result_size", 0.0), f"{p}.result_size", lo=0)

    tasks = _list(d["tasks"], "tasks")
    if not tasks:
        raise ScenarioError("tasks", "at least one task is required")
    tids = set()
    for i, t in enumerate(tasks):
        p = f"tasks.{i}"
        if not isinstance(t, dict):
            raise ScenarioError(p, "must be a mapping")
        tid = t.get("id")
        if not isinstance(tid, str) or not tid:
            raise ScenarioError(f"{p}.id", "must be a non-empty string")
        p = f"tasks.{i}({tid})"
        for key in t:
            if key not in ("id", "profile", "source", "deadline", "period", "offset"):
                raise ScenarioError(f"{p}.{key}", "unknown field")
        if tid in tids:
            raise ScenarioError(f"{p}.id", f"duplicate task id {tid}")
        tids.add(tid)
        if t.get("profile") not in profiles:
            raise ScenarioError(f"{p}.profile", f"task {tid} references unknown profile {t.get('profile')!r}")
        if t.get("source") not in ids:
            raise ScenarioError(f"{p}.source", f"task {tid} references missing node {t.get('source')!r}")
        dl = _number(t.get("deadline"), f"{p}.deadline", lo=0, lo_open=True)
        per = _number(t.get("period", dl), f"{p}.period", lo=0, lo_open=True)
        if dl < per:
            raise ScenarioError(f"{p}.deadline", f"deadline {dl} is shorter than period {per}")
        _number(t.get("offset", 0.0), f"{p}.offset", lo=0)

    span = (min(positions), max(positions))
    for i, v in enumerate(_list(d["vehicles"], "vehicles")):
        _vehicle(v, f"vehicles.{i}", span, nodes["sensing_range"])

    _mcs(d["mcs"])
    _bats(d["coding"]["bats"], "coding.bats")
    ecc = d["coding"]["ecc"]
    _number(ecc["k"], "coding.ecc.k", lo=1, hi=65535, integer=True)
    _number(ecc["seed"], "coding.ecc.seed", lo=0, integer=True)
    _number(ecc["packet_len"], "coding.ecc.packet_len", lo=1, integer=True)
    _redundancy(ecc["redundancy"], "coding.ecc.redundancy")

    pol = d["policy"]
    _choice(pol["system"], "policy.system", ("soar", "baseline"))
    _choice(pol["queue"], "policy.queue", ("edf", "latest_deadline"))
    if not isinstance(pol["lite"], bool):
        raise ScenarioError("policy.lite", "must be true or false")
    _number(pol["inflation_sigma"], "policy.inflation_sigma", lo=0)
    _number(pol["switch_cost_ms"], "policy.switch_cost_ms", lo=0)
    _number(pol["reassociation_ms"], "policy.reassociation_ms", lo=0)
    _number(pol["beacon_period_ms"], "policy.beacon_period_ms", lo=0, lo_open=True, allow_none=True)
    _choice(pol["bandwidth"], "policy.bandwidth", ("measured", "bottleneck"))
    _number(pol["app_rate"], "policy.app_rate", lo=0, lo_open=True)
    _number(pol["capacity"], "policy.capacity", lo=0, lo_open=True)

    dd = d["deadline_derivation"]
    if dd is not None:
        if not isinstance(dd, dict):
            raise ScenarioError("deadline_derivation", "must be a mapping or null")
        for key in dd:
            if key not in ("sensing_range", "coverage", "speed_kmh", "rounded"):
                raise ScenarioError(f"deadline_derivation.{key}", "unknown field")
        _number(dd.get("sensing_range"), "deadline_derivation.sensing_range", lo=0, lo_open=True)
        _number(dd.get("coverage"), "deadline_derivation.coverage", lo=0, hi=1, lo_open=True)
        _number(dd.get("speed_kmh"), "deadline_derivation.speed_kmh", lo=0, lo_open=True)
        _number(dd.get("rounded"), "deadline_derivation.rounded", lo=0, allow_none=True)


def _vehicle(v, path, span=None, reach=0.0):
    if not isinstance(v, dict):
        raise ScenarioError(path, "must be a mapping")
    if "waypoints" in v:
        for key in v:
            if key != "waypoints":
                raise ScenarioError(f"{path}.{key}", "unknown field")
        wps = _list(v["waypoints"], f"{path}.waypoints")
        if len(wps) < 2:
            raise ScenarioError(f"{path}.waypoints", "needs at least two [t_ms, position_m] pairs")
        for j, wp in enumerate(wps):
            if not isinstance(wp, list) or len(wp) != 2:
                raise ScenarioError(f"{path}.waypoints.{j}", "must be [t_ms, position_m]")
            for x in wp:
                _number(x, f"{path}.waypoints.{j}")
        xs = [wp[1] for wp in wps]
        ts = [wp[0] for wp in wps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError(f"{path}.waypoints", "times must strictly increase")
        if not (all(b >= a for a, b in zip(xs, xs[1:])) or all(b <= a for a, b in zip(xs, xs[1:]))):
            raise ScenarioError(f"{path}.waypoints", "positions must be monotone")
        lo, hi = min(xs), max(xs)
    else:
        for key in v:
            if key not in ("start_m", "end_m", "speed_kmh", "t0_ms"):
                raise ScenarioError(f"{path}.{key}", "unknown field")
        a = _number(v.get("start_m"), f"{path}.start_m")
        b = _number(v.get("end_m"), f"{path}.end_m")
        if a == b:
            raise ScenarioError(f"{path}.end_m", "trace must move")
        _number(v.get("speed_kmh"), f"{path}.speed_kmh", lo=0, lo_open=True)
        _number(v.get("t0_ms", 0.0), f"{path}.t0_ms")
        lo, hi = min(a, b), max(a, b)
    if span is not None and (hi < span[0] - reach or lo > span[1] + reach):
        raise ScenarioError(path, "trace never passes the cluster's road segment")


def _validate_transfer(d):
    _seeds(d)
    ch = d["chain"]
    _link(ch, "chain")
    _number(ch["hops"], "chain.hops", lo=1, integer=True)
    if ch["skip"] is not None:
        _link(ch["skip"], "chain.skip")
    _number(d["block"]["K"], "block.K", lo=1, integer=True)
    _number(d["block"]["packet_len"], "block.packet_len", lo=1, integer=True)
    schemes = _list(d["coding"]["schemes"], "coding.schemes")
    if not schemes:
        raise ScenarioError("coding.schemes", "at least one scheme is required")
    for i, s in enumerate(schemes):
        _choice(s, f"coding.schemes.{i}", ("bats", "arq", "none"))
    _bats(d["coding"]["bats"], "coding.bats")
    _number(d["coding"]["window"], "coding.window", lo=1, integer=True)
    _number(d["runs"], "runs", lo=1, integer=True)


def _validate_pdr(d):
    _seeds(d)
    _mcs(d["mcs"])
    _number(d["ecc"]["k"], "ecc.k", lo=1, hi=65535, integer=True)
    _number(d["ecc"]["seed"], "ecc.seed", lo=0, integer=True)
    _redundancy(d["ecc"]["redundancy"], "ecc.redundancy")
    _number(d["app_rate"], "app_rate", lo=0, lo_open=True)
    _number(d["erasure"], "erasure", lo=0, hi=1, allow_none=True)
    _number(d["blocks"], "blocks", lo=1, integer=True)


def _validate_drive(d):
    _seeds(d)
    n = d["nodes"]
    _number(n["count"], "nodes.count", lo=1, hi=23, integer=True)
    _number(n["spacing"], "nodes.spacing", lo=0, lo_open=True)
    _number(n["sensing_range"], "nodes.sensing_range", lo=0, lo_open=True)
    _number(n["first"], "nodes.first")
    first = n["first"]
    _vehicle(d["vehicle"], "vehicle", (first, first + n["spacing"] * (n["count"] - 1)), n["sensing_range"])
    _mcs(d["mcs"])
    _number(d["app_rate"], "app_rate", lo=0, lo_open=True)
    _number(d["switch_cost_ms"], "switch_cost_ms", lo=0)
    _number(d["beacon_period_ms"], "beacon_period_ms", lo=0, lo_open=True, allow_none=True)


def _validate_broadcast(d):
    _seeds(d)
    _mcs(d["mcs"])
    vs = _list(d["vehicles"], "vehicles")
    if not vs:
        raise ScenarioError("vehicles", "at least one vehicle count is required")
    for i, v in enumerate(vs):
        _number(v, f"vehicles.{i}", lo=1, integer=True)
    _number(d["app_rate"], "app_rate", lo=0, lo_open=True)
    _number(d["basic_rate"], "basic_rate", lo=0, lo_open=True)
    for i, m in enumerate(_list(d["modes"], "modes")):
        _choice(m, f"modes.{i}", ("soar", "plain_broadcast", "unicast"))


_VALIDATORS = {
    "cluster": _validate_cluster,
    "transfer": _validate_transfer,
    "pdr": _validate_pdr,
    "drive": _validate_drive,
    "broadcast": _validate_broadcast,
}
