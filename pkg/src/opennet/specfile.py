"""Loading and validating JSON spec files.

Every error raised here is a :class:`SpecError` carrying the file, a JSON
path to the offending entry, and the exit code the CLI should use.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import exprlang as el
from . import graph as gr
from . import linrel as lr
from . import network as nw
from . import spaces as sp
from .opensys import DEFAULT_SAMPLES, DEFAULT_TOL, OpenSystem
from .sim import IntegrationError, Monitor

__all__ = [
    "SpecError", "SpecSyntaxError", "DanglingReference", "DimensionMismatch",
    "SpecFile", "load", "loads", "DEFAULT_PARAMETERS",
    "EXIT_OK", "EXIT_FALSE", "EXIT_SYNTAX", "EXIT_DANGLING", "EXIT_DIMENSION", "EXIT_INVALID",
]

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_SYNTAX = 2
EXIT_DANGLING = 3
EXIT_DIMENSION = 4
EXIT_INVALID = 5

DEFAULT_PARAMETERS = {
    "samples": DEFAULT_SAMPLES,
    "tol": DEFAULT_TOL,
    "dt": 1e-3,
    "t1": 1.0,
    "seed": 0,
}

SECTIONS = (
    "parameters", "spaces", "submersions", "graphs", "graph_maps", "manifold_networks",
    "networks", "maps", "systems", "network_maps", "monitors", "run",
)
COMMANDS = (
    "validate", "compose", "check-fibration", "enum-fibrations", "from-graph",
    "verify-map", "simulate", "linrel",
)


class SpecError(Exception):
    code = EXIT_INVALID

    def __init__(self, message: str, path: str = "$", file: str | None = None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.file = file

    def __str__(self):
        return f"{self.file or '<spec>'}: {self.path}: {self.message}"


class SpecSyntaxError(SpecError):
    code = EXIT_SYNTAX


class DanglingReference(SpecError):
    code = EXIT_DANGLING

    def __init__(self, kind: str, name: str, path: str = "$", file: str | None = None):
        super().__init__(f"undeclared {kind} {name!r}", path, file)
        self.kind = kind
        self.name = name


class DimensionMismatch(SpecError):
    code = EXIT_DIMENSION


def _error_for(exc: Exception, path: str, file: str | None) -> SpecError:
    if isinstance(exc, SpecError):
        return exc
    if isinstance(exc, el.UnknownIdentifier):
        err = DanglingReference("coordinate", exc.name, path, file)
        if exc.source:
            err.message += f" in {exc.source!r} at offset {exc.offset}"
        return err
    if isinstance(exc, el.ExprSyntaxError):
        return SpecSyntaxError(f"{exc} in {exc.source!r}", path, file)
    if isinstance(exc, (sp.ShapeMismatch, nw.PhaseMismatch, lr.LinRelError)):
        return DimensionMismatch(str(exc), path, file)
    return SpecError(str(exc), path, file)


# ---------------------------------------------------------------------------

@dataclass
class SystemRef:
    """A named system, or the composite of a network with per-node systems."""

    system: OpenSystem
    label: str
    network: str | None = None
    members: tuple[str, ...] = ()


@dataclass
class SpecFile:
    path: str | None
    raw: dict
    parameters: dict
    spaces: dict[str, sp.Space] = field(default_factory=dict)
    submersions: dict[str, sp.Submersion] = field(default_factory=dict)
    graphs: dict[str, gr.Graph] = field(default_factory=dict)
    graph_maps: dict[str, tuple[gr.GraphMap, str, str]] = field(default_factory=dict)
    manifold_networks: dict[str, nw.ManifoldNetwork] = field(default_factory=dict)
    networks: dict[str, nw.Network] = field(default_factory=dict)
    maps: dict[str, sp.SubmersionMap] = field(default_factory=dict)
    systems: dict[str, OpenSystem] = field(default_factory=dict)
    network_maps: dict[str, nw.NetworkMap] = field(default_factory=dict)
    monitors: dict[str, dict] = field(default_factory=dict)
    run: dict[str, dict] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "spaces": {k: list(v.coords) for k, v in self.spaces.items()},
            "submersions": {k: _describe_sub(v) for k, v in self.submersions.items()},
            "graphs": {k: {"vertices": g.vertex_count, "edges": [list(e) for e in g.edges]}
                       for k, g in self.graphs.items()},
            "networks": {k: {"nodes": len(n.nodes), "carrier_state_dim": n.carrier.state_dim,
                             "carrier_input_dim": n.carrier.input_dim}
                         for k, n in self.networks.items()},
            "maps": sorted(self.maps),
            "systems": {k: {"state_dim": s.on.state_dim, "input_dim": s.on.input_dim}
                        for k, s in self.systems.items()},
            "network_maps": {k: {"source": m.source.name, "target": m.target.name,
                                 "phi": list(m.phi), "two_cell_residual": m.two_cell_residual}
                             for k, m in self.network_maps.items()},
            "monitors": sorted(self.monitors),
            "run": sorted(self.run),
        }


def _describe_sub(s: sp.Submersion) -> dict:
    return {"state": list(s.state_coords), "input": list(s.input_coords)}


class _Loader:
    def __init__(self, raw: Any, path: str | None, overrides: dict | None):
        self.file = path
        if not isinstance(raw, dict):
            raise SpecSyntaxError("top level must be a JSON object", "$", path)
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise SpecSyntaxError(
                f"unknown section {unknown[0]!r} (allowed: {', '.join(SECTIONS)})", f"$.{unknown[0]}", path
            )
        self.raw = raw
        self.spec = SpecFile(path, raw, self._parameters(raw.get("parameters", {}), overrides or {}))

    # -- helpers -----------------------------------------------------------

    @contextmanager
    def at(self, path: str):
        try:
            yield
        except SpecError:
            raise
        except (el.ExprError, sp.SpaceError, gr.GraphError, nw.NetworkError, lr.LinRelError,
                IntegrationError) as exc:
            raise _error_for(exc, path, self.file) from exc

    def fail(self, msg: str, path: str, cls=SpecSyntaxError):
        raise cls(msg, path, self.file)

    def section(self, name: str) -> dict:
        sec = self.raw.get(name, {})
        if not isinstance(sec, dict):
            self.fail(f"section {name!r} must be an object", f"$.{name}")
        return sec

    def want(self, obj: dict, key: str, path: str, typ=None):
        if not isinstance(obj, dict):
            self.fail("expected an object", path)
        if key not in obj:
            self.fail(f"missing key {key!r}", path)
        v = obj[key]
        if typ is not None and not isinstance(v, typ):
            self.fail(f"{key!r} has the wrong type ({type(v).__name__})", f"{path}.{key}")
        return v

    def ref(self, table: dict, kind: str, name: Any, path: str):
        if not isinstance(name, str):
            self.fail(f"expected the name of a {kind}", path)
        if name not in table:
            raise DanglingReference(kind, name, path, self.file)
        return table[name]

    def exprs(self, items: Any, path: str) -> list[str]:
        if not isinstance(items, list) or not all(isinstance(s, (str, int, float)) for s in items):
            self.fail("expected a list of expression strings", path)
        return [str(s) for s in items]

    def parse_exprs(self, items: Any, variables, path: str) -> list[el.Expr]:
        out = []
        for i, s in enumerate(self.exprs(items, path)):
            with self.at(f"{path}[{i}]"):
                out.append(el.parse(s, variables))
        return out

    def number_list(self, v: Any, path: str) -> list[float]:
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.fail("expected a list of numbers", path)
        return [float(x) for x in v]

    def _parameters(self, p: Any, overrides: dict) -> dict:
        if not isinstance(p, dict):
            raise SpecSyntaxError("section 'parameters' must be an object", "$.parameters", self.file)
        out = dict(DEFAULT_PARAMETERS)
        for k, v in p.items():
            if k not in DEFAULT_PARAMETERS:
                raise SpecSyntaxError(f"unknown parameter {k!r}", f"$.parameters.{k}", self.file)
            out[k] = v
        for k, v in overrides.items():
            if v is not None:
                out[k] = v
        try:
            out["samples"] = int(out["samples"])
            out["seed"] = int(out["seed"])
            for k in ("tol", "dt", "t1"):
                out[k] = float(out[k])
        except (TypeError, ValueError) as exc:
            raise SpecSyntaxError(f"bad parameter value: {exc}", "$.parameters", self.file) from None
        if out["samples"] < 1:
            raise SpecSyntaxError("samples must be positive", "$.parameters.samples", self.file)
        if not out["dt"] > 0:
            raise SpecSyntaxError("dt must be positive", "$.parameters.dt", self.file)
        return out

    # -- sections ----------------------------------------------------------

    def load(self) -> SpecFile:
        for step in (self.spaces, self.submersions, self.graphs, self.graph_maps,
                     self.manifold_networks, self.networks, self.maps, self.systems,
                     self.network_maps, self.monitors, self.runs):
            step()
        return self.spec

    def spaces(self):
        for name, v in self.section("spaces").items():
            path = f"$.spaces.{name}"
            if isinstance(v, dict):
                v = self.want(v, "coords", path, list)
            if not isinstance(v, list) or not all(isinstance(c, str) for c in v):
                self.fail("a space is a list of coordinate names", path)
            with self.at(path):
                self.spec.spaces[name] = sp.Space(name, tuple(v))

    def factor(self, f: Any, path: str) -> sp.Space:
        if isinstance(f, str):
            return self.ref(self.spec.spaces, "space", f, path)
        if isinstance(f, dict):
            s = self.ref(self.spec.spaces, "space", self.want(f, "space", path), f"{path}.space")
            with self.at(path):
                if "coords" in f:
                    return s.renamed(coords=f["coords"])
                return s.renamed(prefix=str(f.get("prefix", "")))
        self.fail("a factor is a space name or {\"space\": ..., \"coords\": [...]}", path)

    def submersions(self):
        for name, v in self.section("submersions").items():
            path = f"$.submersions.{name}"
            if not isinstance(v, dict):
                self.fail("a submersion is an object with 'state' and optional 'input'", path)
            st = self.want(v, "state", path, list)
            inp = v.get("input", [])
            if not isinstance(inp, list):
                self.fail("'input' must be a list", f"{path}.input")
            state = [self.factor(f, f"{path}.state[{i}]") for i, f in enumerate(st)]
            inputs = [self.factor(f, f"{path}.input[{i}]") for i, f in enumerate(inp)]
            with self.at(path):
                self.spec.submersions[name] = sp.Submersion(tuple(state), tuple(inputs), name=name)

    def graphs(self):
        for name, v in self.section("graphs").items():
            path = f"$.graphs.{name}"
            n = self.want(v, "vertices", path, int)
            edges = v.get("edges", [])
            if not isinstance(edges, list) or not all(
                    isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e) for e in edges):
                self.fail("edges must be a list of [source, target] pairs", f"{path}.edges")
            with self.at(path):
                self.spec.graphs[name] = gr.Graph(n, tuple(tuple(e) for e in edges))

    def graph_maps(self):
        for name, v in self.section("graph_maps").items():
            path = f"$.graph_maps.{name}"
            g = self.want(v, "source", path, str)
            h = self.want(v, "target", path, str)
            G = self.ref(self.spec.graphs, "graph", g, f"{path}.source")
            H = self.ref(self.spec.graphs, "graph", h, f"{path}.target")
            vm = self.want(v, "vertices", path, list)
            em = v.get("edges", [])
            for key, seq in (("vertices", vm), ("edges", em)):
                if not isinstance(seq, list) or not all(isinstance(x, int) for x in seq):
                    self.fail(f"{key} must be a list of integer indices", f"{path}.{key}")
            gm = gr.GraphMap(tuple(vm), tuple(em))
            with self.at(path):
                gr.check_graph_map(gm, G, H)
            self.spec.graph_maps[name] = (gm, g, h)

    def manifold_networks(self):
        for name, v in self.section("manifold_networks").items():
            path = f"$.manifold_networks.{name}"
            g = self.ref(self.spec.graphs, "graph", self.want(v, "graph", path), f"{path}.graph")
            phases = self.want(v, "phases", path, list)
            ps = [self.ref(self.spec.spaces, "space", p, f"{path}.phases[{i}]") for i, p in enumerate(phases)]
            with self.at(path):
                self.spec.manifold_networks[name] = nw.ManifoldNetwork(g, tuple(ps))

    def sub_ref(self, r: Any, path: str) -> sp.Submersion:
        """A submersion name, ``{"network": N, "node": i}`` or ``{"network": N, "carrier": true}``."""
        if isinstance(r, dict):
            net = self.ref(self.spec.networks, "network", self.want(r, "network", path), f"{path}.network")
            if r.get("carrier"):
                return net.carrier
            i = self.want(r, "node", path, int)
            if not 0 <= i < len(net.nodes):
                raise DimensionMismatch(f"network {net.name!r} has no node {i}", f"{path}.node", self.file)
            return net.nodes[i]
        return self.ref(self.spec.submersions, "submersion", r, path)

    def networks(self):
        for name, v in self.section("networks").items():
            path = f"$.networks.{name}"
            if not isinstance(v, dict):
                self.fail("a network is an object", path)
            if "manifold_network" in v:
                mn = self.ref(self.spec.manifold_networks, "manifold network", v["manifold_network"],
                              f"{path}.manifold_network")
                with self.at(path):
                    self.spec.networks[name] = nw.from_graph(mn, name=name)
                continue
            nodes_raw = self.want(v, "nodes", path, list)
            nodes = [self.sub_ref(r, f"{path}.nodes[{i}]") for i, r in enumerate(nodes_raw)]
            carrier = self.sub_ref(self.want(v, "carrier", path), f"{path}.carrier")
            wiring = self.want(v, "wiring", path, dict)
            wpath = f"{path}.wiring"
            target = sp.product_submersion(nodes)
            with self.at(wpath):
                if "inputs" in wiring:
                    exprs = self.parse_exprs(wiring["inputs"], carrier.total_coords, f"{wpath}.inputs")
                    if len(exprs) != target.input_dim:
                        raise DimensionMismatch(
                            f"wiring gives {len(exprs)} input components, the node product has "
                            f"{target.input_dim} inputs {list(target.input_coords)}", f"{wpath}.inputs", self.file)
                    psi = sp.Interconnection(carrier, target, inputs=exprs, name=f"{name}.wiring")
                elif "tot" in wiring:
                    exprs = self.parse_exprs(wiring["tot"], carrier.total_coords, f"{wpath}.tot")
                    if len(exprs) != target.total_dim:
                        raise DimensionMismatch(
                            f"wiring gives {len(exprs)} components, the node product has total dim "
                            f"{target.total_dim}", f"{wpath}.tot", self.file)
                    psi = sp.Interconnection(carrier, target, tot=exprs, name=f"{name}.wiring")
                else:
                    self.fail("wiring needs 'inputs' or 'tot'", wpath)
            with self.at(path):
                self.spec.networks[name] = nw.Network(nodes, carrier, psi, name=name)

    def maps(self):
        for name, v in self.section("maps").items():
            path = f"$.maps.{name}"
            src = self.sub_ref(self.want(v, "source", path), f"{path}.source")
            dst = self.sub_ref(self.want(v, "target", path), f"{path}.target")
            tot = self.parse_exprs(self.want(v, "tot", path), src.total_coords, f"{path}.tot")
            st = None
            if "st" in v:
                st = self.parse_exprs(v["st"], src.state_coords, f"{path}.st")
            with self.at(path):
                self.spec.maps[name] = sp.SubmersionMap(src, dst, tot, st, name=name,
                                                        seed=self.spec.parameters["seed"])

    def systems(self):
        for name, v in self.section("systems").items():
            path = f"$.systems.{name}"
            on = self.sub_ref(self.want(v, "on", path), f"{path}.on")
            field_ = self.parse_exprs(self.want(v, "field", path), on.total_coords, f"{path}.field")
            with self.at(f"{path}.field"):
                self.spec.systems[name] = OpenSystem(on, field_, name=name)

    def network_maps(self):
        for name, v in self.section("network_maps").items():
            path = f"$.network_maps.{name}"
            if not isinstance(v, dict):
                self.fail("a network map is an object", path)
            with self.at(path):
                if "fibration" in v:
                    gm, g, h = self.ref(self.spec.graph_maps, "graph map", v["fibration"], f"{path}.fibration")
                    dom = self.ref(self.spec.manifold_networks, "manifold network",
                                   self.want(v, "domain", path), f"{path}.domain")
                    cod = self.ref(self.spec.manifold_networks, "manifold network",
                                   self.want(v, "codomain", path), f"{path}.codomain")
                    if dom.graph != self.spec.graphs[g] or cod.graph != self.spec.graphs[h]:
                        raise DimensionMismatch(
                            f"graph map {v['fibration']!r} goes {g} -> {h}, but the manifold networks "
                            "are over different graphs", path, self.file)
                    m = nw.from_fibration(gm, dom, cod, name=name)
                else:
                    source = self.ref(self.spec.networks, "network", self.want(v, "source", path), f"{path}.source")
                    target = self.ref(self.spec.networks, "network", self.want(v, "target", path), f"{path}.target")
                    phi = self.want(v, "phi", path, list)
                    Phi_names = self.want(v, "Phi", path, list)
                    Phi = [self.ref(self.spec.maps, "map", n, f"{path}.Phi[{i}]") for i, n in enumerate(Phi_names)]
                    f = self.ref(self.spec.maps, "map", self.want(v, "f", path), f"{path}.f")
                    if not all(isinstance(y, int) and 0 <= y < len(source.nodes) for y in phi):
                        raise DimensionMismatch(
                            f"phi must list source node indices 0..{len(source.nodes) - 1}", f"{path}.phi", self.file)
                    m = nw.NetworkMap(source, target, phi, Phi, f, name=name,
                                      seed=self.spec.parameters["seed"])
            self.spec.network_maps[name] = m

    def monitors(self):
        for name, v in self.section("monitors").items():
            path = f"$.monitors.{name}"
            cons = self.exprs(self.want(v, "constraints", path), f"{path}.constraints")
            tol = v.get("tol", 1e-6)
            if not isinstance(tol, (int, float)):
                self.fail("tol must be a number", f"{path}.tol")
            for i, c in enumerate(cons):
                with self.at(f"{path}.constraints[{i}]"):
                    el.parse(c)
            self.spec.monitors[name] = {"constraints": cons, "tol": float(tol)}

    # -- run sections --------------------------------------------------------

    def system_ref(self, r: Any, path: str) -> SystemRef:
        if isinstance(r, str):
            return SystemRef(self.ref(self.spec.systems, "system", r, path), r)
        if isinstance(r, dict):
            net_name = self.want(r, "network", path, str)
            net = self.ref(self.spec.networks, "network", net_name, f"{path}.network")
            names = self.want(r, "systems", path, list)
            systems = [self.ref(self.spec.systems, "system", n, f"{path}.systems[{i}]") for i, n in enumerate(names)]
            with self.at(path):
                composed = nw.compose(net, systems)
            return SystemRef(composed, f"{net_name}({', '.join(names)})", net_name, tuple(names))
        self.fail("expected a system name or {\"network\": ..., \"systems\": [...]}", path)

    def system_list(self, r: Any, path: str) -> list[OpenSystem]:
        if not isinstance(r, list):
            self.fail("expected a list of system names", path)
        return [self.ref(self.spec.systems, "system", n, f"{path}[{i}]") for i, n in enumerate(r)]

    def runs(self):
        run = self.section("run")
        for cmd, v in run.items():
            path = f"$.run.{cmd}"
            if cmd not in COMMANDS:
                self.fail(f"unknown command {cmd!r}", path)
            if not isinstance(v, dict):
                self.fail("a run section is an object", path)
            handler = getattr(self, "run_" + cmd.replace("-", "_"), None)
            self.spec.run[cmd] = handler(v, path) if handler else dict(v)

    def run_compose(self, v, path):
        net_name = self.want(v, "network", path, str)
        ref = self.system_ref({"network": net_name, "systems": self.want(v, "systems", path, list)}, path)
        out = {"ref": ref}
        if "expect" in v:
            coords = ref.system.on.total_coords
            exp = self.parse_exprs(v["expect"], coords, f"{path}.expect")
            if len(exp) != ref.system.on.state_dim:
                raise DimensionMismatch(
                    f"expect has {len(exp)} components, the composed field has {ref.system.on.state_dim}",
                    f"{path}.expect", self.file)
            out["expect"] = exp
        return out

    def run_check_fibration(self, v, path):
        names = v.get("graph_maps", sorted(self.spec.graph_maps))
        if isinstance(names, str):
            names = [names]
        for i, n in enumerate(names):
            self.ref(self.spec.graph_maps, "graph map", n, f"{path}.graph_maps[{i}]")
        return {"graph_maps": list(names)}

    def run_enum_fibrations(self, v, path):
        g = self.want(v, "source", path, str)
        h = self.want(v, "target", path, str)
        self.ref(self.spec.graphs, "graph", g, f"{path}.source")
        self.ref(self.spec.graphs, "graph", h, f"{path}.target")
        return {"source": g, "target": h}

    def run_from_graph(self, v, path):
        names = v.get("manifold_networks", sorted(self.spec.manifold_networks))
        if isinstance(names, str):
            names = [names]
        for i, n in enumerate(names):
            self.ref(self.spec.manifold_networks, "manifold network", n, f"{path}.manifold_networks[{i}]")
        return {"manifold_networks": list(names)}

    def run_verify_map(self, v, path):
        name = self.want(v, "map", path, str)
        m = self.ref(self.spec.network_maps, "network map", name, f"{path}.map")
        G = self.system_list(self.want(v, "source_systems", path), f"{path}.source_systems")
        if len(G) != len(m.source.nodes):
            raise DimensionMismatch(f"source network has {len(m.source.nodes)} nodes, got {len(G)} systems",
                                    f"{path}.source_systems", self.file)
        F_raw = self.want(v, "target_systems", path)
        if F_raw == "induced":
            with self.at(f"{path}.target_systems"):
                F = nw.induced_family(m, G)
        else:
            F = self.system_list(F_raw, f"{path}.target_systems")
        if len(F) != len(m.target.nodes):
            raise DimensionMismatch(f"target network has {len(m.target.nodes)} nodes, got {len(F)} systems",
                                    f"{path}.target_systems", self.file)
        for i, (s, node) in enumerate(zip(G, m.source.nodes)):
            if s.on != node:
                raise DimensionMismatch(f"system {s.name!r} does not live on source node {i}",
                                        f"{path}.source_systems[{i}]", self.file)
        for i, (s, node) in enumerate(zip(F, m.target.nodes)):
            if s.on != node:
                raise DimensionMismatch(f"system {s.name!r} does not live on target node {i}",
                                        f"{path}.target_systems[{i}]", self.file)
        return {"map": name, "G": G, "F": F}

    def run_simulate(self, v, path):
        ref = self.system_ref(self.want(v, "system", path), f"{path}.system")
        sys_ = ref.system
        if not sys_.is_closed:
            raise SpecError(f"system {ref.label} has free inputs {list(sys_.on.input_coords)}; "
                            "only closed systems can be simulated", f"{path}.system", self.file)
        out: dict[str, Any] = {"ref": ref, "monitors": [], "push": None, "csv": v.get("csv")}
        if out["csv"] is not None and not isinstance(out["csv"], str):
            self.fail("csv must be a path string", f"{path}.csv")
        for i, mname in enumerate(v.get("monitors", [])):
            mdef = self.ref(self.spec.monitors, "monitor", mname, f"{path}.monitors[{i}]")
            with self.at(f"$.monitors.{mname}"):
                out["monitors"].append((mname, Monitor(mdef["constraints"], sys_.on.state_coords,
                                                       tol=mdef["tol"], name=mname)))
        if "push" in v:
            pv = v["push"]
            ppath = f"{path}.push"
            mname = self.want(pv, "map", ppath, str)
            if mname in self.spec.network_maps:
                f = self.spec.network_maps[mname].f
            else:
                f = self.ref(self.spec.maps, "map", mname, f"{ppath}.map")
            base = self.system_ref(self.want(pv, "system", ppath), f"{ppath}.system")
            if base.system.on != f.source:
                raise DimensionMismatch(f"push system {base.label} does not live on the source of {mname!r}",
                                        f"{ppath}.system", self.file)
            if f.target != sys_.on:
                raise DimensionMismatch(f"map {mname!r} does not end at the simulated system's submersion",
                                        f"{ppath}.map", self.file)
            if not base.system.is_closed:
                raise SpecError(f"push system {base.label} has free inputs", f"{ppath}.system", self.file)
            bx0 = self.number_list(self.want(pv, "x0", ppath), f"{ppath}.x0")
            if len(bx0) != f.source.state_dim:
                raise DimensionMismatch(f"x0 has {len(bx0)} entries, state dim is {f.source.state_dim}",
                                        f"{ppath}.x0", self.file)
            tol = pv.get("tol", 1e-6)
            out["push"] = {"map": mname, "f": f, "ref": base, "x0": bx0, "tol": float(tol)}
        if "x0" in v:
            x0 = self.number_list(v["x0"], f"{path}.x0")
        elif out["push"] is not None:
            with self.at(f"{path}.push"):
                x0 = [float(c) for c in out["push"]["f"].st_fn(np.asarray(out["push"]["x0"]))]
        else:
            self.fail("missing key 'x0'", path)
        if len(x0) != sys_.on.state_dim:
            raise DimensionMismatch(f"x0 has {len(x0)} entries, state dim is {sys_.on.state_dim}",
                                    f"{path}.x0", self.file)
        out["x0"] = x0
        return out

    def run_linrel(self, v, path):
        rels: dict[str, lr.LinRelation] = {}
        for name, r in self.want(v, "relations", path, dict).items():
            rels[name] = self.relation(r, f"{path}.relations.{name}")
        ops = self.want(v, "ops", path, list)
        parsed = []
        for i, op in enumerate(ops):
            opath = f"{path}.ops[{i}]"
            if not isinstance(op, dict):
                self.fail("an op is an object", opath)
            kinds = [k for k in ("compose", "odot", "contains", "equal", "converse", "print") if k in op]
            if len(kinds) != 1:
                self.fail("an op has exactly one of compose, odot, contains, equal, converse, print", opath)
            kind = kinds[0]
            arg = op[kind]
            with self.at(opath):
                if kind == "compose":
                    if not (isinstance(arg, list) and len(arg) >= 2):
                        self.fail("compose takes a list of at least two relation names", f"{opath}.compose")
                    rs = [self.ref(rels, "relation", n, f"{opath}.compose[{j}]") for j, n in enumerate(arg)]
                    out = rs[-1]
                    for S in reversed(rs[:-1]):
                        out = lr.compose_rel(S, out)
                    result = out
                elif kind == "odot":
                    phi = self.want(arg, "phi", f"{opath}.odot", list)
                    comps = [self.ref(rels, "relation", n, f"{opath}.odot.Phi[{j}]")
                             for j, n in enumerate(self.want(arg, "Phi", f"{opath}.odot", list))]
                    dims = self.want(arg, "mu_dims", f"{opath}.odot", list)
                    result = lr.odot(phi, comps, dims)
                elif kind == "converse":
                    result = self.ref(rels, "relation", arg, f"{opath}.converse").converse()
                elif kind == "print":
                    result = self.ref(rels, "relation", arg, f"{opath}.print")
                else:
                    if not (isinstance(arg, list) and len(arg) == 2):
                        self.fail(f"{kind} takes two relation names", f"{opath}.{kind}")
                    a = self.ref(rels, "relation", arg[0], f"{opath}.{kind}[0]")
                    b = self.ref(rels, "relation", arg[1], f"{opath}.{kind}[1]")
                    lr._check_same(a, b)
                    result = (a, b)
            entry = {"kind": kind, "args": arg, "result": result, "let": op.get("let"),
                     "expect": op.get("expect")}
            if op.get("let") is not None and kind in ("compose", "odot", "converse"):
                rels[op["let"]] = result
            parsed.append(entry)
        return {"relations": rels, "ops": parsed}

    def relation(self, r: Any, path: str) -> lr.LinRelation:
        if not isinstance(r, dict):
            self.fail("a relation is an object", path)
        with self.at(path):
            if "graph" in r:
                return lr.graph_of(self.matrix(r["graph"], f"{path}.graph"))
            if "affine_crl" in r:
                return lr.affine_crl(self.matrix(r["affine_crl"], f"{path}.affine_crl"))
            if "identity" in r:
                return lr.identity_rel(int(r["identity"]))
            dw = self.want(r, "dim_w", path, int)
            dv = self.want(r, "dim_v", path, int)
            if "span" in r:
                M = self.matrix(r["span"], f"{path}.span", rows=dw + dv)
                return lr.LinRelation.from_span(dw, dv, M)
            if "constraints" in r:
                M = self.matrix(r["constraints"], f"{path}.constraints", cols=dw + dv)
                return lr.LinRelation.from_constraints(dw, dv, M)
            if r.get("full"):
                return lr.full_rel(dw, dv)
            return lr.zero_rel(dw, dv)

    def matrix(self, m: Any, path: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
        if not isinstance(m, list) or not all(isinstance(row, list) for row in m):
            self.fail("a matrix is a list of rows", path)
        widths = {len(row) for row in m}
        if len(widths) > 1:
            raise DimensionMismatch("matrix rows have different lengths", path, self.file)
        A = np.array(m, dtype=float).reshape(len(m), widths.pop() if widths else 0)
        if rows is not None and A.shape[0] != rows:
            raise DimensionMismatch(f"expected {rows} rows, got {A.shape[0]}", path, self.file)
        if cols is not None and A.shape[1] != cols:
            raise DimensionMismatch(f"expected {cols} columns, got {A.shape[1]}", path, self.file)
        return A


def loads(text: str, path: str | None = None, overrides: dict | None = None) -> SpecFile:
    if not text.strip():
        raise SpecSyntaxError("empty file", "$", path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                              "$", path) from None
    return _Loader(raw, path, overrides).load()


def load(path: str | os.PathLike, overrides: dict | None = None) -> SpecFile:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecSyntaxError(f"cannot read file: {exc.strerror}", "$", path) from None
    return loads(text, path, overrides)
