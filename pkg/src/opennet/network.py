"""Networks of open systems and maps between them.

A :class:`Network` is a list of node submersions together with an
interconnection ``wiring: carrier -> prod(nodes)``.  Given one open system
per node, :func:`compose` pulls their product back along the wiring.

A :class:`NetworkMap` from ``(mu, nu)`` to ``(tau, psi)`` consists of an
index map ``phi: X -> Y``, component maps ``Phi[x]: mu[phi[x]] -> tau[x]``
and a carrier map ``f``, subject to ``psi o f = P(phi, Phi) o nu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang as el
from .exprlang import Var
from .graph import Graph, GraphMap, fibration_failures
from .opensys import (
    DEFAULT_SAMPLES, DEFAULT_TOL, OpenSystem, RelatednessReport,
    check_phi_related_family, check_related, product_systems, pullback,
)
from .spaces import (
    SQUARE_SAMPLES, SQUARE_TOL, Interconnection, ShapeMismatch, Space, SpaceError,
    Submersion, SubmersionMap, compose_maps, identity_submersion,
    product_submersion, sample_evaluate,
)

__all__ = [
    "Network", "NetworkMap", "ManifoldNetwork", "NetworkError", "NotAFibration",
    "PhaseMismatch", "HypothesisFailure", "TwoCellViolation",
    "product_of_list", "compose", "from_graph", "graph_node_submersion",
    "from_fibration", "verify_theorem", "induced_family",
]


class NetworkError(ValueError):
    pass


class NotAFibration(NetworkError):
    def __init__(self, failures):
        super().__init__(f"graph map is not a fibration: {failures}")
        self.failures = failures


class PhaseMismatch(NetworkError):
    pass


class TwoCellViolation(NetworkError):
    pass


class HypothesisFailure(NetworkError):
    """The node families are not Phi-related, so the theorem does not apply."""

    def __init__(self, report: RelatednessReport):
        super().__init__(
            f"families are not Phi-related (max residual {report.max_residual:.3g} > tol {report.tol:g})"
        )
        self.report = report


class Network:
    def __init__(self, nodes: Sequence[Submersion], carrier: Submersion,
                 wiring: Interconnection, name: str = ""):
        self.nodes = tuple(nodes)
        self.carrier = carrier
        self.name = name
        self.product = product_submersion(self.nodes)
        if not isinstance(wiring, Interconnection):
            wiring = Interconnection.from_map(wiring)
        if wiring.source != carrier:
            raise ShapeMismatch(f"network {name or '?'}: wiring does not start at the carrier")
        if wiring.target != self.product:
            raise ShapeMismatch(
                f"network {name or '?'}: wiring target is not the product of the node submersions "
                f"(expected coordinates {list(self.product.total_coords)}, "
                f"got {list(wiring.target.total_coords)})"
            )
        self.wiring = wiring

    def __repr__(self):
        return f"Network({self.name or '?'}: {len(self.nodes)} nodes, carrier {self.carrier.describe()})"

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class ManifoldNetwork:
    graph: Graph
    phases: tuple[Space, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if len(self.phases) != self.graph.vertex_count:
            raise PhaseMismatch(
                f"{len(self.phases)} phase spaces for {self.graph.vertex_count} vertices"
            )


# ---------------------------------------------------------------------------

def product_of_list(phi: Sequence[int], Phi: Sequence[SubmersionMap],
                    mu: Sequence[Submersion], tau: Sequence[Submersion] | None = None,
                    verify: bool = True) -> SubmersionMap:
    """The map ``P(phi, Phi): prod mu -> prod tau`` whose block a is ``Phi[a]`` on block ``phi[a]``."""
    if len(phi) != len(Phi):
        raise ShapeMismatch(f"|phi| = {len(phi)} but {len(Phi)} components")
    if tau is None:
        tau = [m.target for m in Phi]
    if len(tau) != len(phi):
        raise ShapeMismatch(f"|phi| = {len(phi)} but {len(tau)} target submersions")
    src = product_submersion(mu)
    dst = product_submersion(tau)
    states, inputs, st = [], [], []
    for a, (y, m) in enumerate(zip(phi, Phi)):
        if not 0 <= y < len(mu):
            raise ShapeMismatch(f"phi({a}) = {y} is not an index of the source list")
        if m.source != mu[y]:
            raise ShapeMismatch(f"Phi({a}) does not start at mu({y})")
        if m.target != tau[a]:
            raise ShapeMismatch(f"Phi({a}) does not end at tau({a})")
        ren = {c: Var(f"n{y}.{c}") for c in m.source.total_coords}
        k = m.target.state_dim
        tot = [el.substitute(e, ren) for e in m.tot]
        states.extend(tot[:k])
        inputs.extend(tot[k:])
        st.extend(el.substitute(e, ren) for e in m.st)
    return SubmersionMap(src, dst, states + inputs, st, name="P(phi,Phi)", verify=verify)


def compose(net: Network, systems: Sequence[OpenSystem]) -> OpenSystem:
    """``psi* (F_1 x ... x F_n)``: the system on the carrier."""
    if len(systems) != len(net.nodes):
        raise ShapeMismatch(f"network {net.name or '?'} has {len(net.nodes)} nodes, got {len(systems)} systems")
    for i, (F, node) in enumerate(zip(systems, net.nodes)):
        if F.on != node:
            raise ShapeMismatch(f"system {F.name or i} does not live on node {i} of {net.name or '?'}")
    out = pullback(net.wiring, product_systems(systems))
    out.name = f"{net.name or 'net'}({', '.join(F.name or '?' for F in systems)})"
    return out


def graph_node_submersion(mn: ManifoldNetwork, a: int) -> Submersion:
    """``P(a) x prod_{e -> a} P(s(e)) -> P(a)``; the j-th in-edge's block is prefixed ``in{j}.``."""
    g = mn.graph
    ins = g.in_edges()[a]
    inputs = tuple(mn.phases[g.source(e)].renamed(f"in{j}.") for j, e in enumerate(ins))
    return Submersion((mn.phases[a],), inputs, name=f"I({a})")


def from_graph(mn: ManifoldNetwork, name: str = "") -> Network:
    g = mn.graph
    nodes = [graph_node_submersion(mn, a) for a in range(g.vertex_count)]
    carrier = product_submersion([identity_submersion(P) for P in mn.phases])
    in_edges = g.in_edges()
    inputs = []
    for a in range(g.vertex_count):
        for e in in_edges[a]:
            s = g.source(e)
            inputs.extend(Var(f"n{s}.{c}") for c in mn.phases[s].coords)
    wiring = Interconnection(carrier, product_submersion(nodes), inputs=inputs, name="I_G")
    return Network(nodes, carrier, wiring, name=name or "graph")


# ---------------------------------------------------------------------------

class NetworkMap:
    """Map from the network `source` (mu, nu) to the network `target` (tau, psi)."""

    def __init__(self, source: Network, target: Network, phi: Sequence[int],
                 Phi: Sequence[SubmersionMap], f: SubmersionMap, name: str = "",
                 samples: int = SQUARE_SAMPLES, tol: float = SQUARE_TOL, seed: int = 0):
        self.source = source
        self.target = target
        self.phi = tuple(int(y) for y in phi)
        self.Phi = tuple(Phi)
        self.f = f
        self.name = name
        if len(self.phi) != len(target.nodes):
            raise ShapeMismatch(f"map {name or '?'}: phi has {len(self.phi)} entries, target has {len(target.nodes)} nodes")
        if f.source != source.carrier or f.target != target.carrier:
            raise ShapeMismatch(f"map {name or '?'}: f must go from the source carrier to the target carrier")
        self.P = product_of_list(self.phi, self.Phi, source.nodes, target.nodes, verify=False)
        self.two_cell_residual = self.check_two_cell(samples, tol, seed)

    def __repr__(self):
        return f"NetworkMap({self.name or '?'}: {self.source.name or '?'} -> {self.target.name or '?'})"

    def two_cell_maps(self) -> tuple[SubmersionMap, SubmersionMap]:
        """``(psi o f, P(phi, Phi) o nu)``."""
        left = compose_maps(self.target.wiring, self.f, verify=False)
        right = compose_maps(self.P, self.source.wiring, verify=False)
        return left, right

    def check_two_cell(self, samples: int = SQUARE_SAMPLES, tol: float = SQUARE_TOL,
                       seed: int = 0) -> float:
        left, right = self.two_cell_maps()
        ns = self.f.source.state_dim

        def residual(q):
            a = np.asarray(left.tot_fn(q)) - np.asarray(right.tot_fn(q))
            b = np.asarray(left.st_fn(q[:ns])) - np.asarray(right.st_fn(q[:ns]))
            return float(max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0)))

        worst = 0.0
        for _, r in sample_evaluate(residual, self.f.source.total_dim, samples, seed):
            if isinstance(r, Exception):
                continue
            worst = max(worst, r) if not np.isnan(r) else np.inf
        if not worst <= tol:
            raise TwoCellViolation(
                f"map {self.name or '?'}: psi o f != P(phi,Phi) o nu (residual {worst:.3g})"
            )
        return worst


def from_fibration(gmap: GraphMap, src: ManifoldNetwork, dst: ManifoldNetwork,
                   name: str = "") -> NetworkMap:
    """Map of networks induced by a graph fibration ``src.graph -> dst.graph``.

    The result goes from the network of `dst` to the network of `src`; its
    components permute input blocks along the in-edge bijections.
    """
    g, h = src.graph, dst.graph
    failures = fibration_failures(gmap, g, h)
    if failures:
        raise NotAFibration(failures)
    for a, b in enumerate(gmap.vertex_map):
        if not src.phases[a].same_manifold(dst.phases[b]):
            raise PhaseMismatch(
                f"phase of vertex {a} ({src.phases[a].name}) differs from phase of its image {b} "
                f"({dst.phases[b].name})"
            )
    tau_net = from_graph(src, name="G")
    mu_net = from_graph(dst, name="G'")
    g_in, h_in = g.in_edges(), h.in_edges()
    Phi = []
    for a, b in enumerate(gmap.vertex_map):
        I_a, I_b = tau_net.nodes[a], mu_net.nodes[b]
        st = [Var(c) for c in dst.phases[b].coords]
        tot = list(st)
        for e in g_in[a]:
            k = h_in[b].index(gmap.edge_map[e])
            s2 = h.source(gmap.edge_map[e])
            tot.extend(Var(f"in{k}.{c}") for c in dst.phases[s2].coords)
        Phi.append(SubmersionMap(I_b, I_a, tot, st, name=f"Phi({a})", verify=False))
    f_exprs = [Var(f"n{b}.{c}") for b in gmap.vertex_map for c in dst.phases[b].coords]
    f = SubmersionMap(mu_net.carrier, tau_net.carrier, f_exprs, f_exprs, name="P(phi)")
    return NetworkMap(mu_net, tau_net, gmap.vertex_map, Phi, f, name=name or "fibration")


def _permutation_inverse(m: SubmersionMap) -> tuple[dict[str, el.Expr], list[int]]:
    """For a coordinate permutation `m`, the substitution undoing f_tot and the st permutation."""
    src_tot, dst_tot = m.source.total_coords, m.target.total_coords
    if len(src_tot) != len(dst_tot):
        raise NetworkError(f"{m!r} is not invertible (dimensions differ)")
    inv: dict[str, el.Expr] = {}
    for k, e in enumerate(m.tot):
        if not isinstance(e, Var) or e.name in inv:
            raise NetworkError(f"{m!r} is not a coordinate permutation")
        inv[e.name] = Var(dst_tot[k])
    perm = []
    src_st = list(m.source.state_coords)
    for e in m.st:
        if not isinstance(e, Var):
            raise NetworkError(f"{m!r} is not a coordinate permutation on states")
        perm.append(src_st.index(e.name))
    return inv, perm


def induced_family(nmap: NetworkMap, G: Sequence[OpenSystem]) -> list[OpenSystem]:
    """``F_x = T(Phi_x)_st o G_{phi(x)} o (Phi_x)_tot^{-1}`` for permutation components.

    This is the unique family Phi-related to `G` when every component is an
    isomorphism given by a coordinate permutation (e.g. maps from fibrations).
    """
    out = []
    for x, (y, m) in enumerate(zip(nmap.phi, nmap.Phi)):
        inv, perm = _permutation_inverse(m)
        Gy = G[y]
        field = [el.substitute(Gy.field[j], inv) for j in perm]
        out.append(OpenSystem(m.target, field, name=f"{Gy.name or 'G'}@{x}"))
    return out


def verify_theorem(nmap: NetworkMap, G: Sequence[OpenSystem], F: Sequence[OpenSystem],
                   samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                   seed: int = 0) -> RelatednessReport:
    """Check that ``compose(source, G)`` and ``compose(target, F)`` are f-related.

    The node families must be Phi-related; otherwise HypothesisFailure is
    raised.  A negative verdict with the hypothesis satisfied is returned,
    not raised, so the caller sees the residual.
    """
    hyp = check_phi_related_family(nmap.phi, nmap.Phi, G, F, samples, tol, seed)
    if not hyp.verdict:
        raise HypothesisFailure(hyp)
    v = compose(nmap.source, G)
    u = compose(nmap.target, F)
    rep = check_related(nmap.f, v, u, samples, tol, seed, label="carrier")
    rep.components = [hyp]
    return rep
