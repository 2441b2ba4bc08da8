"""Generators and independent oracles shared by the test modules."""

from __future__ import annotations

import itertools
import random

import numpy as np

from opennet import exprlang as el
from opennet.exprlang import Binary, Const, Unary, Var
from opennet.graph import Graph, GraphMap
from opennet.network import Network, NetworkMap
from opennet.opensys import OpenSystem
from opennet.spaces import Interconnection, Space, Submersion, SubmersionMap, product_submersion

# ---------------------------------------------------------------------------
# expressions


def random_expr(rng: random.Random, variables, depth: int) -> el.Expr:
    """Random expression that is smooth and finite on [-2, 2]^n.

    Singular operations are guarded: denominators and sqrt arguments are
    ``1 + e^2``, exp only sees bounded arguments and exponents are 2 or 3.
    """
    if depth <= 1 or rng.random() < 0.15:
        if rng.random() < 0.7:
            return Var(rng.choice(variables))
        return Const(round(rng.uniform(-2, 2), 2))
    d = depth - 1
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "neg", "sin", "cos", "tanh", "exp", "sqrt"])
    sub = lambda: random_expr(rng, variables, d)  # noqa: E731
    if kind in ("add", "sub", "mul"):
        return Binary({"add": "+", "sub": "-", "mul": "*"}[kind], sub(), sub())
    if kind == "div":
        den = Binary("+", Const(1.0), Binary("^", sub(), Const(2.0)))
        return Binary("/", sub(), den)
    if kind == "pow":
        return Binary("^", sub(), Const(float(rng.choice([2, 3]))))
    if kind == "neg":
        return Unary("neg", sub())
    if kind == "exp":
        return Unary("exp", Unary(rng.choice(["sin", "tanh"]), sub()))
    if kind == "sqrt":
        return Unary("sqrt", Binary("+", Const(1.0), Binary("^", sub(), Const(2.0))))
    return Unary(kind, sub())


def central_fd(e: el.Expr, v: str, env: dict, h: float = 1e-6) -> float:
    lo, hi = dict(env), dict(env)
    lo[v] -= h
    hi[v] += h
    return (el.evaluate(e, hi) - el.evaluate(e, lo)) / (2 * h)


def random_polynomial(rng: random.Random, variables, terms: int = 3, degree: int = 2) -> str:
    """A sum of random monomials as an expression string."""
    parts = []
    for _ in range(rng.randint(1, terms)):
        c = round(rng.uniform(-1, 1), 3)
        mono = [rng.choice(variables) for _ in range(rng.randint(0, degree))] if variables else []
        parts.append("*".join([f"({c})"] + mono))
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# graphs


def lift_count_oracle(vertex_map, edge_map, g: Graph, h: Graph) -> bool:
    """Fibration test by counting lifts: every in-edge of every image vertex has exactly one lift."""
    for a in range(g.vertex_count):
        b = vertex_map[a]
        for e2, (_, t2) in enumerate(h.edges):
            if t2 != b:
                continue
            lifts = sum(1 for e, (_, t) in enumerate(g.edges) if t == a and edge_map[e] == e2)
            if lifts != 1:
                return False
    return True


def all_graph_maps(g: Graph, h: Graph):
    """Every incidence-preserving map g -> h: all vertex maps, then every edge choice with matching endpoints."""
    for vm in itertools.product(range(h.vertex_count), repeat=g.vertex_count):
        cands = [[j for j, e in enumerate(h.edges) if e == (vm[s], vm[t])] for s, t in g.edges]
        for em in itertools.product(*cands):
            yield GraphMap(vm, em)


def canonical_graphs(max_vertices: int, max_edges: int) -> list[Graph]:
    """One representative per isomorphism class (edges sorted, vertices relabelled minimally)."""
    seen = set()
    out = []
    for n in range(max_vertices + 1):
        pairs = [(s, t) for s in range(n) for t in range(n)]
        for m in range(max_edges + 1):
            if n == 0 and m > 0:
                continue
            for edges in itertools.combinations_with_replacement(pairs, m):
                key = min(tuple(sorted((p[s], p[t]) for s, t in edges))
                          for p in itertools.permutations(range(n)))
                if (n, key) not in seen:
                    seen.add((n, key))
                    out.append(Graph(n, key))
    return out


# ---------------------------------------------------------------------------
# linear relations


def span_compose_oracle(S_basis, R_basis, dz: int, dy: int):
    """Composite S o R from spanning sets: solve S_y a = R_y b, keep (S_z a, R_x b)."""
    S_basis = np.asarray(S_basis)
    R_basis = np.asarray(R_basis)
    Sz, Sy = S_basis[:dz], S_basis[dz:]
    Ry, Rx = R_basis[:dy], R_basis[dy:]
    M = np.hstack([Sy, -Ry])
    if M.shape[1] == 0:
        return np.zeros((dz + Rx.shape[0], 0))
    if M.shape[0] == 0:
        K = np.eye(M.shape[1])
    else:
        _, s, vt = np.linalg.svd(M)
        r = int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0
        K = vt[r:].T
    a, b = K[: Sy.shape[1]], K[Sy.shape[1]:]
    return np.vstack([Sz @ a, Rx @ b])


def random_subspace(rng: np.random.Generator, n: int, k: int | None = None, integer: bool = False):
    if k is None:
        k = int(rng.integers(0, n + 1))
    if integer:
        return rng.integers(-1, 2, size=(n, k)).astype(float)
    return rng.standard_normal((n, k))


# ---------------------------------------------------------------------------
# random networks with identity components


def _sub(state_dim: int, input_dim: int, name: str) -> Submersion:
    state = tuple(Space("S", (f"s{k}",)) for k in range(state_dim))
    inputs = tuple(Space("U", (f"u{k}",)) for k in range(input_dim))
    return Submersion(state, inputs, name=name)


def random_identity_map_instance(seed: int):
    """A random network map with surjective index map and identity components.

    Returns ``(nmap, G, F)`` with ``F[x] = G[phi[x]]``, so the node families
    are related by construction.
    """
    rng = random.Random(seed)
    ny = rng.randint(1, 2)
    nx = rng.randint(ny, 3)
    phi = list(range(ny)) + [rng.randrange(ny) for _ in range(nx - ny)]
    rng.shuffle(phi)
    mu = [_sub(rng.randint(1, 2), rng.randint(0, 2), f"mu{y}") for y in range(ny)]
    tau = [mu[y] for y in phi]
    extra = rng.randint(0, 1)

    c_state = [Space("S", (f"c{y}_{k}",)) for y in range(ny) for k in range(mu[y].state_dim)]
    b_state = [Space("S", (f"b{x}_{k}",)) for x in range(nx) for k in range(tau[x].state_dim)]
    ext = [Space("E", (f"e{k}",)) for k in range(extra)]
    c = Submersion(tuple(c_state), tuple(ext), name="c")
    b = Submersion(tuple(b_state), tuple(ext), name="b")

    # source wiring: random polynomials in the carrier coordinates
    nu_inputs = {y: [random_polynomial(rng, list(c.total_coords)) for _ in range(mu[y].input_dim)]
                 for y in range(ny)}
    nu = Interconnection(c, product_submersion(mu),
                         inputs=[s for y in range(ny) for s in nu_inputs[y]], name="nu")
    # target wiring: same polynomials with each c{y}_k read from some x over y
    fibre = {y: [x for x in range(nx) if phi[x] == y] for y in range(ny)}
    psi_inputs = []
    for x in range(nx):
        y = phi[x]
        for s in nu_inputs[y]:
            e = el.parse(s, c.total_coords)
            ren = {f"c{yy}_{k}": Var(f"b{rng.choice(fibre[yy])}_{k}")
                   for yy in range(ny) for k in range(mu[yy].state_dim)}
            psi_inputs.append(el.substitute(e, ren))
    psi = Interconnection(b, product_submersion(tau), inputs=psi_inputs, name="psi")
    source = Network(mu, c, nu, name="src")
    target = Network(tau, b, psi, name="dst")

    f_exprs = [f"c{phi[x]}_{k}" for x in range(nx) for k in range(tau[x].state_dim)]
    f_exprs += [f"e{k}" for k in range(extra)]
    f = SubmersionMap(c, b, f_exprs, name="f")
    Phi = [SubmersionMap(mu[phi[x]], tau[x], list(tau[x].total_coords), name=f"id{x}") for x in range(nx)]
    nmap = NetworkMap(source, target, phi, Phi, f, name=f"random{seed}")

    G = []
    for y in range(ny):
        coords = list(mu[y].total_coords)
        field = [random_polynomial(rng, coords, terms=3, degree=3) for _ in range(mu[y].state_dim)]
        G.append(OpenSystem(mu[y], field, name=f"G{y}"))
    F = [OpenSystem(tau[x], G[phi[x]].field, name=f"F{x}") for x in range(nx)]
    return nmap, G, F
