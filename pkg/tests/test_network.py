import math

import pytest
from hypothesis import given, settings, strategies as st

from opennet.graph import Graph, GraphMap, identity_graph_map
from opennet.network import (
    HypothesisFailure, ManifoldNetwork, Network, NetworkMap, NotAFibration, PhaseMismatch,
    TwoCellViolation, compose, from_fibration, from_graph, induced_family, product_of_list,
    verify_theorem,
)
from opennet.opensys import OpenSystem
from opennet.spaces import (
    Interconnection, ShapeMismatch, Space, Submersion, SubmersionMap, identity_map,
    identity_submersion, product_submersion, sample_points,
)

from helpers import random_identity_map_instance

M = Space("M", ("m",))
N = Space("N", ("n",))
U = Space("U", ("u",))
X = Space("X", ("x",))
R = Space("R", ("x",))


def _three_node_network(wiring_fn="tanh"):
    p = Submersion((M,), (U,), name="p")
    b = Submersion(tuple(Space("M", (f"m{i}",)) for i in (1, 2, 3)), name="b")
    wiring = Interconnection(b, product_submersion([p] * 3),
                             inputs=[f"{wiring_fn}(m2)", f"{wiring_fn}(m1)", f"{wiring_fn}(m2)"])
    return p, Network([p, p, p], b, wiring, name="three")


def test_two_node_network_composition():
    p1 = Submersion((M,), (N,))
    p2 = Submersion((N,), (M,))
    c = Submersion((M, N))
    wiring = Interconnection(c, product_submersion([p1, p2]), inputs=["n", "m"])
    net = Network([p1, p2], c, wiring, name="MN")
    F1 = OpenSystem(p1, ["n - m^2"])
    F2 = OpenSystem(p2, ["sin(m)*n"])
    v = compose(net, [F1, F2])
    for m, n in sample_points(2, 20, seed=3):
        assert v([m, n]) == [n - m * m, math.sin(m) * n]


def test_three_node_composition_matches_hand_expansion():
    p, net = _three_node_network()
    F = [OpenSystem(p, ["u - m"]), OpenSystem(p, ["m*u + cos(m)"]),
         OpenSystem(p, ["exp(-m^2)*u - 0.5*m"])]
    v = compose(net, F)
    assert v.is_closed
    for m1, m2, m3 in sample_points(3, 50, seed=7):
        want = [math.tanh(m2) - m1,
                m2 * math.tanh(m1) + math.cos(m2),
                math.exp(-m3 ** 2) * math.tanh(m2) - 0.5 * m3]
        got = v([m1, m2, m3])
        assert max(abs(a - b) for a, b in zip(got, want)) <= 1e-12


def test_compose_checks_node_count_and_types():
    p, net = _three_node_network()
    F = OpenSystem(p, ["u"])
    with pytest.raises(ShapeMismatch):
        compose(net, [F, F])
    other = OpenSystem(Submersion((N,), (U,)), ["u"])
    with pytest.raises(ShapeMismatch):
        compose(net, [F, F, other])


def test_network_rejects_wrong_wiring_target():
    p = Submersion((M,), (U,))
    c = identity_submersion(M)
    wiring = Interconnection(c, product_submersion([p]), inputs=["m"])
    with pytest.raises(ShapeMismatch):
        Network([p, p], c, wiring)


def test_loop_wiring_copies_state():
    mn = ManifoldNetwork(Graph(1, ((0, 0),)), (X,))
    net = from_graph(mn)
    assert net.nodes[0].total_coords == ("x", "in0.x")
    assert net.wiring.tot_fn([0.25]) == [0.25, 0.25]


def test_from_graph_three_vertices():
    g = Graph(3, ((0, 1), (1, 0), (1, 2)))
    net = from_graph(ManifoldNetwork(g, (X, X, X)))
    assert net.carrier.total_coords == ("n0.x", "n1.x", "n2.x")
    assert [n.input_dim for n in net.nodes] == [1, 1, 1]
    # input of node 0 reads vertex 1, node 1 reads vertex 0, node 2 reads vertex 1
    assert net.wiring.tot_fn([1.0, 2.0, 3.0]) == [1.0, 2.0, 3.0, 2.0, 1.0, 2.0]


def test_from_graph_dimension_audit():
    P = Space("P", ("p", "q"))
    g = Graph(3, ((0, 1), (2, 1), (1, 1), (0, 2)))
    net = from_graph(ManifoldNetwork(g, (X, P, X)))
    assert net.carrier.total_dim == 1 + 2 + 1
    assert [n.state_dim for n in net.nodes] == [1, 2, 1]
    # in-degree times source phase dimension
    assert [n.input_dim for n in net.nodes] == [0, 1 + 1 + 2, 1]


def test_from_graph_phase_count():
    with pytest.raises(PhaseMismatch):
        ManifoldNetwork(Graph(2, ()), (X,))


def test_empty_network():
    net = from_graph(ManifoldNetwork(Graph(0, ()), ()))
    v = compose(net, [])
    assert v.on.total_dim == 0 and v([]) == []


def test_product_of_list_parabola():
    p = Submersion((R,), (U,))
    Phi1 = SubmersionMap(p, p, ["x^2", "u"])
    Phi2 = SubmersionMap(p, p, ["x", "u^2"])
    P = product_of_list([0, 0], [Phi1, Phi2], [p])
    for x, u in sample_points(2, 20, seed=5):
        assert P.tot_fn([x, u]) == [x * x, x, u, u * u]


def test_product_of_list_diagonal():
    p = Submersion((R,), (U,))
    P = product_of_list([0, 0, 0], [identity_map(p)] * 3, [p])
    assert P.tot_fn([0.5, -1.0]) == [0.5, 0.5, 0.5, -1.0, -1.0, -1.0]


def test_product_of_list_empty():
    P = product_of_list([], [], [])
    assert P.source.total_dim == 0 and P.target.total_dim == 0


def test_product_of_list_checks_indices():
    p = Submersion((R,), (U,))
    with pytest.raises(ShapeMismatch):
        product_of_list([1], [identity_map(p)], [p])


# -- network maps ----------------------------------------------------------------

GRAPH3 = Graph(3, ((0, 1), (1, 0), (1, 2)))
LOOP = Graph(1, ((0, 0),))


def test_fibration_collapse_map():
    nmap = from_fibration(GraphMap((0, 0, 0), (0, 0, 0)), ManifoldNetwork(GRAPH3, (X, X, X)),
                          ManifoldNetwork(LOOP, (X,)))
    assert nmap.phi == (0, 0, 0)
    assert nmap.f.tot_fn([0.7]) == [0.7, 0.7, 0.7]
    assert nmap.two_cell_residual == 0.0


def test_fibration_identity():
    mn = ManifoldNetwork(GRAPH3, (X, X, X))
    nmap = from_fibration(identity_graph_map(GRAPH3), mn, mn)
    assert nmap.f.tot_fn([1.0, 2.0, 3.0]) == [1.0, 2.0, 3.0]


def test_fibration_two_loops_fold():
    two = Graph(2, ((0, 0), (1, 1)))
    nmap = from_fibration(GraphMap((0, 0), (0, 0)), ManifoldNetwork(two, (X, X)),
                          ManifoldNetwork(LOOP, (X,)))
    assert nmap.f.tot_fn([-0.4]) == [-0.4, -0.4]


def test_non_fibration_rejected():
    with pytest.raises(NotAFibration) as info:
        from_fibration(GraphMap((0,), ()), ManifoldNetwork(Graph(1, ()), (X,)),
                       ManifoldNetwork(LOOP, (X,)))
    assert info.value.failures[0]["unlifted_edges"] == [0]


def test_fibration_phase_mismatch():
    with pytest.raises(PhaseMismatch):
        from_fibration(GraphMap((0,), (0,)), ManifoldNetwork(LOOP, (Space("Y", ("y", "z")),)),
                       ManifoldNetwork(LOOP, (X,)))


def test_loop_collapse_theorem():
    nmap = from_fibration(GraphMap((0, 0, 0), (0, 0, 0)), ManifoldNetwork(GRAPH3, (X, X, X)),
                          ManifoldNetwork(LOOP, (X,)))
    w = OpenSystem(nmap.source.nodes[0], ["x - x^3 + 0.5*in0.x"])
    F = induced_family(nmap, [w])
    rep = verify_theorem(nmap, [w], F)
    assert rep.verdict and rep.max_residual <= 1e-9


def _sync_map(fn="sin"):
    p = Submersion((M,), (U,))
    c = identity_submersion(M)
    base = Network([p], c, Interconnection(c, product_submersion([p]), inputs=[f"{fn}(m)"]), name="base")
    b = Submersion(tuple(Space("M", (f"m{i}",)) for i in (1, 2, 3)))
    pair = Network([p] * 3, b, Interconnection(b, product_submersion([p] * 3),
                                                inputs=[f"{fn}(m2)", f"{fn}(m1)", f"{fn}(m2)"]))
    f = SubmersionMap(c, b, ["m", "m", "m"])
    return p, NetworkMap(base, pair, [0, 0, 0], [identity_map(p)] * 3, f, name="sync")


def test_synchrony_map_theorem():
    p, nmap = _sync_map()
    G = OpenSystem(p, ["-m + 1.5*u + 0.2*m*u"])
    rep = verify_theorem(nmap, [G], [G, G, G])
    assert rep.verdict and rep.max_residual <= 1e-9


def test_synchrony_is_exact():
    p, nmap = _sync_map()
    G = OpenSystem(p, ["-m + 1.5*u + 0.2*m*u"])
    v = compose(nmap.source, [G])
    u = compose(nmap.target, [G, G, G])
    for (m,) in sample_points(1, 50, seed=11):
        assert u([m, m, m]) == [v([m])[0]] * 3


def test_hypothesis_failure_raised():
    p, nmap = _sync_map()
    G = OpenSystem(p, ["-m + u"])
    H = OpenSystem(p, ["m + u"])
    with pytest.raises(HypothesisFailure) as info:
        verify_theorem(nmap, [G], [G, H, G])
    assert info.value.report.max_residual > 1e-9


def test_two_cell_violation():
    p = Submersion((M,), (U,))
    c = identity_submersion(M)
    base = Network([p], c, Interconnection(c, product_submersion([p]), inputs=["sin(m)"]))
    other = Network([p], c, Interconnection(c, product_submersion([p]), inputs=["cos(m)"]))
    with pytest.raises(TwoCellViolation):
        NetworkMap(base, other, [0], [identity_map(p)], identity_map(c))


def test_parabola_maps():
    p = Submersion((R,), (U,))
    c = identity_submersion(R)
    b = Submersion((Space("R", ("x1",)), Space("R", ("x2",))))
    base = Network([p], c, Interconnection(c, product_submersion([p]), inputs=["x"]))
    pair = Network([p, p], b, Interconnection(b, product_submersion([p, p]), inputs=["x2", "x1"]))
    nmap = NetworkMap(base, pair, [0, 0],
                      [SubmersionMap(p, p, ["x^2", "u"]), SubmersionMap(p, p, ["x", "u^2"])],
                      SubmersionMap(c, b, ["x^2", "x"]))
    for g in ("(x^2) + (u^2)", "1", "sin(x^2*u^2)"):
        G = OpenSystem(p, [f"0.5*x*({g})"])
        F1 = OpenSystem(p, [f"x*({g.replace('x^2', 'x')})"])
        F2 = OpenSystem(p, [f"0.5*x*({g.replace('u^2', 'u')})"])
        assert verify_theorem(nmap, [G], [F1, F2]).verdict


def test_parabola_with_extra_inputs():
    V = Space("V", ("v",))
    q = Submersion((R,), (U, V))
    c = Submersion((R,), (V,))
    b = Submersion((Space("R", ("x1",)), Space("R", ("x2",))), (Space("V", ("v1",)), Space("V", ("v2",))))
    base = Network([q], c, Interconnection(c, product_submersion([q]), inputs=["x", "v"]))
    pair = Network([q, q], b, Interconnection(b, product_submersion([q, q]), inputs=["x2", "v1", "x1", "v2"]))
    nmap = NetworkMap(base, pair, [0, 0],
                      [SubmersionMap(q, q, ["x^2", "u", "v"]), SubmersionMap(q, q, ["x", "u^2", "v"])],
                      SubmersionMap(c, b, ["x^2", "x", "v", "v"]))
    G = OpenSystem(q, ["0.5*x*(x^2 + u^2*v)"])
    F1 = OpenSystem(q, ["x*(x + u^2*v)"])
    F2 = OpenSystem(q, ["0.5*x*(x^2 + u*v)"])
    rep = verify_theorem(nmap, [G], [F1, F2])
    assert rep.verdict and rep.max_residual <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_related_families_give_related_networks(seed):
    nmap, G, F = random_identity_map_instance(seed)
    rep = verify_theorem(nmap, G, F, tol=1e-8, seed=seed % 1000)
    assert rep.verdict, rep.max_residual
