import math

import numpy as np
import pytest

from opennet.network import Network, compose
from opennet.opensys import OpenSystem
from opennet.sim import (
    IntegrationError, Monitor, integrate, max_deviation, monitor_invariance, push_trajectory,
)
from opennet.spaces import (
    Interconnection, ShapeMismatch, Space, Submersion, SubmersionMap, identity_submersion,
    product_submersion,
)

R = Space("R", ("x",))
U = Space("U", ("u",))
P = Submersion((R,), (U,))
C = identity_submersion(R)
B = Submersion((Space("R", ("x1",)), Space("R", ("x2",))))


def _parabola_systems():
    base = Network([P], C, Interconnection(C, product_submersion([P]), inputs=["x"]))
    pair = Network([P, P], B, Interconnection(B, product_submersion([P, P]), inputs=["x2", "x1"]))
    G = OpenSystem(P, ["0.5*x*(x^2 + u^2)"])
    F1 = OpenSystem(P, ["x*(x + u^2)"])
    F2 = OpenSystem(P, ["0.5*x*(x^2 + u)"])
    return compose(base, [G]), compose(pair, [F1, F2])


def test_exponential_growth():
    tr = integrate(OpenSystem(C, ["x"]), [1.0], 1.0, 1e-3)
    assert abs(tr.final[0] - math.e) <= 1e-8
    assert len(tr) == 1001 and tr.times[-1] == 1.0


def test_zero_field_is_constant():
    tr = integrate(OpenSystem(C, ["0"]), [0.123456789], 2.0, 0.01)
    assert np.all(tr.states == 0.123456789)


def test_last_step_lands_on_t1():
    tr = integrate(OpenSystem(C, ["1"]), [0.0], 0.25, 0.1)
    assert list(tr.times) == [0.0, 0.1, 0.2, 0.25]
    assert abs(tr.final[0] - 0.25) <= 1e-15


def test_symmetric_nodes_stay_synchronous():
    # three identical nodes driven by sin of one another, started on the diagonal
    p = Submersion((Space("M", ("m",)),), (U,))
    b = Submersion(tuple(Space("M", (f"m{i}",)) for i in (1, 2, 3)))
    net = Network([p] * 3, b, Interconnection(b, product_submersion([p] * 3),
                                              inputs=["sin(m2)", "sin(m1)", "sin(m2)"]))
    G = OpenSystem(p, ["-m + 1.5*u + 0.2*m*u"])
    tr = integrate(compose(net, [G] * 3), [0.7, 0.7, 0.7], 1.0, 1e-3)
    mon = Monitor(["m1 - m2", "m2 - m3"], b.state_coords)
    assert monitor_invariance(tr, mon) == 0.0


def test_parabola_is_invariant_before_blowup():
    _, u = _parabola_systems()
    tr = integrate(u, [1.0, 1.0], 0.45, 1e-3)
    assert monitor_invariance(tr, Monitor(["x1 - x2^2"], ("x1", "x2"))) <= 1e-6


def test_parabola_matches_exact_solution():
    # on x1 = x2^2 the second coordinate solves x' = x^3, so x2 = 1/sqrt(1 - 2t)
    _, u = _parabola_systems()
    tr = integrate(u, [1.0, 1.0], 0.4, 1e-3)
    exact = 1.0 / np.sqrt(1.0 - 2.0 * tr.times)
    assert np.max(np.abs(tr.states[:, 1] - exact)) <= 1e-8
    assert np.max(np.abs(tr.states[:, 0] - exact ** 2)) <= 1e-7


def test_rk4_convergence_order():
    _, u = _parabola_systems()
    exact = 1.0 / math.sqrt(1.0 - 0.6)
    errs = [abs(integrate(u, [1.0, 1.0], 0.3, dt).final[1] - exact) for dt in (0.02, 0.01, 0.005)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.5, orders


def test_push_matches_target_trajectory():
    v, u = _parabola_systems()
    f = SubmersionMap(C, B, ["x^2", "x"])
    base = integrate(v, [1.0], 0.4, 1e-3)
    pushed = push_trajectory(f, base)
    target = integrate(u, [1.0, 1.0], 0.4, 1e-3)
    assert pushed.names == ("x1", "x2")
    assert max_deviation(pushed, target) <= 1e-7


def test_push_shape_checked():
    f = SubmersionMap(B, B, ["x1", "x2"])
    tr = integrate(OpenSystem(C, ["1"]), [0.0], 0.1, 0.05)
    with pytest.raises(ShapeMismatch):
        push_trajectory(f, tr)


def test_monitor_name_mismatch():
    tr = integrate(OpenSystem(C, ["1"]), [0.0], 0.1, 0.05)
    with pytest.raises(ShapeMismatch):
        monitor_invariance(tr, Monitor(["x1"], ("x1",)))


def test_csv_export(tmp_path):
    tr = integrate(OpenSystem(C, ["1"]), [0.0], 0.2, 0.1)
    path = tmp_path / "out.csv"
    text = tr.to_csv(path)
    assert path.read_text() == text
    lines = text.splitlines()
    assert lines[0] == "t,x"
    assert lines[1] == "0.0,0.0"
    assert len(lines) == 4


def test_open_system_refused():
    with pytest.raises(IntegrationError):
        integrate(OpenSystem(P, ["u"]), [0.0], 1.0, 0.1)


def test_bad_step_refused():
    with pytest.raises(IntegrationError):
        integrate(OpenSystem(C, ["x"]), [0.0], 1.0, 0.0)


def test_initial_state_shape():
    with pytest.raises(ShapeMismatch):
        integrate(OpenSystem(C, ["x"]), [0.0, 1.0], 1.0, 0.1)


def test_blowup_aborts():
    with pytest.raises(IntegrationError):
        integrate(OpenSystem(C, ["x^3"]), [10.0], 1.0, 0.1)


def test_evaluation_error_aborts():
    with pytest.raises(IntegrationError, match="evaluation failed"):
        # decays through zero, after which sqrt is out of domain
        integrate(OpenSystem(C, ["-sqrt(x)"]), [0.1], 2.0, 0.1)
