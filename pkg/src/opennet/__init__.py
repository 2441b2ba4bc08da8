"""Open dynamical systems on networks: composition, network maps and relatedness checks."""

__version__ = "0.1.0"

from .exprlang import parse, evaluate, diff, jacobian, to_str
from .spaces import (
    Space, Submersion, SubmersionMap, Interconnection,
    product_submersion, identity_submersion, compose_maps, identity_map,
)
from .opensys import OpenSystem, RelatednessReport, pullback, product_systems, check_related, check_phi_related_family
from .graph import Graph, GraphMap, is_fibration, enumerate_fibrations, in_neighborhood
from .network import (
    Network, NetworkMap, ManifoldNetwork, compose, from_graph, from_fibration,
    product_of_list, verify_theorem,
)
from .linrel import LinRelation, graph_of, compose_rel, odot, contains
from .sim import Trajectory, Monitor, integrate, monitor_invariance, push_trajectory
