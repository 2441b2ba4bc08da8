"""Open systems on submersions and the relatedness checks between them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import exprlang as el
from .exprlang import Expr
from .spaces import (
    Interconnection, ShapeMismatch, Submersion, SubmersionMap,
    product_submersion, sample_evaluate,
)

__all__ = [
    "OpenSystem", "RelatednessReport", "pullback", "product_systems",
    "check_related", "check_phi_related_family", "DEFAULT_SAMPLES", "DEFAULT_TOL",
]

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-9


class OpenSystem:
    """A map ``F: total space -> T(state space)``.

    ``field[i]`` is the velocity of state coordinate ``i`` and may depend on
    every total coordinate of `on`.
    """

    def __init__(self, on: Submersion, field: Sequence[Expr | str], name: str = ""):
        self.on = on
        self.name = name
        exprs = []
        for e in field:
            if isinstance(e, str):
                e = el.parse(e, on.total_coords)
            else:
                extra = el.free_vars(e) - set(on.total_coords)
                if extra:
                    raise el.UnknownIdentifier(sorted(extra)[0], 0, el.to_str(e))
            exprs.append(e)
        if len(exprs) != on.state_dim:
            raise ShapeMismatch(
                f"system {name or '?'}: field has {len(exprs)} components, state dim is {on.state_dim}"
            )
        self.field = tuple(exprs)
        self._fn = None

    def __repr__(self):
        return f"OpenSystem({self.name or '?'} on {self.on.describe()})"

    @property
    def fn(self):
        if self._fn is None:
            self._fn = el.compile_vector(self.field, self.on.total_coords)
        return self._fn

    def __call__(self, q) -> list[float]:
        return self.fn(q)

    @property
    def is_closed(self) -> bool:
        return self.on.input_dim == 0

    def field_strings(self) -> list[str]:
        return [el.to_str(e) for e in self.field]


def pullback(phi: Interconnection, F: OpenSystem) -> OpenSystem:
    """``phi* F = F o phi_tot`` (the state part of `phi` is the identity)."""
    if not isinstance(phi, Interconnection):
        phi = Interconnection.from_map(phi)
    if F.on != phi.target:
        raise ShapeMismatch(
            f"cannot pull back {F!r} along {phi!r}: system lives on {F.on.describe()}, "
            f"interconnection targets {phi.target.describe()}"
        )
    mapping = dict(zip(phi.target.total_coords, phi.tot))
    field = [el.substitute(e, mapping) for e in F.field]
    return OpenSystem(phi.source, field, name=f"{phi.name or '?'}*{F.name or '?'}")


def product_systems(systems: Sequence[OpenSystem]) -> OpenSystem:
    """Product system; block ``a`` is ``F_a`` applied to the a-th coordinate block."""
    prod = product_submersion([F.on for F in systems])
    field: list[Expr] = []
    for i, F in enumerate(systems):
        ren = {c: f"n{i}.{c}" for c in F.on.total_coords}
        field.extend(el.rename(e, ren) for e in F.field)
    return OpenSystem(prod, field, name="x".join(F.name or "?" for F in systems))


@dataclass
class RelatednessReport:
    max_residual: float
    samples: int
    verdict: bool
    worst_point: list[float]
    tol: float
    skipped: int = 0
    components: list["RelatednessReport"] = field(default_factory=list)
    label: str = ""

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "samples": self.samples,
            "skipped": self.skipped,
            "tol": self.tol,
            "worst_point": list(self.worst_point),
        }
        if self.components:
            d["components"] = [c.to_dict() for c in self.components]
        return d


def _jacobian_fn(f: SubmersionMap):
    jac = el.jacobian(f.st, f.source.state_coords)
    flat = [e for row in jac for e in row]
    fn = el.compile_vector(flat, f.source.state_coords)
    rows, cols = f.target.state_dim, f.source.state_dim

    def run(x):
        return np.asarray(fn(x), dtype=float).reshape(rows, cols)

    return run


def check_related(f: SubmersionMap, F: OpenSystem, G: OpenSystem,
                  samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                  seed: int = 0, label: str = "") -> RelatednessReport:
    """Sample ``r(q) = J(f_st)(p(q)) F(q) - G(f_tot(q))`` and compare to `tol`."""
    if F.on != f.source:
        raise ShapeMismatch(f"{F!r} does not live on the source of {f!r}")
    if G.on != f.target:
        raise ShapeMismatch(f"{G!r} does not live on the target of {f!r}")
    jac = _jacobian_fn(f)
    ns = f.source.state_dim
    tot = f.tot_fn

    def residual(q):
        lhs = jac(q[:ns]) @ np.asarray(F(q), dtype=float).reshape(ns)
        rhs = np.asarray(G(tot(q)), dtype=float)
        r = lhs - rhs
        return float(np.max(np.abs(r))) if r.size else 0.0

    worst = 0.0
    worst_q: list[float] = []
    count = skipped = 0
    for q, r in sample_evaluate(residual, f.source.total_dim, samples, seed):
        if isinstance(r, Exception):
            skipped += 1
            continue
        count += 1
        if np.isnan(worst):
            continue
        if np.isnan(r) or r > worst or not worst_q:
            worst = r
            worst_q = [float(v) for v in q]
    verdict = bool(worst <= tol) and not (count == 0 and skipped > 0)
    return RelatednessReport(float(worst), count, verdict, worst_q, tol, skipped, label=label)


def aggregate(reports: Sequence[RelatednessReport], tol: float, label: str = "") -> RelatednessReport:
    if not reports:
        return RelatednessReport(0.0, 0, True, [], tol, label=label)
    worst = max(reports, key=lambda r: (np.nan_to_num(r.max_residual, nan=np.inf)))
    return RelatednessReport(
        worst.max_residual,
        sum(r.samples for r in reports),
        all(r.verdict for r in reports),
        worst.worst_point,
        tol,
        sum(r.skipped for r in reports),
        components=list(reports),
        label=label,
    )


def check_phi_related_family(phi: Sequence[int], Phi: Sequence[SubmersionMap],
                             G: Sequence[OpenSystem] | Mapping[int, OpenSystem],
                             F: Sequence[OpenSystem],
                             samples: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
                             seed: int = 0) -> RelatednessReport:
    """Check that ``F[x]`` and ``G[phi[x]]`` are ``Phi[x]``-related for every x.

    `phi` maps X = range(len(phi)) to indices of `G`; ``Phi[x]`` goes from the
    submersion of ``G[phi[x]]`` to that of ``F[x]``.
    """
    if not (len(phi) == len(Phi) == len(F)):
        raise ShapeMismatch(
            f"family sizes disagree: |phi|={len(phi)}, |Phi|={len(Phi)}, |F|={len(F)}"
        )
    reports = []
    for x, y in enumerate(phi):
        reports.append(check_related(Phi[x], G[y], F[x], samples, tol, seed + x,
                                     label=f"Phi({x})"))
    return aggregate(reports, tol, label="family")
