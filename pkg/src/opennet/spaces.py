"""Coordinate spaces, trivial product submersions and maps between them.

A manifold is modelled as R^dim with global coordinates.  A submersion
is a product ``(state factors) x (input factors) -> (state factors)``;
its total coordinates are the state coordinates followed by the input
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprlang as el
from .exprlang import Expr, Var

__all__ = [
    "Space", "Submersion", "SubmersionMap", "Interconnection",
    "SpaceError", "ShapeMismatch", "SquareViolation", "NotAnInterconnection",
    "product_submersion", "identity_submersion", "compose_maps", "identity_map",
    "sample_points", "DEFAULT_BOX", "SQUARE_SAMPLES", "SQUARE_TOL",
]

DEFAULT_BOX = 2.0
SQUARE_SAMPLES = 100
SQUARE_TOL = 1e-9
MAX_RETRIES = 10


class SpaceError(ValueError):
    pass


class ShapeMismatch(SpaceError):
    pass


class SquareViolation(SpaceError):
    pass


class NotAnInterconnection(SpaceError):
    pass


@dataclass(frozen=True)
class Space:
    """R^dim with named coordinates.  `name` identifies the manifold."""

    name: str
    coords: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(set(self.coords)) != len(self.coords):
            raise SpaceError(f"space {self.name!r} has repeated coordinate names")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def renamed(self, prefix: str = "", coords: Sequence[str] | None = None) -> "Space":
        if coords is not None:
            if len(coords) != self.dim:
                raise ShapeMismatch(
                    f"space {self.name!r} has dim {self.dim}, got {len(coords)} coordinate names"
                )
            return Space(self.name, tuple(coords))
        return Space(self.name, tuple(prefix + c for c in self.coords))

    def same_manifold(self, other: "Space") -> bool:
        return self.name == other.name and self.dim == other.dim


@dataclass(frozen=True)
class Submersion:
    state: tuple[Space, ...]
    inputs: tuple[Space, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "state", tuple(self.state))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        names = self.total_coords
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SpaceError(f"submersion {self.name or '?'} has duplicate coordinates {dup}")

    @property
    def state_coords(self) -> tuple[str, ...]:
        return tuple(c for s in self.state for c in s.coords)

    @property
    def input_coords(self) -> tuple[str, ...]:
        return tuple(c for s in self.inputs for c in s.coords)

    @property
    def total_coords(self) -> tuple[str, ...]:
        return self.state_coords + self.input_coords

    @property
    def state_dim(self) -> int:
        return sum(s.dim for s in self.state)

    @property
    def input_dim(self) -> int:
        return sum(s.dim for s in self.inputs)

    @property
    def total_dim(self) -> int:
        return self.state_dim + self.input_dim

    def prefixed(self, prefix: str) -> "Submersion":
        return Submersion(
            tuple(s.renamed(prefix) for s in self.state),
            tuple(s.renamed(prefix) for s in self.inputs),
            name=self.name,
        )

    def describe(self) -> str:
        st = " x ".join(s.name for s in self.state) or "pt"
        if not self.inputs:
            return f"id: {st} -> {st}"
        inp = " x ".join(s.name for s in self.inputs)
        return f"{st} x {inp} -> {st}"


def identity_submersion(*spaces: Space, name: str = "") -> Submersion:
    return Submersion(tuple(spaces), (), name=name)


def product_submersion(subs: Sequence[Submersion]) -> Submersion:
    """Product of submersions; coordinates of factor i get the prefix ``n{i}.``.

    States of all factors come first, then inputs, each in list order.
    An empty list gives the one-point submersion.
    """
    state: list[Space] = []
    inputs: list[Space] = []
    for i, s in enumerate(subs):
        p = s.prefixed(f"n{i}.")
        state.extend(p.state)
        inputs.extend(p.inputs)
    return Submersion(tuple(state), tuple(inputs), name="x".join(s.name or "?" for s in subs))


def block_names(sub: Submersion, i: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """State and input coordinate names of factor `i` inside a product."""
    p = sub.prefixed(f"n{i}.")
    return p.state_coords, p.input_coords


# ---------------------------------------------------------------------------
# sampling

def sample_points(dim: int, n: int, seed: int = 0, box: float = DEFAULT_BOX) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(n, dim))


def sample_evaluate(fn, dim: int, n: int, seed: int = 0, box: float = DEFAULT_BOX):
    """Evaluate ``fn(point)`` at `n` random points, re-drawing on EvalError.

    Yields ``(point, value)``; a point whose ``MAX_RETRIES`` redraws all fail
    is yielded as ``(point, exc)``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(n):
        exc = None
        for _attempt in range(MAX_RETRIES + 1):
            q = rng.uniform(-box, box, size=dim)
            try:
                yield q, fn(q)
                break
            except el.EvalError as e:
                exc = e
        else:
            yield q, exc


# ---------------------------------------------------------------------------
# maps

def _parse_all(exprs, variables):
    out = []
    for e in exprs:
        if isinstance(e, str):
            e = el.parse(e, variables)
        out.append(e)
    return tuple(out)


class SubmersionMap:
    """Morphism of submersions ``(f_tot, f_st)`` given by expression vectors.

    The commuting square ``p' o f_tot = f_st o p`` is checked numerically
    at construction unless ``verify=False``.
    """

    def __init__(self, source: Submersion, target: Submersion,
                 tot: Sequence[Expr | str], st: Sequence[Expr | str] | None = None,
                 name: str = "", verify: bool = True, seed: int = 0):
        self.source = source
        self.target = target
        self.name = name
        self.tot = _parse_all(tot, source.total_coords)
        if st is None:
            st = self.tot[: target.state_dim]
            bad = set().union(*(el.free_vars(e) for e in st)) - set(source.state_coords) if st else set()
            if bad:
                raise SquareViolation(
                    f"map {name or '?'}: state components depend on input coordinates {sorted(bad)}"
                )
        self.st = _parse_all(st, source.state_coords)
        if len(self.tot) != target.total_dim:
            raise ShapeMismatch(
                f"map {name or '?'}: tot has {len(self.tot)} components, target total dim is {target.total_dim}"
            )
        if len(self.st) != target.state_dim:
            raise ShapeMismatch(
                f"map {name or '?'}: st has {len(self.st)} components, target state dim is {target.state_dim}"
            )
        for e in self.st:
            extra = el.free_vars(e) - set(source.state_coords)
            if extra:
                raise el.UnknownIdentifier(sorted(extra)[0], 0, el.to_str(e))
        for e in self.tot:
            extra = el.free_vars(e) - set(source.total_coords)
            if extra:
                raise el.UnknownIdentifier(sorted(extra)[0], 0, el.to_str(e))
        self._tot_fn = None
        self._st_fn = None
        if verify:
            self.verify_square(seed=seed)

    def __repr__(self):
        return f"SubmersionMap({self.name or '?'}: {self.source.describe()} => {self.target.describe()})"

    @property
    def tot_fn(self):
        if self._tot_fn is None:
            self._tot_fn = el.compile_vector(self.tot, self.source.total_coords)
        return self._tot_fn

    @property
    def st_fn(self):
        if self._st_fn is None:
            self._st_fn = el.compile_vector(self.st, self.source.state_coords)
        return self._st_fn

    def square_residual(self, q) -> float:
        t = self.tot_fn(q)[: self.target.state_dim]
        s = self.st_fn(q[: self.source.state_dim])
        return max((abs(a - b) for a, b in zip(t, s)), default=0.0)

    def verify_square(self, samples: int = SQUARE_SAMPLES, tol: float = SQUARE_TOL,
                      seed: int = 0) -> float:
        worst = 0.0
        for q, r in sample_evaluate(self.square_residual, self.source.total_dim, samples, seed):
            if isinstance(r, Exception):
                continue
            worst = max(worst, r)
        if not worst <= tol:
            raise SquareViolation(
                f"map {self.name or '?'}: p o f_tot != f_st o p (residual {worst:.3g})"
            )
        return worst

    @property
    def is_interconnection(self) -> bool:
        src = self.source.state_coords
        if self.target.state_dim != len(src):
            return False
        want = tuple(Var(c) for c in src)
        return self.st == want and self.tot[: len(src)] == want


class Interconnection(SubmersionMap):
    """Submersion map whose state part is the identity (checked syntactically)."""

    def __init__(self, source: Submersion, target: Submersion,
                 tot: Sequence[Expr | str] | None = None, inputs: Sequence[Expr | str] | None = None,
                 name: str = "", verify: bool = True, seed: int = 0):
        if source.state_dim != target.state_dim:
            raise NotAnInterconnection(
                f"interconnection {name or '?'}: state dims differ "
                f"({source.state_dim} vs {target.state_dim})"
            )
        ident = tuple(Var(c) for c in source.state_coords)
        if tot is None:
            if inputs is None:
                raise TypeError("give either tot or inputs")
            tot = ident + _parse_all(inputs, source.total_coords)
        super().__init__(source, target, tot, ident, name=name, verify=False)
        if self.tot[: len(ident)] != ident:
            raise NotAnInterconnection(
                f"interconnection {name or '?'}: state components of f_tot must be the source "
                f"state coordinates {list(source.state_coords)} in order "
                "(only identity state maps are supported)"
            )
        if verify:
            self.verify_square(seed=seed)

    @classmethod
    def from_map(cls, m: SubmersionMap) -> "Interconnection":
        if not m.is_interconnection:
            raise NotAnInterconnection(f"map {m.name or '?'} does not have identity state part")
        return cls(m.source, m.target, tot=m.tot, name=m.name, verify=False)


def identity_map(sub: Submersion) -> Interconnection:
    return Interconnection(sub, sub, tot=tuple(Var(c) for c in sub.total_coords),
                           name="id", verify=False)


def compose_maps(g: SubmersionMap, f: SubmersionMap, verify: bool = True) -> SubmersionMap:
    """``g o f`` by symbolic substitution."""
    if f.target != g.source:
        raise ShapeMismatch(
            f"cannot compose {g!r} after {f!r}: target of first is not source of second"
        )
    tot_sub = dict(zip(f.target.total_coords, f.tot))
    st_sub = dict(zip(f.target.state_coords, f.st))
    tot = [el.substitute(e, tot_sub) for e in g.tot]
    st = [el.substitute(e, st_sub) for e in g.st]
    name = f"{g.name or '?'}.{f.name or '?'}"
    if isinstance(g, Interconnection) and isinstance(f, Interconnection):
        return Interconnection(f.source, g.target, tot=tot, name=name, verify=verify)
    return SubmersionMap(f.source, g.target, tot, st, name=name, verify=verify)
