"""Plot-ready samples of the sender's indirect utility on two-state instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TypeLike, as_type, indirect_values
from .errors import InvalidInputError, UnsupportedDimensionError
from .solver import pool_arrays


@dataclass(frozen=True)
class CurveRow:
    p: float
    value: float
    action: int
    breakpoint: bool


def emit_indirect_utility_curve(instance: TypeLike, resolution: int = 101) -> list[CurveRow]:
    """Indirect value on a uniform grid over ``p = mu(w1)`` plus every interior region breakpoint.

    A breakpoint that coincides with a grid point appears once, flagged as a
    breakpoint.
    """
    rtype = as_type(instance)
    if rtype.n_states != 2:
        raise UnsupportedDimensionError(f"curves need exactly two states, got {rtype.n_states}")
    if resolution < 2:
        raise InvalidInputError("resolution must be at least 2")
    points, _, _ = pool_arrays(rtype)
    breaks = sorted(float(p) for p in points[:, 1] if 0.0 < p < 1.0)
    grid = np.linspace(0.0, 1.0, resolution)
    radius = rtype.tol.dedup
    ps = [(b, True) for b in breaks]
    ps += [(float(g), False) for g in grid if all(abs(g - b) > radius for b in breaks)]
    ps.sort()
    beliefs = np.array([[1.0 - p, p] for p, _ in ps])
    values, actions = indirect_values(rtype, beliefs)
    return [CurveRow(p, float(v), int(a), flag) for (p, flag), v, a in zip(ps, values, actions)]
