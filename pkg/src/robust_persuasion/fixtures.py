"""Built-in two-state instances used by the CLI and the test-suite.

State order is ``(w0, w1)`` so a two-state belief ``(1 - p, p)`` puts mass
``p`` on ``w1``.

``example1``
    Prior ``p = 0.3``.  The receiver gets 1 from ``a0`` in ``w0`` and ``t``
    from ``a1`` in ``w1`` (``t = 1`` at the reference); the sender gets 1
    whenever ``a1`` is played.  Its box lets only ``t`` move, over
    ``[1 - delta, 1 + delta]`` (half-width convention).

``example2``
    Prior ``p = 0.1`` and four actions whose receiver payoffs are
    ``a1 = (1, 0)``, ``a2 = (0.9, 0.3)``, ``a3 = (0.8, 0.6)``,
    ``a4 = (0.5, 0.7)``; sender payoffs are 0, 1, 0, 0.5.  Its box moves
    only the ``a2`` row, by ``+-delta/2`` (interval length ``delta``).
"""

from __future__ import annotations

import numpy as np

from .core import PersuasionInstance, ReceiverType, UtilityBox


def example1() -> PersuasionInstance:
    return PersuasionInstance(
        state_labels=("w0", "w1"),
        action_labels=("a0", "a1"),
        prior=np.array([0.7, 0.3]),
        receiver_u=np.array([[1.0, 0.0], [0.0, 1.0]]),
        sender_v=np.array([[0.0, 0.0], [1.0, 1.0]]),
    )


def example1_box(delta: float, clip: bool = False) -> UtilityBox:
    """Box with ``t`` in ``[1 - delta, 1 + delta]`` and every other entry fixed.

    The default leaves ``t`` unclipped, as the example does; ``clip=True``
    caps the upper end at 1.
    """
    inst = example1()
    lo = inst.receiver_u.copy()
    hi = inst.receiver_u.copy()
    lo[1, 1] -= delta
    hi[1, 1] += delta
    return UtilityBox.from_bounds(inst, lo, hi, clip=clip)


def example1_type(t: float) -> ReceiverType:
    inst = example1()
    u = inst.receiver_u.copy()
    u[1, 1] = t
    return inst.type_with(u)


def example2() -> PersuasionInstance:
    return PersuasionInstance(
        state_labels=("w0", "w1"),
        action_labels=("a1", "a2", "a3", "a4"),
        prior=np.array([0.9, 0.1]),
        receiver_u=np.array([[1.0, 0.0], [0.9, 0.3], [0.8, 0.6], [0.5, 0.7]]),
        sender_v=np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [0.5, 0.5]]),
    )


def example2_box(delta: float, clip: bool = True) -> UtilityBox:
    """Box moving only the ``a2`` row, each entry over an interval of length ``delta``."""
    inst = example2()
    lo = inst.receiver_u.copy()
    hi = inst.receiver_u.copy()
    lo[1] -= delta / 2
    hi[1] += delta / 2
    return UtilityBox.from_bounds(inst, lo, hi, clip=clip)


def example2_perturbed(shift: float = 0.05) -> ReceiverType:
    """Example 2 with both ``a2`` payoffs lowered by ``shift``; ``a2`` is then never a best reply."""
    inst = example2()
    u = inst.receiver_u.copy()
    u[1] -= shift
    return inst.type_with(u)


BUILTIN = {"example1": example1, "example2": example2}
