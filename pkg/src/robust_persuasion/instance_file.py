"""YAML instance files with line-precise validation errors.

Schema::

    states: [w0, w1]                 # N >= 2 unique labels
    actions: [a0, a1]                # M >= 1 unique labels
    prior: [0.7, 0.3]                # full support, sums to 1
    receiver_u:                      # M rows of N entries in [0, 1]
      - [1.0, 0.0]
      - [0.0, 1.0]
    sender_v:                        # same shape and range
      - [0.0, 0.0]
      - [1.0, 1.0]
    box:                             # optional, one of:
      delta: 0.1                     #   intervals of length delta around u
      # half_width: 0.1              #   intervals [u - w, u + w]
      # lo: [[...]]  hi: [[...]]     #   explicit bounds
      clip: true                     # clip bounds to [0, 1] (default true)
    tolerances:                      # optional overrides, e.g.
      tie: 1.0e-9
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .core import DEFAULT_TOL, PersuasionInstance, Tolerances, UtilityBox
from .errors import InstanceFileError, InvalidInputError

_TOP_KEYS = {"states", "actions", "prior", "receiver_u", "sender_v", "box", "tolerances"}
_REQUIRED = ("states", "actions", "prior", "receiver_u", "sender_v")


@dataclass(frozen=True, eq=False)
class LoadedInstance:
    instance: PersuasionInstance
    box: UtilityBox | None
    path: str | None = None


class _Reader:
    def __init__(self, path: str | None):
        self.path = path

    def fail(self, node: yaml.Node | None, message: str) -> InstanceFileError:
        line = None if node is None else node.start_mark.line + 1
        return InstanceFileError(message, line, self.path)

    def mapping(self, node: yaml.Node, what: str) -> dict[str, tuple[yaml.Node, yaml.Node]]:
        if not isinstance(node, yaml.MappingNode):
            raise self.fail(node, f"{what} must be a mapping")
        out: dict[str, tuple[yaml.Node, yaml.Node]] = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                raise self.fail(k, f"keys of {what} must be plain names")
            if k.value in out:
                raise self.fail(k, f"duplicate key {k.value!r} in {what}")
            out[k.value] = (k, v)
        return out

    def number(self, node: yaml.Node, what: str) -> float:
        if not isinstance(node, yaml.ScalarNode):
            raise self.fail(node, f"{what} must be a number")
        try:
            x = float(node.value)
        except ValueError:
            raise self.fail(node, f"{what} must be a number, got {node.value!r}") from None
        if not np.isfinite(x):
            raise self.fail(node, f"{what} must be finite")
        return x

    def boolean(self, node: yaml.Node, what: str) -> bool:
        value = yaml.safe_load(yaml.serialize(node))
        if not isinstance(value, bool):
            raise self.fail(node, f"{what} must be true or false")
        return value

    def labels(self, node: yaml.Node, what: str, minimum: int) -> tuple[str, ...]:
        if not isinstance(node, yaml.SequenceNode):
            raise self.fail(node, f"{what} must be a list")
        out = []
        for item in node.value:
            if not isinstance(item, yaml.ScalarNode) or item.value == "":
                raise self.fail(item, f"entries of {what} must be nonempty labels")
            if item.value in out:
                raise self.fail(item, f"duplicate label {item.value!r} in {what}")
            out.append(item.value)
        if len(out) < minimum:
            raise self.fail(node, f"{what} needs at least {minimum} entries")
        return tuple(out)

    def vector(self, node: yaml.Node, what: str, length: int, lo: float | None = None,
               hi: float | None = None) -> np.ndarray:
        if not isinstance(node, yaml.SequenceNode):
            raise self.fail(node, f"{what} must be a list of numbers")
        if len(node.value) != length:
            raise self.fail(node, f"{what} must have {length} entries, got {len(node.value)}")
        vals = []
        for item in node.value:
            x = self.number(item, what)
            if (lo is not None and x < lo) or (hi is not None and x > hi):
                raise self.fail(item, f"{what} entry {x} outside [{lo}, {hi}]")
            vals.append(x)
        return np.array(vals)

    def matrix(self, node: yaml.Node, what: str, rows: int, cols: int, lo: float | None = None,
               hi: float | None = None) -> np.ndarray:
        if not isinstance(node, yaml.SequenceNode):
            raise self.fail(node, f"{what} must be a list of rows")
        if len(node.value) != rows:
            raise self.fail(node, f"{what} must have {rows} rows (one per action), got {len(node.value)}")
        return np.array([self.vector(r, f"{what} row {i}", cols, lo, hi) for i, r in enumerate(node.value)])


def loads_instance(text: str, path: str | None = None) -> LoadedInstance:
    reader = _Reader(path)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise InstanceFileError(f"not valid YAML: {getattr(exc, 'problem', exc)}",
                                None if mark is None else mark.line + 1, path) from None
    if root is None:
        raise InstanceFileError("file is empty", None, path)
    top = reader.mapping(root, "instance")
    for key, (knode, _) in top.items():
        if key not in _TOP_KEYS:
            raise reader.fail(knode, f"unknown field {key!r}")
    for key in _REQUIRED:
        if key not in top:
            raise reader.fail(root, f"missing required field {key!r}")

    tol = DEFAULT_TOL
    if "tolerances" in top:
        overrides = {}
        for key, (knode, vnode) in reader.mapping(top["tolerances"][1], "tolerances").items():
            if key not in Tolerances.__dataclass_fields__:
                raise reader.fail(knode, f"unknown tolerance {key!r}")
            x = reader.number(vnode, f"tolerance {key}")
            if x < 0:
                raise reader.fail(vnode, f"tolerance {key} must be nonnegative")
            overrides[key] = x
        tol = tol.replace(**overrides)

    states = reader.labels(top["states"][1], "states", 2)
    actions = reader.labels(top["actions"][1], "actions", 1)
    n, m = len(states), len(actions)
    prior_node = top["prior"][1]
    prior = reader.vector(prior_node, "prior", n, 0.0, 1.0)
    for item, x in zip(prior_node.value, prior):
        if x <= 0:
            raise reader.fail(item, "prior must give every state positive probability")
    if abs(prior.sum() - 1.0) > tol.sum:
        raise reader.fail(prior_node, f"prior sums to {prior.sum()!r}, not 1")
    u = reader.matrix(top["receiver_u"][1], "receiver_u", m, n, 0.0, 1.0)
    v = reader.matrix(top["sender_v"][1], "sender_v", m, n, 0.0, 1.0)
    try:
        instance = PersuasionInstance(states, actions, prior, u, v, tol)
    except InvalidInputError as exc:
        raise reader.fail(root, str(exc)) from None

    box = None
    if "box" in top:
        box = _read_box(reader, top["box"][1], instance)
    return LoadedInstance(instance, box, path)


def _read_box(reader: _Reader, node: yaml.Node, instance: PersuasionInstance) -> UtilityBox:
    fields = reader.mapping(node, "box")
    allowed = {"delta", "half_width", "lo", "hi", "clip"}
    for key, (knode, _) in fields.items():
        if key not in allowed:
            raise reader.fail(knode, f"unknown box field {key!r}")
    clip = reader.boolean(fields["clip"][1], "box clip") if "clip" in fields else True
    modes = [k for k in ("delta", "half_width", "lo") if k in fields]
    if len(modes) != 1 or ("lo" in fields) != ("hi" in fields):
        raise reader.fail(node, "box needs exactly one of: delta, half_width, or both lo and hi")
    try:
        if "delta" in fields:
            d = reader.number(fields["delta"][1], "box delta")
            if d < 0:
                raise reader.fail(fields["delta"][1], "box delta must be nonnegative")
            return UtilityBox.uniform(instance, d, clip)
        if "half_width" in fields:
            w = reader.number(fields["half_width"][1], "box half_width")
            if w < 0:
                raise reader.fail(fields["half_width"][1], "box half_width must be nonnegative")
            return UtilityBox.symmetric(instance, w, clip)
        m, n = instance.receiver_u.shape
        lo = reader.matrix(fields["lo"][1], "box lo", m, n)
        hi = reader.matrix(fields["hi"][1], "box hi", m, n)
        return UtilityBox.from_bounds(instance, lo, hi, clip)
    except InstanceFileError:
        raise
    except InvalidInputError as exc:
        raise reader.fail(node, str(exc)) from None


def load_instance(path: str | Path) -> LoadedInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceFileError(f"cannot read file: {exc.strerror}", None, str(path)) from None
    return loads_instance(text, str(path))


def _floats(a: np.ndarray) -> Any:
    return [float(x) for x in a] if a.ndim == 1 else [_floats(r) for r in a]


def dumps_instance(instance: PersuasionInstance, box: UtilityBox | None = None) -> str:
    """Serialise ``instance`` (and an optional box as explicit bounds) to YAML."""
    doc: dict[str, Any] = {
        "states": list(instance.state_labels),
        "actions": list(instance.action_labels),
        "prior": _floats(instance.prior),
        "receiver_u": _floats(instance.receiver_u),
        "sender_v": _floats(instance.sender_v),
    }
    if box is not None:
        doc["box"] = {"lo": _floats(box.lo), "hi": _floats(box.hi), "clip": False}
    if instance.tol != DEFAULT_TOL:
        doc["tolerances"] = {k: getattr(instance.tol, k) for k in Tolerances.__dataclass_fields__}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
