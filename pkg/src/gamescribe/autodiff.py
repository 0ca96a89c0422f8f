"""Reverse-mode automatic differentiation over dense real tensors.

Define-by-run: every operation appends a node holding its inputs and a
backward rule; backward() topologically sorts the nodes reachable from a
scalar loss and visits each exactly once in reverse order.  Gradients of
Parameters accumulate across calls until zeroed; gradients of intermediate
tensors are transient.

The recurrent cells (GRUCell, LSTMCell) are single fused nodes whose
forward/backward arithmetic lives in gamescribe.kernels, selected between a
numba jit and a pure numpy fallback by the GAMESCRIBE_BACKEND env var.

Cell gate conventions (weight packing, update orientation) are documented in
kernels/reference.py and in schema.md, so checkpoint files are portable.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import kernels

DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    pass


class Node:
    """One recorded operation: inputs, outputs, and a backward rule.

    backward_fn receives one gradient array per output (zeros when an output
    was not used downstream) and returns one gradient per input, or None for
    inputs that need no gradient.
    """

    __slots__ = ("inputs", "outputs", "backward_fn")

    def __init__(self, inputs: Sequence["Tensor"], backward_fn: Callable) -> None:
        self.inputs = tuple(inputs)
        self.outputs: tuple[Tensor, ...] = ()
        self.backward_fn = backward_fn


class Tensor:
    __slots__ = ("data", "node")

    def __init__(self, data, dtype=None, _node: Optional[Node] = None) -> None:
        self.data = np.asarray(data, dtype=dtype or DEFAULT_DTYPE)
        self.node = _node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


class Parameter(Tensor):
    """Named leaf tensor with a persistent gradient accumulator."""

    __slots__ = ("name", "grad")

    def __init__(self, name: str, data, dtype=None) -> None:
        super().__init__(data, dtype=dtype)
        if not np.all(np.isfinite(self.data)):
            raise ValueError(f"parameter {name!r} initialized with non-finite values")
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _make(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    node = Node(inputs, backward_fn)
    out = Tensor(data, dtype=data.dtype, _node=node)
    node.outputs = (out,)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --------------------------------------------------------------------------
# Primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data + c, (a,), lambda g: (g,))


def concat(parts: Sequence[Tensor]) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"concat: expected vectors, got shape {p.shape}")
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts]), parts, backward)


def stack(scalars: Sequence[Tensor]) -> Tensor:
    scalars = list(scalars)
    for s in scalars:
        if s.data.ndim != 0:
            raise ShapeError(f"stack: expected scalars, got shape {s.shape}")

    def backward(g):
        return tuple(g[i] for i in range(len(scalars)))

    return _make(np.array([s.data for s in scalars], dtype=scalars[0].data.dtype), scalars, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        return _make(ad @ bd, (a, b), lambda g: (np.outer(g, bd), ad.T @ g))
    if ad.ndim == 1 and bd.ndim == 1:
        if ad.shape != bd.shape:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        return _make(ad @ bd, (a, b), lambda g: (g * bd, g * ad))
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))
    raise ShapeError(f"matmul: unsupported ranks {ad.ndim} and {bd.ndim}")


def bilinear(u: Tensor, w: Tensor, v: Tensor) -> Tensor:
    """Scalar u @ w @ v for vectors u (m,), v (n,) and matrix w (m, n)."""
    ud, wd, vd = u.data, w.data, v.data
    if ud.ndim != 1 or vd.ndim != 1 or wd.shape != (ud.shape[0], vd.shape[0]):
        raise ShapeError(f"bilinear: {ud.shape} @ {wd.shape} @ {vd.shape}")
    wv = wd @ vd

    def backward(g):
        return g * wv, g * np.outer(ud, vd), g * (wd.T @ ud)

    return _make(np.asarray(ud @ wv), (u, w, v), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = kernels.sigmoid(np.atleast_1d(a.data)).reshape(a.data.shape)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsum(a: Tensor) -> Tensor:
    return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.full_like(a.data, g),))


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _make(np.asarray(a.data.mean()), (a,), lambda g: (np.full_like(a.data, g / n),))


def softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1:
        raise ShapeError(f"softmax: expected a vector, got shape {a.shape}")
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def backward(g):
        return ((g - np.dot(g, out)) * out,)

    return _make(out, (a,), backward)


def take(a: Tensor, index: int) -> Tensor:
    index = int(index)

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[index] = g
        return (ga,)

    return _make(np.asarray(a.data[index]), (a,), backward)


def lookup(table: Tensor, index: int) -> Tensor:
    """Row of an embedding table; backward scatters into that row only."""
    if table.data.ndim != 2:
        raise ShapeError(f"lookup: expected a 2-d table, got shape {table.shape}")
    index = int(index)

    def backward(g):
        gt = np.zeros_like(table.data)
        gt[index] = g
        return (gt,)

    return _make(table.data[index].copy(), (table,), backward)


def nll_from_logits(logits: Tensor, target: int) -> Tensor:
    """-log softmax(logits)[target], computed stably."""
    if logits.data.ndim != 1:
        raise ShapeError(f"nll_from_logits: expected a vector, got shape {logits.shape}")
    target = int(target)
    shifted = logits.data - logits.data.max()
    lse = np.log(np.exp(shifted).sum())
    probs = np.exp(shifted - lse)

    def backward(g):
        gl = probs.copy()
        gl[target] -= 1.0
        return (gl * g,)

    return _make(np.asarray(lse - shifted[target]), (logits,), backward)


def bce_with_logits(logit: Tensor, target: int) -> Tensor:
    """-log p(target) for p = sigmoid(logit), target in {0, 1}; stable."""
    if logit.data.ndim != 0:
        raise ShapeError(f"bce_with_logits: expected a scalar, got shape {logit.shape}")
    if target not in (0, 1):
        raise ValueError(f"bce_with_logits: target must be 0 or 1, got {target!r}")
    x = float(logit.data)
    # -log sigmoid(x) = logaddexp(0, -x); -log(1 - sigmoid(x)) = logaddexp(0, x)
    val = np.logaddexp(0.0, -x) if target == 1 else np.logaddexp(0.0, x)
    p = float(kernels.sigmoid(np.array([x]))[0])

    def backward(g):
        return (np.asarray(g * (p - target)),)

    return _make(np.asarray(val), (logit,), backward)


# --------------------------------------------------------------------------
# Fused recurrent cells


def xavier_uniform(shape: Sequence[int], rng: np.random.Generator, dtype=None) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype or DEFAULT_DTYPE)


class GRUCell:
    """Gated recurrent unit as one fused graph node per step."""

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator, dtype=None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.wx = Parameter(f"{name}.wx", xavier_uniform((3 * hidden_dim, input_dim), rng, dtype))
        self.wh = Parameter(f"{name}.wh", xavier_uniform((3 * hidden_dim, hidden_dim), rng, dtype))
        self.b = Parameter(f"{name}.b", np.zeros(3 * hidden_dim, dtype=dtype or DEFAULT_DTYPE))

    def parameters(self) -> list[Parameter]:
        return [self.wx, self.wh, self.b]

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        if x.shape != (self.input_dim,) or h.shape != (self.hidden_dim,):
            raise ShapeError(
                f"gru: x {x.shape}, h {h.shape}; expected ({self.input_dim},), ({self.hidden_dim},)"
            )
        wx, wh, b = self.wx, self.wh, self.b
        h_new, reset, update, cand, gated = kernels.gru_forward(
            x.data, h.data, wx.data, wh.data, b.data
        )

        def backward(g):
            dx, dh, dwx, dwh, db = kernels.gru_backward(
                g, x.data, h.data, wx.data, wh.data, reset, update, cand, gated
            )
            return dx, dh, dwx, dwh, db

        return _make(h_new, (x, h, wx, wh, b), backward)


class LSTMCell:
    """LSTM cell as one fused two-output graph node per step."""

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator, dtype=None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.wx = Parameter(f"{name}.wx", xavier_uniform((4 * hidden_dim, input_dim), rng, dtype))
        self.wh = Parameter(f"{name}.wh", xavier_uniform((4 * hidden_dim, hidden_dim), rng, dtype))
        self.b = Parameter(f"{name}.b", np.zeros(4 * hidden_dim, dtype=dtype or DEFAULT_DTYPE))

    def parameters(self) -> list[Parameter]:
        return [self.wx, self.wh, self.b]

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape != (self.input_dim,) or h.shape != (self.hidden_dim,) or c.shape != (self.hidden_dim,):
            raise ShapeError(
                f"lstm: x {x.shape}, h {h.shape}, c {c.shape}; expected "
                f"({self.input_dim},), ({self.hidden_dim},), ({self.hidden_dim},)"
            )
        wx, wh, b = self.wx, self.wh, self.b
        h_new, c_new, i_gate, f_gate, cand, o_gate, tc = kernels.lstm_forward(
            x.data, h.data, c.data, wx.data, wh.data, b.data
        )

        def backward(gh, gc):
            dx, dh, dc, dwx, dwh, db = kernels.lstm_backward(
                gh, gc, x.data, h.data, c.data, wx.data, wh.data,
                i_gate, f_gate, cand, o_gate, tc,
            )
            return dx, dh, dc, dwx, dwh, db

        node = Node((x, h, c, wx, wh, b), backward)
        out_h = Tensor(h_new, dtype=h_new.dtype, _node=node)
        out_c = Tensor(c_new, dtype=c_new.dtype, _node=node)
        node.outputs = (out_h, out_c)
        return out_h, out_c


# --------------------------------------------------------------------------
# Backward pass


def toposort(root: Tensor) -> list[Node]:
    """Nodes reachable from root, each exactly once, inputs before users."""
    order: list[Node] = []
    seen: set[int] = set()
    if root.node is None:
        return order
    stack: list[tuple[Node, int]] = [(root.node, 0)]
    seen.add(id(root.node))
    while stack:
        node, i = stack.pop()
        if i < len(node.inputs):
            stack.append((node, i + 1))
            child = node.inputs[i].node
            if child is not None and id(child) not in seen:
                seen.add(id(child))
                stack.append((child, 0))
        else:
            order.append(node)
    return order


def backward(loss: Tensor) -> None:
    """Populate Parameter gradients for a scalar loss (accumulating)."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    order = toposort(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        out_grads = []
        for out in node.outputs:
            g = grads.pop(id(out), None)
            if g is None:
                g = np.zeros_like(out.data)
            out_grads.append(g)
        in_grads = node.backward_fn(*out_grads)
        for tensor, g in zip(node.inputs, in_grads):
            if g is None:
                continue
            if isinstance(tensor, Parameter):
                tensor.grad += g
            elif tensor.node is not None:
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g


# --------------------------------------------------------------------------
# Gradient checking


class GradCheckReport:
    def __init__(self) -> None:
        self.per_parameter: dict[str, float] = {}

    @property
    def max_relative_error(self) -> float:
        return max(self.per_parameter.values(), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error <= tolerance

    def as_dict(self) -> dict:
        return {
            "per_parameter": dict(sorted(self.per_parameter.items())),
            "max_relative_error": self.max_relative_error,
        }


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Parameter],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare backward() gradients of a deterministic scalar f against
    central finite differences, coordinate by coordinate.

    Relative error uses denominator max(1, |analytic|, |numeric|), so
    near-zero gradients are compared on an absolute scale.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}

    report = GradCheckReport()
    for p in params:
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = float(f().data)
            flat[i] = orig - epsilon
            lo = float(f().data)
            flat[i] = orig
            nflat[i] = (hi - lo) / (2.0 * epsilon)
        a = analytic[p.name]
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(numeric)))
        rel = np.abs(a - numeric) / denom
        report.per_parameter[p.name] = float(rel.max()) if rel.size else 0.0
    return report


# --------------------------------------------------------------------------
# Parameter store and checkpoint file format (see schema.md)

_MAGIC = b"GSTENSOR"


class ParamStore:
    """Ordered collection of named Parameters."""

    def __init__(self) -> None:
        self._params: dict[str, Parameter] = {}

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise ValueError(f"duplicate parameter name {param.name!r}")
        self._params[param.name] = param
        return param

    def extend(self, params: Iterable[Parameter]) -> None:
        for p in params:
            self.add(p)

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self:
            p.zero_grad()

    def global_grad_norm(self) -> float:
        total = 0.0
        for p in self:
            total += float(np.sum(p.grad * p.grad))
        return float(np.sqrt(total))

    def clone_values(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(values)
        extra = set(values) - set(self._params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, arr in values.items():
            p = self._params[name]
            if p.data.shape != arr.shape:
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, expected {p.data.shape}"
                )
            p.data[...] = arr.astype(p.data.dtype)

    def save(self, path: Path) -> None:
        save_tensors(path, {p.name: p.data for p in self})

    def load(self, path: Path) -> None:
        self.load_values(load_tensors(path))


_DTYPE_TAGS = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}


def save_tensors(path: Path, tensors: dict[str, np.ndarray]) -> None:
    """Named-tensor container: JSON header + raw little-endian C-order data."""
    entries = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)  # note: ascontiguousarray would promote 0-d to 1-d
        tag = "<f8" if arr.dtype == np.float64 else "<f4" if arr.dtype == np.float32 else None
        if tag is None:
            raise ValueError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": tag})
        blobs.append(arr.astype(np.dtype(tag)).tobytes(order="C"))
    header = json.dumps({"tensors": entries}).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a tensor container (bad magic)")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        out: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            dtype = _DTYPE_TAGS[entry["dtype"]]
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated data for tensor {entry['name']!r}")
            arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{path}: tensor {entry['name']!r} has non-finite values")
            out[entry["name"]] = arr.copy()
        return out
