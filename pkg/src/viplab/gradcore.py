"""Minimal dense-tensor reverse-mode autodiff with an Adam optimizer.

Just enough machinery for MLP encoders and the three pre-training losses:
a tape of :class:`DiffNode` objects built by the primitive ops below, a
``backward`` pass returning gradients for named leaves, and ``adam_step``.
Everything is float64; values are numpy arrays of shape ``()``, ``(n,)`` or
``(B, n)``. The only broadcasting supported is matvec over a batch and
bias-style ``(B, n) op (n,)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiffNode",
    "GradError",
    "constant",
    "leaf",
    "matvec",
    "add",
    "sub",
    "mul",
    "scale",
    "relu",
    "tanh",
    "exp",
    "log",
    "square",
    "absval",
    "l2norm",
    "mean",
    "mean_axis1",
    "log_mean_exp",
    "concat",
    "repeat_rows",
    "reshape",
    "flatten",
    "backward",
    "AdamState",
    "adam_step",
    "central_difference",
]


class GradError(ValueError):
    """Raised for shape violations and bad gradients."""


class DiffNode:
    """One value on the tape: forward result, parents, and a local vjp."""

    __slots__ = ("values", "grad", "parents", "vjp", "tag", "name")

    def __init__(self, values, parents=(), vjp=None, tag="leaf", name=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self.vjp = vjp
        self.tag = tag
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"DiffNode(tag={self.tag!r}, shape={self.shape})"


def constant(values) -> DiffNode:
    return DiffNode(values, tag="const")


def leaf(values, name: str) -> DiffNode:
    """A named parameter leaf; ``backward`` reports its gradient."""
    return DiffNode(values, tag="param", name=name)


def _check_same_shape(op: str, a: DiffNode, b: DiffNode) -> None:
    if a.shape != b.shape:
        raise GradError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matvec(w: DiffNode, x: DiffNode) -> DiffNode:
    """``W @ x`` for a vector, or row-wise ``x @ W.T`` for a (B, n) batch."""
    wv, xv = w.values, x.values
    if wv.ndim != 2:
        raise GradError(f"matvec: weight must be 2-d, got {wv.shape}")
    m, n = wv.shape
    if xv.ndim == 1:
        if xv.shape[0] != n:
            raise GradError(f"matvec: shape mismatch {wv.shape} vs {xv.shape}")
        out = wv @ xv

        def vjp(g):
            return np.outer(g, xv), wv.T @ g

    elif xv.ndim == 2:
        if xv.shape[1] != n:
            raise GradError(f"matvec: shape mismatch {wv.shape} vs {xv.shape}")
        out = xv @ wv.T

        def vjp(g):
            return g.T @ xv, g @ wv

    else:
        raise GradError(f"matvec: input must be 1-d or 2-d, got {xv.shape}")
    return DiffNode(out, (w, x), vjp, "matvec")


def _bias_pair(op: str, a: DiffNode, b: DiffNode):
    """Classify an elementwise pair: same-shape, or (B, n) with (n,) second."""
    if a.shape == b.shape:
        return "same"
    if a.values.ndim == 2 and b.values.ndim == 1 and a.shape[1] == b.shape[0]:
        return "bias"
    raise GradError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: DiffNode, b: DiffNode) -> DiffNode:
    kind = _bias_pair("add", a, b)
    out = a.values + b.values

    def vjp(g):
        return g, (g.sum(axis=0) if kind == "bias" else g)

    return DiffNode(out, (a, b), vjp, "add")


def sub(a: DiffNode, b: DiffNode) -> DiffNode:
    kind = _bias_pair("sub", a, b)
    out = a.values - b.values

    def vjp(g):
        return g, (-g.sum(axis=0) if kind == "bias" else -g)

    return DiffNode(out, (a, b), vjp, "sub")


def mul(a: DiffNode, b: DiffNode) -> DiffNode:
    kind = _bias_pair("mul", a, b)
    av, bv = a.values, b.values
    out = av * bv

    def vjp(g):
        ga = g * bv
        gb = g * av
        return ga, (gb.sum(axis=0) if kind == "bias" else gb)

    return DiffNode(out, (a, b), vjp, "mul")


def scale(x: DiffNode, c: float) -> DiffNode:
    c = float(c)
    return DiffNode(x.values * c, (x,), lambda g: (g * c,), "scale")


def relu(x: DiffNode) -> DiffNode:
    mask = x.values > 0.0
    return DiffNode(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x: DiffNode) -> DiffNode:
    out = np.tanh(x.values)
    return DiffNode(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def exp(x: DiffNode) -> DiffNode:
    out = np.exp(x.values)
    return DiffNode(out, (x,), lambda g: (g * out,), "exp")


def log(x: DiffNode) -> DiffNode:
    xv = x.values
    return DiffNode(np.log(xv), (x,), lambda g: (g / xv,), "log")


def square(x: DiffNode) -> DiffNode:
    xv = x.values
    return DiffNode(xv * xv, (x,), lambda g: (g * 2.0 * xv,), "square")


def absval(x: DiffNode) -> DiffNode:
    xv = x.values
    return DiffNode(np.abs(xv), (x,), lambda g: (g * np.sign(xv),), "absval")


def l2norm(x: DiffNode, eps: float = 1e-12) -> DiffNode:
    """Smoothed L2 norm ``sqrt(sum x**2 + eps)``, row-wise for 2-d input.

    eps > 0 keeps the gradient finite at x = 0.
    """
    if eps <= 0.0:
        raise GradError("l2norm: eps must be > 0")
    xv = x.values
    if xv.ndim == 1:
        out = np.sqrt(xv @ xv + eps)

        def vjp(g):
            return (g * xv / out,)

    elif xv.ndim == 2:
        out = np.sqrt(np.einsum("ij,ij->i", xv, xv) + eps)

        def vjp(g):
            return ((g / out)[:, None] * xv,)

    else:
        raise GradError(f"l2norm: input must be 1-d or 2-d, got {xv.shape}")
    return DiffNode(out, (x,), vjp, "l2norm")


def mean(x: DiffNode) -> DiffNode:
    """Mean over all elements, returning a scalar node."""
    n = x.values.size
    if n == 0:
        raise GradError("mean: empty input")
    out = x.values.mean()

    def vjp(g):
        return (np.full_like(x.values, g / n),)

    return DiffNode(out, (x,), vjp, "mean")


def mean_axis1(x: DiffNode) -> DiffNode:
    """Row means of a (B, M) node -> (B,)."""
    xv = x.values
    if xv.ndim != 2:
        raise GradError(f"mean_axis1: input must be 2-d, got {xv.shape}")
    m = xv.shape[1]
    return DiffNode(xv.mean(axis=1), (x,), lambda g: (np.repeat(g[:, None], m, axis=1) / m,), "mean_axis1")


def log_mean_exp(x: DiffNode) -> DiffNode:
    """Max-shifted log(mean(exp(x))) over all elements of a 1-d node."""
    xv = x.values
    if xv.size == 0:
        raise GradError("log_mean_exp: empty input")
    m = xv.max()
    shifted = np.exp(xv - m)
    total = shifted.sum()
    out = m + np.log(total / xv.size)

    def vjp(g):
        return (g * shifted / total,)

    return DiffNode(out, (x,), vjp, "log_mean_exp")


def concat(nodes) -> DiffNode:
    """Concatenate 1-d or 2-d nodes along axis 0."""
    nodes = list(nodes)
    if not nodes:
        raise GradError("concat: empty input")
    sizes = [n.values.shape[0] for n in nodes]
    out = np.concatenate([n.values for n in nodes], axis=0)

    def vjp(g):
        grads, off = [], 0
        for s in sizes:
            grads.append(g[off : off + s])
            off += s
        return tuple(grads)

    return DiffNode(out, tuple(nodes), vjp, "concat")


def repeat_rows(x: DiffNode, k: int) -> DiffNode:
    """Repeat each row of a (B, n) node k times -> (B*k, n)."""
    xv = x.values
    if xv.ndim != 2:
        raise GradError(f"repeat_rows: input must be 2-d, got {xv.shape}")
    b, n = xv.shape
    out = np.repeat(xv, k, axis=0)

    def vjp(g):
        return (g.reshape(b, k, n).sum(axis=1),)

    return DiffNode(out, (x,), vjp, "repeat_rows")


def reshape(x: DiffNode, shape) -> DiffNode:
    old = x.values.shape
    return DiffNode(x.values.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def flatten(x: DiffNode) -> DiffNode:
    return reshape(x, (-1,))


def backward(root: DiffNode) -> dict[str, np.ndarray]:
    """Reverse pass from a scalar root; returns gradients for named leaves.

    Each reachable node is visited exactly once, in reverse topological
    order, so shared subgraphs accumulate correctly.
    """
    if root.values.shape != ():
        raise GradError(f"backward: root must be scalar, got shape {root.values.shape}")

    order: list[DiffNode] = []
    seen: set[int] = set()
    stack: list[tuple[DiffNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    for node in order:
        node.grad = np.zeros_like(node.values)
    root.grad = np.ones_like(root.values)

    grads: dict[str, np.ndarray] = {}
    for node in reversed(order):
        if node.name is not None:
            grads[node.name] = node.grad
        if node.vjp is None:
            continue
        parent_grads = node.vjp(node.grad)
        for parent, g in zip(node.parents, parent_grads):
            parent.grad = parent.grad + g
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, one entry per named parameter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float,
) -> None:
    """Standard bias-corrected Adam update, applied to params in place."""
    if learning_rate <= 0.0:
        raise GradError("adam_step: learning_rate must be > 0")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise GradError(f"adam_step: gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        if not np.all(np.isfinite(g)):
            raise GradError(f"adam_step: non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def central_difference(f, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite-difference gradients of a scalar function of params.

    ``f`` is called with no arguments and must read the (mutated) arrays in
    ``params``. This is the independent oracle for ``backward``; it never
    touches the tape.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            hi = f()
            flat_p[i] = orig - h
            lo = f()
            flat_p[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * h)
        grads[name] = g
    return grads
