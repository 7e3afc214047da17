"""Reverse-mode automatic differentiation on float64 numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
walks the graph in reverse topological order and accumulates gradients
into every reachable leaf with requires_grad set. The op set is exactly
what the sequence models in this package need — nothing speculative.

Gradient correctness is checked against central finite differences
(grad_check below); the acceptance suite runs that check over every op
and over a full prefix-injected encoder-decoder loss.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Tensor:
    """Node in the autodiff graph; data is always float64."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad}{tag})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Graph-free view of the value, used by inference-only code paths.
    def detach(self) -> np.ndarray:
        return self.data


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order over the graph (deep graphs, no recursion)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _accumulate(tensor: Tensor, value: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += value


def _needs_graph(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._backward is not None for t in tensors)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _needs_graph(*parents):
        out._parents = parents
        out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad or a._backward is not None:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward is not None:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad or a._backward is not None:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backward is not None:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    data = a.data * s

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * s)

    return _make(data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy stacking semantics (2D and batched)."""
    data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad or a._backward is not None:
            ga = g @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad or b._backward is not None:
            gb = np.swapaxes(a.data, -1, -2) @ g
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * (1.0 - data * data))

    return _make(data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    x = a.data
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    data = 0.5 * x * (1.0 + t)

    def backward(g: np.ndarray) -> None:
        d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
        _accumulate(a, g * local)

    return _make(data, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> None:
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(a, data * (g - dot))

    return _make(data, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply elementwise gain and bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    data = gain.data * xhat + bias.data

    def backward(g: np.ndarray) -> None:
        if gain.requires_grad or gain._backward is not None:
            _accumulate(gain, _unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad or bias._backward is not None:
            _accumulate(bias, _unbroadcast(g, bias.data.shape))
        if x.requires_grad or x._backward is not None:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv_std * (dxhat - m1 - xhat * m2))

    return _make(data, (x, gain, bias), backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    data = table.data[ids]

    def backward(g: np.ndarray) -> None:
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))

    return _make(data, (table,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g: np.ndarray) -> None:
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad or t._backward is not None:
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + size)
                _accumulate(t, g[tuple(index)])
            offset += size

    return _make(data, tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    data = a.data[index]

    def backward(g: np.ndarray) -> None:
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[index] += g

    return _make(data, (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    data = a.data.transpose(axes)
    inverse = tuple(int(i) for i in np.argsort(axes))

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g.transpose(inverse))

    return _make(data, (a,), backward)


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_id: int) -> Tensor:
    """Token-mean negative log-likelihood over rows whose target != ignore_id.

    logits: (N, V); targets: (N,) integer ids. All-ignored input yields a
    zero loss with zero gradient rather than dividing by zero.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.ndim != 1 or targets.shape[0] != logits.data.shape[0]:
        raise ValueError("cross_entropy expects logits (N, V) and targets (N,)")
    keep = targets != ignore_id
    count = int(keep.sum())
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    rows = np.arange(targets.shape[0])
    safe_targets = np.where(keep, targets, 0)
    picked = logp[rows, safe_targets]
    if count == 0:
        data = np.float64(0.0)
    else:
        data = -picked[keep].sum() / count

    def backward(g: np.ndarray) -> None:
        if count == 0:
            return
        probs = np.exp(logp)
        grad = probs.copy()
        grad[rows, safe_targets] -= 1.0
        grad[~keep] = 0.0
        _accumulate(logits, (float(g) / count) * grad)

    return _make(np.asarray(data), (logits,), backward)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True, name=name)


def normal_init(rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02, name: str = "") -> Tensor:
    return parameter(rng.normal(0.0, std, size=shape), name=name)


def zeros_init(shape: tuple[int, ...], name: str = "") -> Tensor:
    return parameter(np.zeros(shape), name=name)


def ones_init(shape: tuple[int, ...], name: str = "") -> Tensor:
    return parameter(np.ones(shape), name=name)


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-4,
    floor: float = 1e-3,
    max_coords_per_tensor: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Compare analytic gradients of scalar f() against central differences.

    Returns the worst per-coordinate relative error
    |analytic - numeric| / (|analytic| + |numeric| + floor); the floor keeps
    near-zero coordinates from amplifying finite-difference roundoff. With
    max_coords_per_tensor set, a seeded subset of coordinates is checked.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    out = f()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, a in zip(params, analytic):
        n_coords = p.data.size
        if max_coords_per_tensor is not None and n_coords > max_coords_per_tensor:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(n_coords, size=max_coords_per_tensor, replace=False)
        else:
            coords = range(n_coords)
        flat = p.data.reshape(-1)
        a_flat = a.reshape(-1)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + h
            f_plus = f().item()
            flat[idx] = original - h
            f_minus = f().item()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            rel = abs(a_flat[idx] - numeric) / (abs(a_flat[idx]) + abs(numeric) + floor)
            if rel > worst:
                worst = rel
    return worst


class Adam:
    """Adam with bias correction and per-group learning rates.

    Groups are dicts {"params": [...], "lr": float}; update order follows
    group and parameter list order, so runs are reproducible.
    """

    def __init__(
        self,
        groups: Iterable[dict],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.groups = [dict(g) for g in groups]
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        seen: set[int] = set()
        for group in self.groups:
            if "lr" not in group:
                raise ValueError("every parameter group needs an lr")
            group["params"] = list(group["params"])
            for p in group["params"]:
                if id(p) in seen:
                    raise ValueError("parameter appears in more than one group")
                seen.add(id(p))
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def zero_grad(self) -> None:
        for group in self.groups:
            for p in group["params"]:
                p.zero_grad()

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for group in self.groups:
            lr = group["lr"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                key = id(p)
                if key not in self._m:
                    self._m[key] = np.zeros_like(p.data)
                    self._v[key] = np.zeros_like(p.data)
                m = self._m[key]
                v = self._v[key]
                m *= self.beta1
                m += (1.0 - self.beta1) * p.grad
                v *= self.beta2
                v += (1.0 - self.beta2) * (p.grad * p.grad)
                m_hat = m / bc1
                v_hat = v / bc2
                p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
