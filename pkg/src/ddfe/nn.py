"""Minimal reverse-mode differentiable core on float64 numpy arrays.

Just enough machinery for the embedding pipeline: dense layers, elementwise
activations, segment reductions over voxels, the two segmentation losses,
Adam, and a finite-difference gradient checker.  Everything runs in 64-bit
so gradient checks can be tight.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Array value with a gradient buffer and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        other = as_tensor(other)
        if self.data.shape != other.data.shape:
            raise ValueError(
                f"shape mismatch in add: {self.data.shape} vs {other.data.shape}"
            )
        return Tensor(
            self.data + other.data,
            parents=(self, other),
            backward_fn=lambda g: (g, g),
        )

    def __mul__(self, scalar: float):
        s = float(scalar)
        return Tensor(
            self.data * s,
            parents=(self,),
            backward_fn=lambda g: (g * s,),
        )

    __rmul__ = __mul__

    def backward(self):
        """Reverse-mode accumulation from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward_fn(node.grad)):
                if g is None:
                    continue
                if parent.grad is None:
                    # copy: backward_fns may hand the same buffer to two parents
                    parent.grad = np.array(g, dtype=np.float64)
                else:
                    parent.grad += g


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def linear(x, weights, bias) -> Tensor:
    """y = x @ W + b with exact gradients for all three inputs."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if x.data.ndim != 2 or weights.data.ndim != 2 or x.data.shape[1] != weights.data.shape[0]:
        raise ValueError(
            f"shape mismatch in linear: x {x.data.shape} vs weights {weights.data.shape}"
        )
    if bias.data.shape != (weights.data.shape[1],):
        raise ValueError(
            f"shape mismatch in linear: bias {bias.data.shape} vs weights {weights.data.shape}"
        )

    def backward(g):
        return g @ weights.data.T, x.data.T @ g, g.sum(axis=0)

    return Tensor(x.data @ weights.data + bias.data, parents=(x, weights, bias),
                  backward_fn=backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), parents=(x,),
                  backward_fn=lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor(y, parents=(x,), backward_fn=lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return Tensor(y, parents=(x,), backward_fn=lambda g: (g * (1.0 - y * y),))


def softmax(x, axis: int = -1) -> Tensor:
    """Rowwise softmax, stabilized by max subtraction."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - inner),)

    return Tensor(y, parents=(x,), backward_fn=backward)


def tensor_sum(x) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    x = as_tensor(x)
    return Tensor(x.data.sum(), parents=(x,),
                  backward_fn=lambda g: (np.full_like(x.data, float(g)),))


def multiply(a, b) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(
            f"shape mismatch in multiply: {a.data.shape} vs {b.data.shape}"
        )
    return Tensor(a.data * b.data, parents=(a, b),
                  backward_fn=lambda g: (g * b.data, g * a.data))


def concat(parts, axis: int = 1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([p.data for p in parts], axis=axis),
                  parents=tuple(parts), backward_fn=backward)


class SegmentMap:
    """Point-to-segment assignment with precomputed grouping structure.

    Every segment in [0, num_segments) must be non-empty.  Built once per
    cloud and reused by every segment reduction over it.
    """

    def __init__(self, point_to_segment, num_segments: int):
        seg = np.asarray(point_to_segment)
        counts = np.bincount(seg, minlength=num_segments)
        if counts.size > num_segments:
            raise ValueError(
                f"segment id {seg.max()} out of range for {num_segments} segments"
            )
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise ValueError(f"empty segment {empty[0]}")
        self.point_to_segment = seg
        self.num_segments = num_segments
        self.counts = counts
        # Stable sort keeps original point order within each segment.
        self.order = np.argsort(seg, kind="stable")
        self.starts = np.searchsorted(seg[self.order], np.arange(num_segments))


def _as_segment_map(seg, num_segments) -> SegmentMap:
    if isinstance(seg, SegmentMap):
        return seg
    if num_segments is None:
        num_segments = int(np.max(seg)) + 1
    return SegmentMap(seg, num_segments)


def segment_mean(x, seg, num_segments: int | None = None) -> Tensor:
    """Per-segment column means of an (N, D) tensor -> (M, D)."""
    x = as_tensor(x)
    smap = _as_segment_map(seg, num_segments)
    idx, counts = smap.point_to_segment, smap.counts
    out = np.empty((smap.num_segments, x.data.shape[1]))
    for d in range(x.data.shape[1]):
        out[:, d] = np.bincount(idx, weights=x.data[:, d], minlength=smap.num_segments)
    out /= counts[:, None]

    def backward(g):
        return ((g / counts[:, None])[idx],)

    return Tensor(out, parents=(x,), backward_fn=backward)


def segment_max(x, seg, num_segments: int | None = None) -> Tensor:
    """Per-segment column maxima of an (N, D) tensor -> (M, D).

    The backward pass routes each output gradient to the first point (in
    original order) attaining the maximum in its segment and channel.
    """
    x = as_tensor(x)
    smap = _as_segment_map(seg, num_segments)
    order, starts = smap.order, smap.starts
    seg_sorted = smap.point_to_segment[order]
    n, d = x.data.shape
    m = smap.num_segments
    vals = x.data[order]
    out = np.maximum.reduceat(vals, starts, axis=0)
    # First attaining point per segment/channel: among the maxima, the one
    # with the lowest position in segment-sorted (== original) order wins.
    is_max = vals == out[seg_sorted]
    rank_key = np.where(is_max, n - np.arange(n)[:, None], 0)
    argmax_sorted = n - np.maximum.reduceat(rank_key, starts, axis=0)
    argmax = order[argmax_sorted]

    def backward(g):
        flat = argmax.ravel() * d + np.broadcast_to(np.arange(d), (m, d)).ravel()
        return (np.bincount(flat, weights=g.ravel(), minlength=n * d).reshape(n, d),)

    return Tensor(out, parents=(x,), backward_fn=backward)


def segment_reduce(x, seg, mode: str, num_segments: int | None = None) -> Tensor:
    """Segment reduction dispatch: mode is "mean" or "max"."""
    if mode == "mean":
        return segment_mean(x, seg, num_segments)
    if mode == "max":
        return segment_max(x, seg, num_segments)
    raise ValueError(f"unknown reduction mode {mode!r}")


def weighted_cross_entropy(logits, labels, class_weights) -> Tensor:
    """Class-weighted NLL of softmaxed logits, normalized by the weight mass.

    Invariant to positive rescaling of the weight vector.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    weights = np.asarray(class_weights, dtype=np.float64)
    num_classes = logits.data.shape[1]
    if weights.shape != (num_classes,):
        raise ValueError(
            f"expected {num_classes} class weights, got shape {weights.shape}"
        )
    if np.any(weights <= 0):
        raise ValueError("class weights must be positive")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        raise ValueError(
            f"invalid label {labels[bad[0]]} at index {bad[0]} (num_classes={num_classes})"
        )

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(labels.shape[0])
    sample_w = weights[labels]
    total_w = sample_w.sum()
    loss = -(sample_w * log_probs[rows, labels]).sum() / total_w

    def backward(g):
        probs = np.exp(log_probs)
        d = probs * sample_w[:, None]
        d[rows, labels] -= sample_w
        return (float(g) * d / total_w,)

    return Tensor(loss, parents=(logits,), backward_fn=backward)


def lovasz_grad(gt_sorted: np.ndarray) -> np.ndarray:
    """Increments of the Jaccard error over prefixes of the sorted errors."""
    gts = gt_sorted.sum()
    intersection = gts - np.cumsum(gt_sorted)
    union = gts + np.cumsum(1.0 - gt_sorted)
    jaccard = 1.0 - intersection / union
    jaccard[1:] = jaccard[1:] - jaccard[:-1]
    return jaccard


def lovasz_softmax(probs, labels) -> Tensor:
    """Lovasz extension of the Jaccard loss, averaged over present classes.

    The backward pass treats the per-class sort order as locally constant,
    which is exact almost everywhere on the piecewise-linear extension.
    """
    probs = as_tensor(probs)
    labels = np.asarray(labels)
    p = probs.data
    row_sums = p.sum(axis=1)
    off = np.flatnonzero(np.abs(row_sums - 1.0) > 1e-6)
    if off.size:
        raise ValueError(
            f"unnormalized rows: row {off[0]} sums to {row_sums[off[0]]!r}"
        )
    num_classes = p.shape[1]
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")

    present = np.unique(labels)
    total = 0.0
    dprobs = np.zeros_like(p)
    for c in present:
        fg = (labels == c).astype(np.float64)
        errors = np.where(fg > 0, 1.0 - p[:, c], p[:, c])
        order = np.argsort(-errors, kind="stable")
        grad_vec = lovasz_grad(fg[order])
        total += errors[order] @ grad_vec
        derr = np.empty_like(errors)
        derr[order] = grad_vec
        dprobs[:, c] += np.where(fg > 0, -derr, derr)
    scale = 1.0 / present.size
    loss = total * scale

    def backward(g):
        return (float(g) * scale * dprobs,)

    return Tensor(loss, parents=(probs,), backward_fn=backward)


class Adam:
    """Adam with bias correction over a fixed parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad
                 for p in self.params]
        for i, g in enumerate(grads):
            if not np.isfinite(g).all():
                raise ValueError(f"non-finite gradient in parameter {i}; step aborted")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def lr_schedule(epoch: int, base_lr: float = 1e-3, decay: float = 0.99) -> float:
    """Learning rate after `epoch` whole epochs: base * decay**epoch."""
    return base_lr * decay**epoch


def grad_check(fn, params, h: float = 1e-5, exclude=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    fn must rebuild the scalar loss from the current parameter values on
    every call.  exclude, if given, is a per-parameter boolean mask of
    coordinates to skip (e.g. relu inputs sitting exactly at 0).
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss = fn()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    max_rel = 0.0
    for pi, p in enumerate(params):
        p.data = np.ascontiguousarray(p.data)  # ravel below must be a view
        flat = p.data.ravel()
        skip = None if exclude is None or exclude[pi] is None else np.asarray(exclude[pi]).ravel()
        for idx in range(flat.size):
            if skip is not None and skip[idx]:
                continue
            orig = flat[idx]
            flat[idx] = orig + h
            f_plus = float(fn().data)
            flat[idx] = orig - h
            f_minus = float(fn().data)
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic[pi].ravel()[idx]
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            max_rel = max(max_rel, rel)
    return max_rel
