"""Minimal reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps an ndarray plus a backward closure; calling backward() on a
scalar loss walks the recorded graph in reverse topological order and
accumulates gradients into every reachable tensor.  The recurrent, conv and
normalization layers are fused primitives with hand-derived backward passes
(cheaper and flatter graphs than composing them from scalar ops); all of them
are held to a central-finite-difference oracle by grad_check.
"""

import numpy as np


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        """A new leaf sharing this tensor's values; gradients stop here."""
        return Tensor(self.data)

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        """Reverse-accumulate d(self)/d(everything); self must be scalar."""
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.data.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
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
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = _node(self.data + other.data, (self, other))
        def backward(g):
            self.accumulate(_unbroadcast(g, self.data.shape))
            other.accumulate(_unbroadcast(g, other.data.shape))
        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _node(-self.data, (self,))
        out._backward = lambda g: self.accumulate(-g)
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = _node(self.data * other.data, (self, other))
        def backward(g):
            self.accumulate(_unbroadcast(g * other.data, self.data.shape))
            other.accumulate(_unbroadcast(g * self.data, other.data.shape))
        out._backward = backward
        return out

    __rmul__ = __mul__

    def tanh(self):
        y = np.tanh(self.data)
        out = _node(y, (self,))
        out._backward = lambda g: self.accumulate(g * (1.0 - y * y))
        return out

    def abs(self):
        out = _node(np.abs(self.data), (self,))
        out._backward = lambda g: self.accumulate(g * np.sign(self.data))
        return out

    def mean(self):
        out = _node(np.array(self.data.mean()), (self,))
        out._backward = lambda g: self.accumulate(np.full_like(self.data, float(g) / self.data.size))
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out = _node(self.data.reshape(shape), (self,))
        out._backward = lambda g: self.accumulate(g.reshape(old))
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = parents
        out.requires_grad = any(p.requires_grad for p in parents)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    """Concatenate along an axis; backward splits the gradient."""
    tensors = [as_tensor(t) for t in tensors]
    out = _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes[:-1])
    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate(piece)
    out._backward = backward
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    """x for x >= 0, slope * x below."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"slope must be in (0, 1), got {slope}")
    x = as_tensor(x)
    factor = np.where(x.data >= 0.0, 1.0, slope)
    out = _node(x.data * factor, (x,))
    out._backward = lambda g: x.accumulate(g * factor)
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """y = x @ W^T + b with W of shape (out, in); batched over leading dims."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.shape[-1] != weight.data.shape[1]:
        raise ValueError(f"linear: input width {x.data.shape[-1]} != weight fan-in {weight.data.shape[1]}")
    out = _node(x.data @ weight.data.T + bias.data, (x, weight, bias))
    def backward(g):
        x.accumulate(g @ weight.data)
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.data.shape[-1])
        weight.accumulate(g2.T @ x2)
        bias.accumulate(g2.sum(axis=0))
    out._backward = backward
    return out


def dense_forward(weight: Tensor, bias: Tensor, x: Tensor, activation=None) -> Tensor:
    """Dense layer; activation is None (identity), "tanh", or a callable."""
    y = linear(x, weight, bias)
    if activation is None or activation == "identity":
        return y
    if activation == "tanh":
        return y.tanh()
    return activation(y)


def conv1d_forward(kernels: Tensor, bias: Tensor, x: Tensor) -> Tensor:
    """Valid cross-correlation with kernel width 2, stride 1.

    kernels: (filters, in_channels, 2); x: (L, in_channels) or batched
    (B, L, in_channels).  Output length is L - 1.
    """
    kernels, bias, x = as_tensor(kernels), as_tensor(bias), as_tensor(x)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.shape[1] < 2:
        raise ValueError("conv1d needs input length >= 2")
    if xd.shape[2] != kernels.data.shape[1]:
        raise ValueError("conv1d channel mismatch")
    k0 = kernels.data[:, :, 0]
    k1 = kernels.data[:, :, 1]
    yd = xd[:, :-1, :] @ k0.T + xd[:, 1:, :] @ k1.T + bias.data
    out = _node(yd[0] if squeeze else yd, (x, kernels, bias))
    def backward(g):
        gb = g[None] if squeeze else g
        dk0 = np.einsum("blf,blc->fc", gb, xd[:, :-1, :])
        dk1 = np.einsum("blf,blc->fc", gb, xd[:, 1:, :])
        kernels.accumulate(np.stack([dk0, dk1], axis=2))
        bias.accumulate(gb.sum(axis=(0, 1)))
        dx = np.zeros_like(xd)
        dx[:, :-1, :] += gb @ k0
        dx[:, 1:, :] += gb @ k1
        x.accumulate(dx[0] if squeeze else dx)
    out._backward = backward
    return out


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors scale by 1/(1-rate), inference is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng stream")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = _node(x.data * mask, (x,))
    out._backward = lambda g: x.accumulate(g * mask)
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(
    w: Tensor,
    u: Tensor,
    b: Tensor,
    x: Tensor,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
    return_sequences: bool = True,
) -> Tensor:
    """Standard LSTM over a (B, T, in) or (T, in) input.

    w: (4H, in) input kernel, u: (4H, H) recurrent kernel, b: (4H,) bias, gate
    order [input, forget, candidate, output].  Returns the full hidden
    sequence (B, T, H) or the final hidden state (B, H).
    """
    w, u, b, x = as_tensor(w), as_tensor(u), as_tensor(b), as_tensor(x)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    batch, steps, _ = xd.shape
    hidden = u.data.shape[1]
    if steps < 1:
        raise ValueError("lstm needs at least one time step")

    h = np.zeros((batch, hidden)) if h0 is None else _as_array(h0).reshape(batch, hidden).copy()
    c = np.zeros((batch, hidden)) if c0 is None else _as_array(c0).reshape(batch, hidden).copy()
    cache = []
    hs = np.empty((batch, steps, hidden))
    H = hidden
    for t in range(steps):
        pre = xd[:, t, :] @ w.data.T + h @ u.data.T + b.data
        gi = _sigmoid(pre[:, :H])
        gf = _sigmoid(pre[:, H : 2 * H])
        gc = np.tanh(pre[:, 2 * H : 3 * H])
        go = _sigmoid(pre[:, 3 * H :])
        c_prev, h_prev = c, h
        c = gf * c_prev + gi * gc
        ct = np.tanh(c)
        h = go * ct
        hs[:, t, :] = h
        cache.append((gi, gf, gc, go, c_prev, h_prev, ct))

    if return_sequences:
        data = hs[0] if squeeze else hs
    else:
        data = hs[0, -1, :] if squeeze else hs[:, -1, :]
    out = _node(data, (x, w, u, b))

    def backward(g):
        if return_sequences:
            dhs = (g[None] if squeeze else g).copy()
        else:
            dhs = np.zeros((batch, steps, hidden))
            dhs[:, -1, :] = g[None] if squeeze else g
        dw = np.zeros_like(w.data)
        du = np.zeros_like(u.data)
        db = np.zeros_like(b.data)
        dx = np.zeros_like(xd)
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            gi, gf, gc, go, c_prev, h_prev, ct = cache[t]
            dh = dhs[:, t, :] + dh_next
            dct = dh * go
            dc = dct * (1.0 - ct * ct) + dc_next
            dgo = dh * ct
            dgf = dc * c_prev
            dgi = dc * gc
            dgc = dc * gi
            dc_next = dc * gf
            dpre = np.concatenate(
                [
                    dgi * gi * (1.0 - gi),
                    dgf * gf * (1.0 - gf),
                    dgc * (1.0 - gc * gc),
                    dgo * go * (1.0 - go),
                ],
                axis=1,
            )
            dw += dpre.T @ xd[:, t, :]
            du += dpre.T @ h_prev
            db += dpre.sum(axis=0)
            dx[:, t, :] = dpre @ w.data
            dh_next = dpre @ u.data
        x.accumulate(dx[0] if squeeze else dx)
        w.accumulate(dw)
        u.accumulate(du)
        b.accumulate(db)

    out._backward = backward
    return out


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = 0.99,
    eps: float = 1e-5,
    update_running: bool | None = None,
) -> Tensor:
    """Normalize over all axes but the last (the channel axis).

    Training uses batch statistics and, when update_running is on, folds them
    into the running estimates in place; inference normalizes by the running
    estimates.  Then scale by gamma and shift by beta.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if update_running is None:
        update_running = training
    axes = tuple(range(x.data.ndim - 1))
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if update_running:
            running_mean.data *= momentum
            running_mean.data += (1.0 - momentum) * mu
            running_var.data *= momentum
            running_var.data += (1.0 - momentum) * var
    else:
        mu = running_mean.data
        var = running_var.data
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = _node(gamma.data * xhat + beta.data, (x, gamma, beta))

    m = x.data.size // x.data.shape[-1]

    def backward(g):
        beta.accumulate(g.sum(axis=axes))
        gamma.accumulate((g * xhat).sum(axis=axes))
        dxhat = g * gamma.data
        if training:
            # exact gradient through the batch statistics (biased variance)
            dx = (
                dxhat
                - dxhat.mean(axis=axes)
                - xhat * (dxhat * xhat).mean(axis=axes)
            ) * inv_std
        else:
            dx = dxhat * inv_std
        x.accumulate(dx)

    out._backward = backward
    return out


class ParameterStore:
    """Named, shaped parameter tensors; shapes are fixed once added."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, data, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=trainable)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def trainable_items(self):
        return [(n, t) for n, t in self._entries.items() if t.requires_grad]

    def trainable_tensors(self) -> list:
        return [t for t in self._entries.values() if t.requires_grad]

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.grad = None


class RMSProp:
    """s <- rho * s + (1 - rho) * g^2;  w <- w - lr * g / sqrt(s + eps)."""

    def __init__(self, named_params, lr: float = 5e-5, rho: float = 0.9, eps: float = 1e-8):
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self._params = list(named_params)
        self.state = {name: np.zeros_like(t.data) for name, t in self._params}

    def step(self) -> None:
        for name, t in self._params:
            if t.grad is None:
                continue
            g = t.grad
            s = self.state[name]
            s *= self.rho
            s += (1.0 - self.rho) * g * g
            t.data -= self.lr * g / np.sqrt(s + self.eps)

    def load_state(self, state: dict) -> None:
        for name in self.state:
            self.state[name][...] = state[name]


def clip_params(tensors, c: float) -> None:
    """Clamp every entry of every tensor to [-c, c], in place."""
    if c <= 0.0:
        raise ValueError(f"clip bound must be positive, got {c}")
    for t in tensors:
        np.clip(t.data, -c, c, out=t.data)


def grad_check(fn, tensors, step: float = 1e-5) -> float:
    """Max relative error between fn's analytic gradients and central
    finite differences over every entry of the given tensors.

    fn takes no arguments, reads the tensors, and returns a scalar Tensor.
    The relative error is |ga - gn| / max(1e-12, |ga| + |gn|).
    """
    if step <= 0.0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    tensors = list(tensors)
    probe = fn().data.copy()
    if not np.array_equal(probe, fn().data):
        raise ValueError("function under test is not deterministic; disable dropout/rng")
    for t in tensors:
        t.grad = None
    loss = fn()
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]

    worst = 0.0
    for t, ga in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = float(fn().data)
            flat[i] = keep - step
            down = float(fn().data)
            flat[i] = keep
            gn = (up - down) / (2.0 * step)
            err = abs(ga_flat[i] - gn) / max(1e-12, abs(ga_flat[i]) + abs(gn))
            worst = max(worst, err)
    return worst
