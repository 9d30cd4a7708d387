"""Dense tensors and the reverse-mode differentiation tape."""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

# A backward rule maps the output gradient to one gradient (or None) per input.
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """An n-d float array that can take part in a differentiation tape.

    Image tensors are laid out ``(batch, channel, height, width)``; parameters
    use whatever rank their op expects. ``data`` is float32 unless a float64
    array is passed with ``dtype=np.float64`` (the finite-difference path).
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = ""):
        dtype = DEFAULT_DTYPE if dtype is None else dtype
        self.data = np.ascontiguousarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape: Optional[Tape] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add

        return add(self, other)

    def __mul__(self, s: float) -> "Tensor":
        from .ops import scale

        return scale(self, s)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


class _Entry:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: Sequence[Tensor], backward: BackwardFn):
        self.out = out
        self.inputs = tuple(inputs)
        self.backward = backward


class Tape:
    """Ordered record of differentiable ops.

    Used as a context manager the tape becomes the recording target for the
    current thread; outside any context a per-thread default tape is used.
    """

    def __init__(self):
        self.entries: list[_Entry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __enter__(self) -> "Tape":
        _state().stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state().stack.pop()

    def record(self, out: Tensor, inputs: Sequence[Tensor], backward: BackwardFn) -> None:
        out._tape = self
        self.entries.append(_Entry(out, inputs, backward))

    def clear(self) -> None:
        for e in self.entries:
            e.out._tape = None
        self.entries.clear()

    def backward(self, loss: Tensor, retain_graph: bool = False) -> None:
        """Populate ``.grad`` of every requires-grad tensor reachable from ``loss``.

        Leaf gradients accumulate into existing buffers; the caller zeroes them
        between optimizer steps. Intermediate tensors get a fresh gradient.
        """
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ValueError("loss does not require grad; nothing to differentiate")
        pending: dict[int, tuple[Tensor, np.ndarray]] = {
            id(loss): (loss, np.ones_like(loss.data))
        }
        for entry in reversed(self.entries):
            hit = pending.pop(id(entry.out), None)
            if hit is None:
                continue
            out, g = hit
            out.grad = g
            in_grads = entry.backward(g)
            for inp, gi in zip(entry.inputs, in_grads):
                if gi is None or not inp.requires_grad:
                    continue
                prev = pending.get(id(inp))
                if prev is None:
                    pending[id(inp)] = (inp, gi)
                else:
                    pending[id(inp)] = (inp, prev[1] + gi)
        # whatever is left has no producing entry on this tape: leaves
        for leaf, g in pending.values():
            g = g.astype(leaf.data.dtype, copy=False)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
        if not retain_graph:
            self.clear()


class _ThreadState(threading.local):
    def __init__(self):
        self.stack: list[Tape] = [Tape()]
        self.grad_enabled = True


_local = _ThreadState()


def _state() -> _ThreadState:
    return _local


def current_tape() -> Tape:
    return _local.stack[-1]


def is_grad_enabled() -> bool:
    return _local.grad_enabled


@contextmanager
def no_grad():
    """Run ops without recording them (inference, label computation)."""
    prev = _local.grad_enabled
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = prev


def make_result(data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an op result and record it when any input needs a gradient."""
    needs = _local.grad_enabled and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs, dtype=data.dtype)
    if needs:
        current_tape().record(out, inputs, backward)
    return out


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Run the backward pass on the tape that recorded ``loss``."""
    tape = loss._tape if loss._tape is not None else current_tape()
    tape.backward(loss, retain_graph=retain_graph)
