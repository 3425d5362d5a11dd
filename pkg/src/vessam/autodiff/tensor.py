"""Tensor, Tape and reverse-mode backward pass."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import DetachedLoss, NotScalar


class Tensor:
    """Dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64, copy=True)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data if data.dtype == np.float64 else data.astype(np.float64)
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class TapeEntry:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Records differentiable operations executed inside ``with Tape():``."""

    def __init__(self):
        self.entries: list[TapeEntry] = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.entries)


_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


@contextmanager
def kink_monitor():
    """Collect the on/off pattern of every piecewise-linear op run inside."""
    log: list[np.ndarray] = []
    saved = getattr(_local, "kinks", None)
    _local.kinks = log
    try:
        yield log
    finally:
        _local.kinks = saved


def note_kinks(pattern: np.ndarray) -> None:
    log = getattr(_local, "kinks", None)
    if log is not None:
        log.append(pattern)


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def record(data: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    """Wrap ``data`` as the output of an op over ``inputs``.

    ``vjp(g)`` must return one gradient (or None) per input, each shaped like
    that input.  The op is appended to the active tape when some input
    requires grad.
    """
    needs = any(t.requires_grad for t in inputs)
    out = Tensor._wrap(np.asarray(data), needs)
    if needs:
        tape = active_tape()
        if tape is not None:
            tape.entries.append(TapeEntry(out, tuple(inputs), vjp))
    return out


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Accumulate d(loss)/dt into ``t.grad`` for every grad-requiring tensor on the tape."""
    tape = tape if tape is not None else active_tape()
    if loss.size != 1:
        raise NotScalar(f"loss must be a scalar, got shape {loss.shape}")
    if tape is None:
        raise DetachedLoss("no tape to differentiate through")
    last = None
    for k in range(len(tape.entries) - 1, -1, -1):
        if tape.entries[k].out is loss:
            last = k
            break
    if last is None:
        raise DetachedLoss("loss was not produced by an operation on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    touched: dict[int, Tensor] = {id(loss): loss}
    for entry in reversed(tape.entries[: last + 1]):
        g = grads.pop(id(entry.out), None)
        if g is None:
            continue
        for inp, gi in zip(entry.inputs, entry.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                touched[key] = inp
        # intermediate grads are kept on the tensor for inspection
        entry.out.grad = g if entry.out.grad is None else entry.out.grad + g
    for key, g in grads.items():
        t = touched[key]
        t.grad = g.copy() if t.grad is None else t.grad + g
