"""Cooperative deadlines.

Long loops (pair processing, saturation chains, modular rounds) call
:func:`check` so a caller-set time budget interrupts them portably.
"""
from __future__ import annotations

import contextlib
import contextvars
import time

from .errors import DeadlineExceeded

_deadline: contextvars.ContextVar[float | None] = contextvars.ContextVar("moddiq_deadline", default=None)


def check() -> None:
    d = _deadline.get()
    if d is not None and time.monotonic() > d:
        raise DeadlineExceeded("time budget exhausted")


def remaining() -> float | None:
    d = _deadline.get()
    return None if d is None else d - time.monotonic()


@contextlib.contextmanager
def budget(seconds: float | None):
    """Run the body under a deadline ``seconds`` from now (``None`` = no limit).

    Nested budgets never extend an outer one.
    """
    if seconds is None:
        yield
        return
    new = time.monotonic() + seconds
    old = _deadline.get()
    if old is not None:
        new = min(new, old)
    token = _deadline.set(new)
    try:
        yield
    finally:
        _deadline.reset(token)
