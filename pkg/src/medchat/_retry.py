"""Bounded retry loop with exponential backoff, shared by the remote adapters."""

from __future__ import annotations

import time
from typing import Callable, TypeVar

T = TypeVar("T")


def with_retries(
    call: Callable[[], T],
    *,
    attempts: int,
    base_delay: float,
    deadline: float,
    retryable: tuple[type[Exception], ...],
) -> T:
    """Run `call`, retrying on `retryable` errors.

    Waits base_delay, 2*base_delay, ... between attempts and gives up when
    either the attempt budget or the wall-clock deadline is exhausted.
    Re-raises the last error.
    """
    start = time.monotonic()
    delay = base_delay
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return call()
        except retryable as exc:
            last = exc
            if attempt + 1 >= attempts:
                break
            if time.monotonic() - start + delay > deadline:
                break
            time.sleep(delay)
            delay *= 2
    assert last is not None
    raise last
