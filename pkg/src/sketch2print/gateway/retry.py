"""Retry loop and per-provider rate limiting.

Sleeping happens in the calling thread with no lock held, so a slow retry
never stalls unrelated calls.
"""

from __future__ import annotations

import random
import threading
import time
from collections.abc import Callable
from typing import TypeVar

from ..errors import ProviderError
from .types import RetryPolicy

T = TypeVar("T")


def call_with_retry(
    fn: Callable[[], T],
    policy: RetryPolicy,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
    attempts_out: list[int] | None = None,
) -> T:
    """Call `fn` until it succeeds or the policy is exhausted.

    Only retryable ProviderErrors are retried; SafetyRejected and Malformed
    propagate after the first attempt. `attempts_out`, when given, receives
    the number of attempts actually made (single-element list).
    """
    rng = rng if rng is not None else random.Random()
    attempts = 0
    try:
        while True:
            attempts += 1
            try:
                return fn()
            except ProviderError as err:
                if not err.retryable or attempts >= policy.max_attempts:
                    raise
                jitter = rng.uniform(-1.0, 1.0)
                sleep(policy.delay_ms(attempts, jitter) / 1000.0)
    finally:
        if attempts_out is not None:
            attempts_out.append(attempts)


class TokenBucket:
    """Classic token bucket; acquire() blocks until a token is available.

    capacity tokens max, refilled at rate_per_second. A rate of 0 disables
    limiting entirely.
    """

    def __init__(
        self,
        capacity: float,
        rate_per_second: float,
        *,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.capacity = float(capacity)
        self.rate = float(rate_per_second)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self, tokens: float = 1.0) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                self._refill()
                if self._tokens >= tokens:
                    self._tokens -= tokens
                    return
                wait = (tokens - self._tokens) / self.rate
            # Sleep outside the lock so other callers keep moving.
            self._sleep(wait)
