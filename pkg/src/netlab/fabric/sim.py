"""Deterministic event loop with integer-nanosecond virtual time.

Applications are ``async`` coroutines driven by :class:`Task`; awaiting a
:class:`Future` suspends the coroutine until the loop resolves it.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import random
from collections import deque
from typing import Any, Callable, Coroutine

NS = 1
US = 1_000
MS = 1_000_000
SECOND = 1_000_000_000


def seconds(value: float) -> int:
    return round(value * SECOND)


class SchedulingError(ValueError):
    pass


class Event:
    __slots__ = ("time", "seq", "fn", "args", "cancelled")

    def __init__(self, time: int, seq: int, fn: Callable, args: tuple):
        self.time = time
        self.seq = seq
        self.fn = fn
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: Event) -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class Simulator:
    def __init__(self, seed: int = 0):
        self.now = 0
        self.seed = seed
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self.trace: list[tuple[int, int, str]] | None = None

    def schedule(self, at: int, fn: Callable, *args) -> Event:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at} ns, clock is already at {self.now} ns")
        ev = Event(int(at), next(self._seq), fn, args)
        heapq.heappush(self._queue, ev)
        return ev

    def call_later(self, delay: int, fn: Callable, *args) -> Event:
        return self.schedule(self.now + delay, fn, *args)

    def call_soon(self, fn: Callable, *args) -> Event:
        return self.schedule(self.now, fn, *args)

    def pending(self) -> int:
        return sum(not ev.cancelled for ev in self._queue)

    def next_time(self) -> int | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].time if self._queue else None

    def step(self) -> bool:
        while self._queue:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = ev.time
            if self.trace is not None:
                self.trace.append((ev.time, ev.seq, getattr(ev.fn, "__qualname__", repr(ev.fn))))
            ev.fn(*ev.args)
            return True
        return False

    def run_until(self, t: int) -> None:
        """Execute every event with time <= t, then advance the clock to t."""
        while True:
            nxt = self.next_time()
            if nxt is None or nxt > t:
                break
            self.step()
        self.now = max(self.now, t)

    def run_to_completion(self, limit: int | None = None) -> None:
        while self.next_time() is not None:
            if limit is not None and self.next_time() > limit:
                break
            self.step()

    # -- randomness ---------------------------------------------------------

    def rng(self, name: str) -> random.Random:
        """Independent generator for ``name``, derived only from the seed."""
        digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    # -- coroutine support --------------------------------------------------

    def future(self) -> Future:
        return Future(self)

    def spawn(self, coro: Coroutine, name: str = "") -> Task:
        return Task(self, coro, name)

    def sleep(self, delay: int) -> Future:
        fut = Future(self)
        self.call_later(delay, fut.set_result, None)
        return fut

    def sleep_until(self, at: int) -> Future:
        fut = Future(self)
        self.schedule(max(at, self.now), fut.set_result, None)
        return fut

    async def wait_for(self, fut: Future, timeout: int) -> Any:
        """Await ``fut`` for at most ``timeout`` ns; raises TimeoutError."""
        if fut.done():
            return fut.result()
        gate = Future(self)
        timer = self.call_later(timeout, gate.set_exception, TimeoutError())
        fut.add_done_callback(lambda f: gate._resolve_from(f))
        try:
            return await gate
        finally:
            timer.cancel()


class Future:
    def __init__(self, sim: Simulator):
        self._sim = sim
        self._done = False
        self._result: Any = None
        self._exc: BaseException | None = None
        self._callbacks: list[Callable[[Future], None]] = []

    def done(self) -> bool:
        return self._done

    def result(self) -> Any:
        if not self._done:
            raise RuntimeError("future is not resolved yet")
        if self._exc is not None:
            raise self._exc
        return self._result

    def exception(self) -> BaseException | None:
        return self._exc

    def set_result(self, value: Any = None) -> None:
        if self._done:
            return
        self._result = value
        self._finish()

    def set_exception(self, exc: BaseException) -> None:
        if self._done:
            return
        self._exc = exc
        self._finish()

    def _resolve_from(self, other: Future) -> None:
        if other._exc is not None:
            self.set_exception(other._exc)
        else:
            self.set_result(other._result)

    def _finish(self) -> None:
        self._done = True
        callbacks, self._callbacks = self._callbacks, []
        # callbacks run as fresh events so resolution never re-enters the caller
        for cb in callbacks:
            self._sim.call_soon(cb, self)

    def add_done_callback(self, cb: Callable[[Future], None]) -> None:
        if self._done:
            self._sim.call_soon(cb, self)
        else:
            self._callbacks.append(cb)

    def __await__(self):
        if not self._done:
            yield self
        return self.result()


class Task(Future):
    def __init__(self, sim: Simulator, coro: Coroutine, name: str = ""):
        super().__init__(sim)
        self.name = name
        self._coro = coro
        sim.call_soon(self._step, None, None)

    def _step(self, value: Any, exc: BaseException | None) -> None:
        try:
            if exc is not None:
                awaited = self._coro.throw(exc)
            else:
                awaited = self._coro.send(value)
        except StopIteration as stop:
            self.set_result(stop.value)
            return
        except Exception as err:  # noqa: BLE001 - surfaced through the task result
            self.set_exception(err)
            return
        if not isinstance(awaited, Future):
            self._coro.throw(TypeError(f"tasks may only await simulator futures, got {awaited!r}"))
        awaited.add_done_callback(self._wakeup)

    def _wakeup(self, fut: Future) -> None:
        if fut._exc is not None:
            self._step(None, fut._exc)
        else:
            self._step(fut._result, None)


class Queue:
    """FIFO whose ``get`` suspends the calling task until an item arrives."""

    def __init__(self, sim: Simulator):
        self._sim = sim
        self._items: deque = deque()
        self._waiters: deque[Future] = deque()

    def __len__(self) -> int:
        return len(self._items)

    def put(self, item: Any) -> None:
        while self._waiters:
            waiter = self._waiters.popleft()
            if not waiter.done():
                waiter.set_result(item)
                return
        self._items.append(item)

    def get_nowait(self) -> Any:
        if not self._items:
            raise IndexError("queue is empty")
        return self._items.popleft()

    async def get(self, timeout: int | None = None) -> Any:
        """Next item; raises TimeoutError after ``timeout`` ns if given."""
        if self._items:
            return self._items.popleft()
        fut = Future(self._sim)
        self._waiters.append(fut)
        timer = None
        if timeout is not None:
            timer = self._sim.call_later(timeout, fut.set_exception, TimeoutError())
        try:
            return await fut
        finally:
            if timer is not None:
                timer.cancel()
