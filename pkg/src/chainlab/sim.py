"""Deterministic discrete-event engine.

A single :class:`Simulator` owns the clock and the event queue.  Events are
ordered by ``(fire_at, seq)`` where ``seq`` is a per-run insertion counter, so
two runs that schedule the same events in the same order process them in the
same order.  Randomness comes from :class:`RngStreams`, which hands out one
independent generator per named stream.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class PastEvent(ValueError):
    """Raised when an event is scheduled before the current clock."""


class NonPositiveRate(ValueError):
    """Raised when an exponential draw is requested with rate <= 0."""


class EventKind(enum.Enum):
    BLOCK_FOUND = "BlockFound"
    MSG_ARRIVAL = "MsgArrival"
    MARKET_TICK = "MarketTick"
    ATTACK_PHASE = "AttackPhase"
    CONFIRMER_ACTION = "ConfirmerAction"
    DIFFICULTY_RETARGET = "DifficultyRetarget"


@dataclass(order=True)
class SimEvent:
    fire_at: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self) -> None:
        self.cancelled = True


Handler = Callable[[SimEvent], None]


class Simulator:
    """Global clock plus priority queue of :class:`SimEvent`.

    Handlers are registered per :class:`EventKind`.  An event may also carry
    its own callback in ``payload`` when it is a callable; that is the form
    used by most of the higher layers.
    """

    def __init__(self) -> None:
        self.now = 0.0
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self.processed = 0
        self.log: list[tuple[float, int, str]] | None = None

    def __len__(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: float, kind: EventKind, payload: Any = None) -> SimEvent:
        if fire_at < self.now:
            raise PastEvent(f"fire_at={fire_at} is before now={self.now}")
        ev = SimEvent(float(fire_at), self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: float, kind: EventKind, payload: Any = None) -> SimEvent:
        return self.schedule(self.now + delay, kind, payload)

    def peek_time(self) -> float | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].fire_at if self._queue else None

    def step(self) -> SimEvent | None:
        while self._queue:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            self._dispatch(ev)
            return ev
        return None

    def _dispatch(self, ev: SimEvent) -> None:
        self.processed += 1
        if self.log is not None:
            self.log.append((ev.fire_at, ev.seq, ev.kind.value))
        if callable(ev.payload):
            ev.payload()
            return
        handler = self._handlers.get(ev.kind)
        if handler is not None:
            handler(ev)

    def run_until(self, t_end: float, stop: Callable[[], bool] | None = None) -> int:
        """Process every event with ``fire_at <= t_end``; return how many ran.

        ``stop`` is checked after each event; when it returns true the run
        halts early and the clock stays at the last processed event.
        """
        if t_end < self.now:
            raise PastEvent(f"t_end={t_end} is before now={self.now}")
        count = 0
        q = self._queue
        while q:
            ev = q[0]
            if ev.cancelled:
                heapq.heappop(q)
                continue
            if ev.fire_at > t_end:
                break
            heapq.heappop(q)
            self.now = ev.fire_at
            self._dispatch(ev)
            count += 1
            if stop is not None and stop():
                return count
        self.now = t_end
        return count


def _stream_key(stream_id: str) -> list[int]:
    digest = hashlib.sha256(stream_id.encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


class RngStreams:
    """Named, independent PCG64 generators derived from one master seed.

    The stream for ``(master_seed, stream_id)`` depends on nothing else, so
    adding an actor never shifts the draws of another.
    """

    def __init__(self, master_seed: int) -> None:
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def __call__(self, stream_id: str) -> np.random.Generator:
        gen = self._streams.get(stream_id)
        if gen is None:
            ss = np.random.SeedSequence([self.master_seed & 0xFFFFFFFFFFFFFFFF, *_stream_key(stream_id)])
            gen = np.random.Generator(np.random.PCG64(ss))
            self._streams[stream_id] = gen
        return gen


def sample_exponential(stream: np.random.Generator, rate: float) -> float:
    """Waiting time of a Poisson process with ``rate`` events per second."""
    if not rate > 0:
        raise NonPositiveRate(f"rate must be positive, got {rate}")
    return float(stream.exponential(1.0 / rate))
