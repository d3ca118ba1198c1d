"""Experience containers: FIFO replay ring for the control tasks, n-step
segments and a bounded queue for the multi-agent learner."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, UsageError


@dataclass
class Transition:
    """One step of experience, tagged with the episode's behaviour level.

    Control: ``state``/``next_state`` are feature vectors and ``action`` is an
    action id at the tag level. Multi-agent: states are (features, alive,
    group_index) triples and ``action`` holds one order per group at the tag
    level (-1 on empty groups)."""

    state: object
    action: object
    reward: float
    next_state: object
    done: bool
    level: int


class ReplayBuffer:
    """Ring buffer with strictly FIFO eviction and uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < batch_size:
            raise UsageError("not enough transitions to sample a batch")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def __contains__(self, transition: Transition) -> bool:
        return any(t is transition for t in self._items)


@dataclass
class NStepSegment:
    """Up to n consecutive same-episode transitions; shorter only at episode
    termination. Every state in the segment bootstraps from the state after
    the final transition (unless that transition ended the episode)."""

    transitions: list[Transition]

    @property
    def level(self) -> int:
        return self.transitions[0].level

    @property
    def done(self) -> bool:
        return self.transitions[-1].done

    def __len__(self) -> int:
        return len(self.transitions)


def segment_episode(transitions: list[Transition], n: int) -> list[NStepSegment]:
    """Chop one episode into consecutive n-step segments; the tail segment may
    be shorter because the episode terminated."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not transitions:
        return []
    if any(t.done for t in transitions[:-1]):
        raise UsageError("episode has an interior terminal transition")
    return [
        NStepSegment(transitions=transitions[i : i + n])
        for i in range(0, len(transitions), n)
    ]


class SegmentQueue:
    """Bounded FIFO of segments. ``put`` blocks when full and ``take`` blocks
    until a full batch is available (threaded actors); the serial trainer
    polls ``ready`` instead and never fills the queue."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[NStepSegment] = []
        self._lock = threading.Condition()
        self._closed = False

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._lock.notify_all()

    def put(self, segment: NStepSegment) -> None:
        with self._lock:
            while len(self._items) >= self.capacity and not self._closed:
                self._lock.wait()
            if self._closed:
                return
            self._items.append(segment)
            self._lock.notify_all()

    def ready(self, batch_size: int) -> bool:
        with self._lock:
            return len(self._items) >= batch_size

    def take(self, batch_size: int, block: bool = False) -> list[NStepSegment] | None:
        """Remove and return the oldest ``batch_size`` segments; consumed
        segments never reappear."""
        with self._lock:
            if block:
                while len(self._items) < batch_size and not self._closed:
                    self._lock.wait()
            if len(self._items) < batch_size:
                return None
            batch = self._items[:batch_size]
            del self._items[:batch_size]
            self._lock.notify_all()
            return batch
