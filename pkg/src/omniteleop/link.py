"""Communication link between station and vehicle: delay, jitter, reordering.

The link is modeled per tick: the value sent at tick i becomes visible
at its release tick R[i] = i + max(0, round-up((delay + jitter_i)/dt)),
and the receiver holds the value of the message delivered last, where
delivery follows lexicographic (release tick, send tick) order. That is
exactly the behavior of a priority queue drained once per tick, so
out-of-order releases caused by jitter are re-sorted into a monotone
delivery schedule and a stale message can never overwrite a fresher one
released at the same instant.

Because release ticks never depend on simulated values, the whole
delivery schedule is resolved here, ahead of the physics run, into one
"winning send index" per tick, which the stepping kernels consume as a
plain array lookup. Jitter is sampled once per tick as an interleaved
(forward, return) pair so that chunked and single-shot runs consume the
generator identically.

Direction asymmetry: the forward value of tick k is sent before that
tick's receive (references are generated, then used), so with zero
delay it arrives the same tick. The return value of tick k is sent
after the receive, so the earliest it can arrive is tick k+1.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

# ticks; bounds the in-flight span so kernels can use fixed ring buffers
MAX_DELAY_TICKS = 60_000


@dataclass(frozen=True, slots=True)
class LinkModel:
    """Per-direction transport delay plus shared gaussian jitter."""

    forward_delay: float = 0.0
    return_delay: float = 0.0
    jitter_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.forward_delay < 0.0 or self.return_delay < 0.0:
            raise ValueError("link delays must be >= 0")
        if self.jitter_std < 0.0:
            raise ValueError("jitter stddev must be >= 0")

    @property
    def is_transparent(self) -> bool:
        return self.forward_delay == 0.0 and self.return_delay == 0.0 and self.jitter_std == 0.0


def sample_jitter(link: LinkModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, 2) jitter seconds: column 0 forward, column 1 return.

    Zero-jitter links consume no randomness, so enabling jitter is the
    only thing that moves the stream. Row-major sampling makes chunked
    per-tick draws bit-identical to one batch draw.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if link.jitter_std == 0.0:
        return np.zeros((n, 2))
    return rng.normal(0.0, link.jitter_std, size=(n, 2))


def release_ticks(send_ticks: np.ndarray, delay: float, jitter: np.ndarray, dt: float) -> np.ndarray:
    """Release tick per message: send + ceil((delay + jitter)/dt), floored at 0.

    The 1e-9 nudge keeps an exact multiple of dt from rounding up one
    extra tick when the division lands a hair above an integer.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    lag = np.maximum(0.0, np.ceil((delay + jitter) / dt - 1e-9)).astype(np.int64)
    lag = np.minimum(lag, MAX_DELAY_TICKS)
    return send_ticks.astype(np.int64) + lag


def resolve_forward(release: np.ndarray, n: int) -> np.ndarray:
    """Winning send index per tick for the station-to-vehicle direction.

    At tick k the message sent at k is enqueued first, then everything
    with release <= k is drained; -1 means nothing has arrived yet.
    """
    return _resolve(release, n, send_visible_same_tick=True)


def resolve_return(release: np.ndarray, n: int) -> np.ndarray:
    """Winning send index per tick for the vehicle-to-station direction.

    The drain at tick k happens before tick k's value exists, so only
    sends < k participate; zero delay therefore lands at k+1, giving the
    loop its one-tick minimum feedback latency.
    """
    return _resolve(release, n, send_visible_same_tick=False)


class _Channel:
    """One direction's delivery state: pending heap plus last-held send."""

    __slots__ = ("heap", "held", "send_visible_same_tick")

    def __init__(self, send_visible_same_tick: bool):
        self.heap: list[tuple[int, int]] = []
        self.held = -1
        self.send_visible_same_tick = send_visible_same_tick

    def step(self, k: int, release: int | None) -> int:
        """Advance one tick; release is this tick's send, None if silent."""
        if self.send_visible_same_tick and release is not None:
            heapq.heappush(self.heap, (release, k))
        while self.heap and self.heap[0][0] <= k:
            _, self.held = heapq.heappop(self.heap)
        out = self.held
        if not self.send_visible_same_tick and release is not None:
            heapq.heappush(self.heap, (release, k))
        return out


def _resolve(release: np.ndarray, n: int, send_visible_same_tick: bool) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    ch = _Channel(send_visible_same_tick)
    for k in range(n):
        out[k] = ch.step(k, int(release[k]) if k < len(release) else None)
    return out


class LinkPlanner:
    """Delivery planning that can grow the horizon while a run is live.

    Keeps both direction heaps and the jitter stream across calls, so
    consecutive ``extend`` chunks produce exactly the winners a single
    batch plan over the whole horizon would. The streaming service plans
    one tick at a time; headless runs plan everything up front.
    """

    __slots__ = ("link", "dt", "rng", "_tick", "_fwd", "_ret")

    def __init__(self, link: LinkModel, dt: float, rng: np.random.Generator | None = None):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.link = link
        self.dt = dt
        self.rng = rng if rng is not None else np.random.default_rng(link.seed)
        self._tick = 0
        self._fwd = _Channel(send_visible_same_tick=True)
        self._ret = _Channel(send_visible_same_tick=False)

    def extend(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Winners for the next n ticks: (forward, return), int64 each."""
        if n < 0:
            raise ValueError("n must be >= 0")
        t0 = self._tick
        jitter = sample_jitter(self.link, n, self.rng)
        sends = np.arange(t0, t0 + n, dtype=np.int64)
        rel_f = release_ticks(sends, self.link.forward_delay, jitter[:, 0], self.dt)
        rel_r = release_ticks(sends, self.link.return_delay, jitter[:, 1], self.dt)
        fwd = np.empty(n, dtype=np.int64)
        ret = np.empty(n, dtype=np.int64)
        for j in range(n):
            k = t0 + j
            fwd[j] = self._fwd.step(k, int(rel_f[j]))
            ret[j] = self._ret.step(k, int(rel_r[j]))
        self._tick = t0 + n
        return fwd, ret


def plan_link(
    link: LinkModel, n: int, dt: float, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Full delivery plan for an n-tick run: (forward winners, return winners)."""
    return LinkPlanner(link, dt, rng).extend(n)
