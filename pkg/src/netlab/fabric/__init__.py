"""Discrete-event medium: clock, links, learning switches and capture taps."""

from .link import DEFAULT_DELAY, DEFAULT_MTU, DEFAULT_RATE, CaptureTap, FrameTooLong, Link, Port
from .sim import MS, NS, SECOND, US, Event, Future, Queue, SchedulingError, Simulator, Task, seconds
from .switch import Switch

__all__ = [
    "DEFAULT_DELAY", "DEFAULT_MTU", "DEFAULT_RATE", "CaptureTap", "FrameTooLong", "Link", "Port",
    "MS", "NS", "SECOND", "US", "Event", "Future", "Queue", "SchedulingError", "Simulator", "Task",
    "seconds", "Switch",
]
