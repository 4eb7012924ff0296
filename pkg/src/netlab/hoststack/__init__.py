"""Per-node IPv4 stack."""

from .arpcache import ArpCache, ArpEntry, ArpState
from .fragment import Reassembler, fragment
from .host import DEFAULT_TTL, FragmentationNeeded, Host, HostUnreachable
from .interface import MIN_MTU, Interface

__all__ = [
    "ArpCache", "ArpEntry", "ArpState", "Reassembler", "fragment", "DEFAULT_TTL",
    "FragmentationNeeded", "Host", "HostUnreachable", "MIN_MTU", "Interface",
]
