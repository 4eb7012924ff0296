from __future__ import annotations

EPHEMERAL_LOW = 49152
EPHEMERAL_HIGH = 65535


class AddressInUse(OSError):
    def __init__(self, port: int):
        super().__init__(f"bind: Address already in use (port {port})")
        self.port = port


class PortAllocator:
    """Per-host ephemeral port counter shared by UDP and TCP."""

    def __init__(self):
        self._next = EPHEMERAL_LOW

    def allocate(self, in_use) -> int:
        span = EPHEMERAL_HIGH - EPHEMERAL_LOW + 1
        for _ in range(span):
            port = self._next
            self._next = EPHEMERAL_LOW + (self._next - EPHEMERAL_LOW + 1) % span
            if not in_use(port):
                return port
        raise OSError("no free ephemeral port")
