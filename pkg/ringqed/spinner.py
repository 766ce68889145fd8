"""Animated spinner for long-running operations."""

import sys
import threading
import time
from typing import Optional


class Spinner:
    """Context manager that shows an animated spinner with a message.

    Stays silent when the stream is not a terminal, so piped output and
    captured test output carry only the results.
    """

    FRAMES = "⠋⠙⠹⠸⠼⠴⠦⠧⠇⠏"

    def __init__(self, message: str, stream=None, enabled: Optional[bool] = None):
        self.message = message
        self.stream = stream or sys.stderr
        if enabled is None:
            enabled = hasattr(self.stream, "isatty") and self.stream.isatty()
        self.enabled = enabled
        self.elapsed = 0.0
        self._stop = threading.Event()
        self._thread = None
        self._start = 0.0

    def __enter__(self):
        self._start = time.monotonic()
        if self.enabled:
            self._thread = threading.Thread(target=self._spin, daemon=True)
            self._thread.start()
        return self

    def __exit__(self, exc_type, *args):
        self.elapsed = time.monotonic() - self._start
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join()
        status = "failed" if exc_type else f"done ({self.elapsed:.1f}s)"
        self.stream.write(f"\r\033[K{self.message} {status}.\n")
        self.stream.flush()

    def _spin(self):
        i = 0
        while not self._stop.is_set():
            frame = self.FRAMES[i % len(self.FRAMES)]
            self.stream.write(f"\r\033[K{frame} {self.message}")
            self.stream.flush()
            i += 1
            time.sleep(0.08)
