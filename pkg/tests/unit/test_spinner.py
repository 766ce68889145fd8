"""Tests for the progress spinner in ringqed/spinner.py."""

import io

import pytest

from ringqed.spinner import Spinner


class TestSpinner:

    def test_silent_when_not_a_tty(self):
        stream = io.StringIO()
        with Spinner("Running scenario", stream=stream) as spinner:
            pass
        assert stream.getvalue() == ""
        assert spinner.elapsed >= 0.0

    def test_done_line_when_enabled(self):
        stream = io.StringIO()
        with Spinner("Running scenario", stream=stream, enabled=True):
            pass
        assert stream.getvalue().endswith("Running scenario done (0.0s).\n")

    def test_failed_line_on_exception(self):
        stream = io.StringIO()
        with pytest.raises(RuntimeError):
            with Spinner("Running scenario", stream=stream, enabled=True):
                raise RuntimeError("boom")
        assert stream.getvalue().endswith("Running scenario failed.\n")
