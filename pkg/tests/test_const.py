"""Tests for size guard configuration."""

import pytest

from modcsp.const import GUARD_ENV_VAR, guard_limit
from modcsp.exceptions import ConfigurationError


def test_guard_limit_default(monkeypatch):
    """Should return the default when the variable is unset."""
    monkeypatch.delenv(GUARD_ENV_VAR, raising=False)
    assert guard_limit(8) == 8


def test_guard_limit_blank_is_default(monkeypatch):
    """Should treat an empty value as unset."""
    monkeypatch.setenv(GUARD_ENV_VAR, "  ")
    assert guard_limit(8) == 8


def test_guard_limit_multiplier(monkeypatch):
    """Should multiply the default by a positive integer."""
    monkeypatch.setenv(GUARD_ENV_VAR, "3")
    assert guard_limit(8) == 24


@pytest.mark.parametrize("value", ["off", "OFF", "0"])
def test_guard_limit_disabled(monkeypatch, value):
    """Should disable the guard for off or 0."""
    monkeypatch.setenv(GUARD_ENV_VAR, value)
    assert guard_limit(8) is None


@pytest.mark.parametrize("value", ["lots", "-2", "1.5"])
def test_guard_limit_rejects_garbage(monkeypatch, value):
    """Should raise ConfigurationError for values it does not understand."""
    monkeypatch.setenv(GUARD_ENV_VAR, value)
    with pytest.raises(ConfigurationError):
        guard_limit(8)
