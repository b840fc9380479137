"""Test package: Integration tests."""
