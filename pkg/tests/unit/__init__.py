"""Test package: Unit tests."""
