"""Tests for adaptgap."""
