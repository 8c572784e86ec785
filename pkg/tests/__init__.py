"""Tests for statlin-access."""
