"""Tests for teethseg-bench."""
