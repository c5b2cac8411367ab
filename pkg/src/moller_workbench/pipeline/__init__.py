"""Verification suites, their runner and validation gates."""
