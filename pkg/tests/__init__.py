"""Tests for migration harness."""
