"""Tests for bklkit."""
