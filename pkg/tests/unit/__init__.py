"""Unit tests for bklkit."""
