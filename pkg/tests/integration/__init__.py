"""Integration tests for the bklkit command line and invariants."""
