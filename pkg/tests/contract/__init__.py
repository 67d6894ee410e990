"""Contract tests for bklkit file formats and reports."""
