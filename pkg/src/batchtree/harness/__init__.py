"""Verification, fuzzing and benchmarking driver."""
