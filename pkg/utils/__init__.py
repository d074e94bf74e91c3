"""Exact p-adic continued fraction engine: digits, quadratic fields, expansions, theory checks."""
