"""Shared store for the one-line acceptance verdicts printed at session end."""

RESULTS: list[str] = []
