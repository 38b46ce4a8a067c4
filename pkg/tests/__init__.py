"""
Tests for automaton-aag.
"""
