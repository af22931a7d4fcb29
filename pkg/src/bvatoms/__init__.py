"""Atomic decomposition of discrete BV functions on regular grids."""
