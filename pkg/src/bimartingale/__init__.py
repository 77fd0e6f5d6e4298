"""Bi-martingale optimal transport for discrete measures."""
