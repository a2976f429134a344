"""Pulse-coupled oscillator synchronization on chain and directed-tree graphs."""
