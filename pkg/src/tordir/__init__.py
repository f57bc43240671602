"""Tor-style directory protocol under partial synchrony, with a network simulator."""

__version__ = "0.1.0"
