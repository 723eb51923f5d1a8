"""Vine copulas organized around the vine computational graph."""
