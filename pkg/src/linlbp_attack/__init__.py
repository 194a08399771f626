"""Structural evasion attacks on LinLBP collective classification."""
