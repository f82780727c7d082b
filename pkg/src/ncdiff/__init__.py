"""Exact differential calculi on finitely presented noncommutative algebras.

The package builds algebras from two-letter rewriting presentations, equips
them with diagonal first-order calculi twisted by automorphisms, and checks
the resulting structures (inner differential, square-zero, commutation
relations, metrics and connections) by exact symbolic computation.
"""

__version__ = "0.1.0"
