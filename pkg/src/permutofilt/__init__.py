"""permutofilt - learnable permutohedral lattice filters with exact gradients."""

from permutofilt.ops import FilterBank, LatticeOperators, Signal, build_operators, forward

__version__ = "0.1.0"
__all__ = ["FilterBank", "LatticeOperators", "Signal", "build_operators", "forward"]
