"""Attack-resilient containment control for heterogeneous linear multi-agent systems."""
__version__ = "0.1.0"
