"""Hard-exploration lock MDPs, an obfuscating environment interface and the solvers compared on them."""

__version__ = "0.1.0"
