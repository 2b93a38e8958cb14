"""Dynamic symbolic execution for a small register machine and EVM bytecode."""

__version__ = "0.1.0"
