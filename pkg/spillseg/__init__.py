"""spillseg package namespace."""

__version__ = "0.1.0"
