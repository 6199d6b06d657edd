"""Cross-language synchronization of entity-centric tables and its evaluation stack."""

__version__ = "0.1.0"
