"""simkg: ontology-aligned knowledge graphs for atomistic simulation metadata."""

__version__ = "0.1.0"

SOFTWARE_NAME = "simkg"
