"""rnls-lab: numerical laboratory for the partially regularized NLS"""

__version__ = "1.0.0"
FORMAT_VERSION = "RNLS1"
