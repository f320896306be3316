"""Matrix-free canonicalization toolkit.

Fast linear transforms are packaged as forward-adjoint oracles, composed into DAGs with
mechanically derived adjoints, and used as the constraint operator of cone programs built
from disciplined convex problems.
"""

__version__ = "0.1.0"
