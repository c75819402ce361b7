"""Angular multigrid preconditioning for discontinuous Galerkin transport.

Submodules are imported on demand so the command line can set BLAS thread
counts before numpy loads.
"""

__version__ = "0.1.0"
