"""
plansyntax

Space-syntax scoring of raster floor plans and oracle-guided post-training of a toy diffusion layout policy.

    >>> from plansyntax.oracle import analyze_png
    >>> from plansyntax.screening import selection_score
"""

from importlib.metadata import PackageNotFoundError, version  # pragma: no cover

try:
    # Change here if project is renamed and does not equal the package name
    dist_name = __name__
    __version__ = version(dist_name)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"
finally:
    del version, PackageNotFoundError
