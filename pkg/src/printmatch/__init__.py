"""Printing-design to product-photo matching toolkit."""

__version__ = "0.1.0"

from .metrics import ncc  # noqa: F401
from .model import DatasetManifest, Ranking, load_manifest, save_manifest  # noqa: F401
