"""Compressed-domain video analytics cascade.

Stage 1 detects and tracks moving blobs directly on encoder metadata, stage 2
picks cheap-to-decode anchor frames per GoP, stage 3 attaches detector labels
and propagates them along tracks; a query engine answers temporal and spatial
queries over the persisted per-frame results.
"""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
