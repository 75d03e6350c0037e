#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
L2T-Reflect: learn a reflection function from recorded transfer-learning
experiences, then infer the latent factor matrix W for a new domain pair.
"""

from L2T.miscellaneous import __version__

__all__ = [
    "__version__",
    "kernels",
    "stats",
    "factors",
    "reflection",
    "inference",
    "pipeline",
    "storage",
    "core",
]
