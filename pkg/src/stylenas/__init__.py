"""Photorealistic style transfer engine with evolutionary architecture pruning.

Subpackages: ``tensor`` (array substrate + eigensolver), ``nn`` (CNN op
set with exact gradients), ``transfer`` (whitening-coloring and AdaIN
feature transfers), ``arch`` (31-bit architecture space), ``train``
(decoder reconstruction training), ``metrics`` (SSIM / Gram / search
objectives), ``nas`` (evolutionary pruning search), ``io`` (file formats),
``cli`` (command line).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
