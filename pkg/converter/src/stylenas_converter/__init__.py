"""Exports pretrained encoder checkpoints into the stylenas PNWT container."""

__version__ = "0.1.0"

from .convert import ConversionError, ConversionReport, convert, verify_written_file
from .manifest import ExportManifest, ManifestError, parse_manifest, required_layers

__all__ = [
    "ConversionError",
    "ConversionReport",
    "ExportManifest",
    "ManifestError",
    "convert",
    "parse_manifest",
    "required_layers",
    "verify_written_file",
    "__version__",
]
