"""Export manifests: which checkpoint tensors map to which engine layers.

Plain-text format, one directive per line ('#' comments):

    base_width 64
    map <checkpoint tensor name> <engine tensor name> <dims, comma-separated>

Engine names follow the encoder convention enc.stageK.conv1.{weight,bias};
the expected shapes are fully determined by the base width (stage widths
are base*{1,2,4,8,8}, 3x3 kernels, RGB input), and the manifest's declared
shapes must agree with them so a bad mapping fails before any checkpoint
is read.
"""

from dataclasses import dataclass


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class MapEntry:
    source: str
    target: str
    shape: tuple


@dataclass
class ExportManifest:
    base_width: int
    entries: list

    def by_target(self):
        return {e.target: e for e in self.entries}


def required_layers(base_width):
    """Engine tensor name -> expected shape for the 5-stage encoder."""
    widths = [base_width, 2 * base_width, 4 * base_width, 8 * base_width, 8 * base_width]
    shapes = {}
    c_in = 3
    for k, c_out in enumerate(widths, start=1):
        shapes[f"enc.stage{k}.conv1.weight"] = (c_out, c_in, 3, 3)
        shapes[f"enc.stage{k}.conv1.bias"] = (c_out,)
        c_in = c_out
    return shapes


def parse_manifest(path):
    base_width = None
    entries = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "base_width":
                if len(parts) != 2:
                    raise ManifestError(f"{path}:{lineno}: base_width takes one value")
                base_width = int(parts[1])
            elif parts[0] == "map":
                if len(parts) != 4:
                    raise ManifestError(
                        f"{path}:{lineno}: expected 'map <source> <target> <dims>'"
                    )
                shape = tuple(int(d) for d in parts[3].split(","))
                entries.append(MapEntry(source=parts[1], target=parts[2], shape=shape))
            else:
                raise ManifestError(f"{path}:{lineno}: unknown directive {parts[0]!r}")
    if base_width is None:
        raise ManifestError(f"{path}: missing base_width directive")
    manifest = ExportManifest(base_width=base_width, entries=entries)
    validate_manifest(manifest)
    return manifest


def validate_manifest(manifest):
    required = required_layers(manifest.base_width)
    seen = {}
    for entry in manifest.entries:
        if entry.target not in required:
            raise ManifestError(f"manifest maps unknown engine layer {entry.target!r}")
        if entry.target in seen:
            raise ManifestError(f"engine layer {entry.target!r} mapped more than once")
        seen[entry.target] = entry
        expected = required[entry.target]
        if entry.shape != expected:
            raise ManifestError(
                f"manifest shape {entry.shape} for {entry.target!r} does not match "
                f"the engine's {expected} at base width {manifest.base_width}"
            )
    missing = sorted(set(required) - set(seen))
    if missing:
        raise ManifestError(f"manifest is missing engine layers: {', '.join(missing)}")
    return manifest
