import numpy as np

from stylenas_converter.manifest import required_layers

# torchvision-style source names for the five tapped convolutions
SOURCE_NAMES = {
    "enc.stage1.conv1": "features.0",
    "enc.stage2.conv1": "features.5",
    "enc.stage3.conv1": "features.10",
    "enc.stage4.conv1": "features.19",
    "enc.stage5.conv1": "features.28",
}


def write_manifest(path, base_width):
    lines = [f"base_width {base_width}"]
    for target, shape in required_layers(base_width).items():
        layer, kind = target.rsplit(".", 1)
        source = f"{SOURCE_NAMES[layer]}.{kind}"
        dims = ",".join(str(d) for d in shape)
        lines.append(f"map {source} {target} {dims}")
    path.write_text("\n".join(lines) + "\n")
    return path


def synthetic_checkpoint(base_width, seed=0):
    rng = np.random.default_rng(seed)
    tensors = {}
    for target, shape in required_layers(base_width).items():
        layer, kind = target.rsplit(".", 1)
        source = f"{SOURCE_NAMES[layer]}.{kind}"
        tensors[source] = rng.standard_normal(shape).astype(np.float32) * 0.1
    return tensors


def write_ppm(path, image):
    """Minimal P6 writer so the tests need nothing from the engine package."""
    quantized = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{image.shape[2]} {image.shape[1]}\n255\n".encode("ascii")
    path.write_bytes(header + quantized.transpose(1, 2, 0).tobytes())
