"""Architecture encoding/decoding and execution of decoded networks.

A 31-bit code selects which prunable decoder operators of the maximal
auto-encoder are active. The 5-stage encoder is identical for every code;
an all-zeros code still decodes to a working image-to-image network
(per-stage conv+relu+upsample plus an output conv), and the all-ones code
is the fully equipped network with bottleneck feature aggregation, four
normalized skip links, and nine feature-transfer sites.

Slot map (canonical to this engine):
  S0-S3   bottleneck aggregation branches from encoder stages 1-4
  S4      transfer at the bottleneck
  S5-S8   skip links at levels 1-4
  S9-S12  instance norm on skip links 1-4 (inert unless the link is on)
  S13-S16 transfer on skip links 1-4 (inert unless the link is on)
  S17-S20 transfer at decoder stage outputs 1-4
  S21-S24 first auxiliary conv+relu per decoder stage
  S25-S28 second auxiliary conv+relu per decoder stage
  S29     instance norm on the bottleneck aggregate
  S30     output refinement conv
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import CodeParseError, DimensionError, InputError, PreconditionError
from .tensor import REAL
from .transfer import TransferConfig, apply_transfer, prepare_style_side

CODE_LENGTH = 31
SPATIAL_MULTIPLE = 16  # four 2x2 pooling stages
DEFAULT_ENCODER_SEED = 7113


SLOT_NAMES = (
    "bfa.branch1",
    "bfa.branch2",
    "bfa.branch3",
    "bfa.branch4",
    "bottleneck.transfer",
    "skip1.link",
    "skip2.link",
    "skip3.link",
    "skip4.link",
    "skip1.norm",
    "skip2.norm",
    "skip3.norm",
    "skip4.norm",
    "skip1.transfer",
    "skip2.transfer",
    "skip3.transfer",
    "skip4.transfer",
    "dec.stage1.transfer",
    "dec.stage2.transfer",
    "dec.stage3.transfer",
    "dec.stage4.transfer",
    "dec.stage1.aux1",
    "dec.stage2.aux1",
    "dec.stage3.aux1",
    "dec.stage4.aux1",
    "dec.stage1.aux2",
    "dec.stage2.aux2",
    "dec.stage3.aux2",
    "dec.stage4.aux2",
    "bottleneck.norm",
    "out.refine",
)

# slot -> the skip-link slot it depends on; inert no-ops when the parent is off
DEPENDENT_SLOTS = {9: 5, 10: 6, 11: 7, 12: 8, 13: 5, 14: 6, 15: 7, 16: 8}


@dataclass(frozen=True)
class ArchCode:
    bits: tuple

    def __post_init__(self):
        if len(self.bits) != CODE_LENGTH or not all(b in (False, True) for b in self.bits):
            raise CodeParseError(f"a code needs exactly {CODE_LENGTH} boolean bits")

    def __str__(self):
        return "".join("1" if b else "0" for b in self.bits)

    def popcount(self):
        return sum(self.bits)

    def flip(self, position):
        bits = list(self.bits)
        bits[position] = not bits[position]
        return ArchCode(bits=tuple(bits))

    def is_subset_of(self, other):
        return all((not a) or b for a, b in zip(self.bits, other.bits))


def parse_code(s):
    if len(s) != CODE_LENGTH:
        raise CodeParseError(
            f"architecture code must be {CODE_LENGTH} characters, got {len(s)}", position=-1
        )
    for i, ch in enumerate(s):
        if ch not in "01":
            raise CodeParseError(f"invalid character {ch!r} at index {i}", position=i)
    return ArchCode(bits=tuple(ch == "1" for ch in s))


def random_code(rng):
    return ArchCode(bits=tuple(bool(b) for b in rng.integers(0, 2, CODE_LENGTH)))


def hamming(a, b):
    return sum(x != y for x, y in zip(a.bits, b.bits))


def op_fraction(code):
    return code.popcount() / CODE_LENGTH


PHOTONAS_CODE = "0101000000100000000000000001111"

# best popcount-5 / popcount-9 codes from a desk-scale search run
# (population 20, budget 400, tournament 8, seed 1, width-4 evaluation)
STYLENAS_5OPT_CODE = "0001100000000000000000000010101"
STYLENAS_9OPT_CODE = "0101110000110000010000000010001"

PRESETS = {
    "photonet": "1" * CODE_LENGTH,
    "photonas": PHOTONAS_CODE,
    "stylenas-7opt": PHOTONAS_CODE,
    "stylenas-5opt": STYLENAS_5OPT_CODE,
    "stylenas-9opt": STYLENAS_9OPT_CODE,
}


def resolve_code(text):
    """Parse a 31-char code or look up a preset name."""
    if text in PRESETS:
        return parse_code(PRESETS[text])
    return parse_code(text)


# --- fixed encoder -----------------------------------------------------------


def _orthogonal_conv_init(rng, c_out, c_in, gain):
    k = c_in * 9
    if c_out <= k:
        a = rng.standard_normal((k, c_out))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        w2 = q.T
    else:
        a = rng.standard_normal((c_out, k))
        q, r = np.linalg.qr(a)
        w2 = q * np.sign(np.diag(r))
    return (gain * w2).reshape(c_out, c_in, 3, 3).astype(REAL)


class Encoder:
    """Fixed 5-stage conv pyramid; stage k taps carry width base*{1,2,4,8,8}."""

    def __init__(self, base_width, layers):
        self.base_width = base_width
        self.layers = layers

    @property
    def widths(self):
        c = self.base_width
        return [c, 2 * c, 4 * c, 8 * c, 8 * c]

    @classmethod
    def seeded(cls, base_width, seed=DEFAULT_ENCODER_SEED):
        if base_width < 2:
            raise PreconditionError("base_width must be >= 2")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        widths = [base_width, 2 * base_width, 4 * base_width, 8 * base_width, 8 * base_width]
        layers = []
        c_in = 3
        for c_out in widths:
            w = _orthogonal_conv_init(rng, c_out, c_in, gain=np.sqrt(2.0))
            layers.append(nn.ConvLayer(weights=w, bias=np.zeros(c_out, REAL)))
            c_in = c_out
        return cls(base_width, layers)

    @classmethod
    def from_params(cls, base_width, params):
        layers = []
        c_in = 3
        widths = [base_width, 2 * base_width, 4 * base_width, 8 * base_width, 8 * base_width]
        for k, c_out in enumerate(widths, start=1):
            name = f"enc.stage{k}.conv1"
            try:
                w = params[f"{name}.weight"]
                b = params[f"{name}.bias"]
            except KeyError as exc:
                raise InputError(f"weights are missing encoder tensor {exc.args[0]}") from None
            if w.shape != (c_out, c_in, 3, 3):
                raise InputError(
                    f"{name}.weight has shape {tuple(w.shape)}, expected {(c_out, c_in, 3, 3)}"
                )
            layers.append(nn.ConvLayer(weights=w, bias=b))
            c_in = c_out
        return cls(base_width, layers)

    def params(self):
        out = {}
        for k, layer in enumerate(self.layers, start=1):
            out[f"enc.stage{k}.conv1.weight"] = layer.weights
            out[f"enc.stage{k}.conv1.bias"] = layer.bias
        return out

    def encode(self, image):
        """Image (3, H, W) -> the five per-stage relu taps."""
        taps = []
        x = image
        for k, layer in enumerate(self.layers):
            if k > 0:
                x = nn.maxpool2(x).pooled
            x = nn.relu(nn.conv_forward(layer, x))
            taps.append(x)
        return taps


# --- decoded graph -----------------------------------------------------------


@dataclass(frozen=True)
class Node:
    op: str
    inputs: tuple
    label: str
    param: str = None
    site: int = None
    ref: int = None


@dataclass
class NetworkGraph:
    code: ArchCode
    base_width: int
    encoder: Encoder
    program: list
    params: dict
    channels: dict
    transfer_sites: list
    active_slots: tuple
    out_node: int
    final_node: int

    @property
    def op_labels(self):
        return frozenset(n.label for n in self.program if n.op != "input")

    def layer(self, name):
        return nn.ConvLayer(weights=self.params[f"{name}.weight"], bias=self.params[f"{name}.bias"])

    def all_params(self):
        merged = dict(self.encoder.params())
        merged.update(self.params)
        return merged


def build_graph(code, base_width=8, encoder=None, decoder_seed=0):
    """Decode a 31-bit code into an executable auto-encoder graph."""
    if base_width < 2:
        raise PreconditionError("base_width must be >= 2")
    if encoder is None:
        encoder = Encoder.seeded(base_width)
    if encoder.base_width != base_width:
        raise PreconditionError(
            f"encoder base width {encoder.base_width} != requested {base_width}"
        )

    bits = code.bits
    c = base_width
    widths = encoder.widths

    program = []
    channels = {}
    conv_shapes = {}
    transfer_sites = []

    def add(op, inputs, label, ch, param=None, site=None, ref=None):
        program.append(Node(op=op, inputs=tuple(inputs), label=label, param=param, site=site, ref=ref))
        idx = len(program) - 1
        channels[idx] = ch
        return idx

    def add_transfer(prev, label, ch):
        site = len(transfer_sites)
        idx = add("transfer", (prev,), label, ch, site=site)
        transfer_sites.append((label, idx))
        return idx

    def add_conv_relu(prev, name, c_out, c_in):
        conv_shapes[name] = (c_out, c_in)
        i = add("conv", (prev,), f"{name}.conv", c_out, param=name)
        return add("relu", (i,), f"{name}.relu", c_out)

    taps = [add("input", (), f"enc.tap{k + 1}", widths[k]) for k in range(5)]

    cur = taps[4]
    branches = [k for k in range(4) if bits[k]]
    if branches:
        parts = [cur]
        part_ch = widths[4]
        for k in branches:
            r = add("resize_like", (taps[k],), f"bfa.branch{k + 1}.resize", widths[k], ref=taps[4])
            parts.append(r)
            part_ch += widths[k]
        cat = add("concat", parts, "bfa.concat", part_ch)
        cur = add_conv_relu(cat, "bfa.reduce", widths[4], part_ch)
    if bits[29]:
        cur = add("norm", (cur,), "bottleneck.norm", widths[4])
    if bits[4]:
        cur = add_transfer(cur, "bottleneck.transfer", widths[4])

    stage_out = {4: 4 * c, 3: 2 * c, 2: c, 1: c}
    cur_ch = widths[4]
    for k in (4, 3, 2, 1):
        cur = add_conv_relu(cur, f"dec.stage{k}.conv", stage_out[k], cur_ch)
        cur_ch = stage_out[k]
        if bits[20 + k]:
            cur = add_conv_relu(cur, f"dec.stage{k}.aux1", cur_ch, cur_ch)
        if bits[24 + k]:
            cur = add_conv_relu(cur, f"dec.stage{k}.aux2", cur_ch, cur_ch)
        if bits[16 + k]:
            cur = add_transfer(cur, f"dec.stage{k}.transfer", cur_ch)
        cur = add("upsample", (cur,), f"dec.stage{k}.upsample", cur_ch)
        if bits[4 + k]:
            sk = taps[k - 1]
            sk_ch = widths[k - 1]
            if bits[8 + k]:
                sk = add("norm", (sk,), f"skip{k}.norm", sk_ch)
            if bits[12 + k]:
                sk = add_transfer(sk, f"skip{k}.transfer", sk_ch)
            cat = add("concat", (cur, sk), f"skip{k}.concat", cur_ch + sk_ch)
            cur = add_conv_relu(cat, f"skip{k}.reduce", cur_ch, cur_ch + sk_ch)

    if bits[30]:
        cur = add_conv_relu(cur, "out.refine", cur_ch, cur_ch)
    conv_shapes["out.conv"] = (3, cur_ch)
    out = add("conv", (cur,), "out.conv.conv", 3, param="out.conv")
    final = add("clamp", (out,), "out.clamp", 3)

    # each parameter seeds from (decoder_seed, name): initialization is
    # independent of build order, so codes sharing an operator share its
    # init and architecture comparisons are not confounded by draw shifts
    params = {}
    for name, (c_out, c_in) in conv_shapes.items():
        rng = np.random.default_rng(
            np.random.SeedSequence([decoder_seed, zlib.crc32(name.encode())])
        )
        gain = 1.0 if name == "out.conv" else np.sqrt(2.0)
        params[f"{name}.weight"] = _orthogonal_conv_init(rng, c_out, c_in, gain)
        params[f"{name}.bias"] = np.zeros(c_out, REAL)

    return NetworkGraph(
        code=code,
        base_width=base_width,
        encoder=encoder,
        program=program,
        params=params,
        channels=channels,
        transfer_sites=transfer_sites,
        active_slots=tuple(i for i in range(CODE_LENGTH) if bits[i]),
        out_node=out,
        final_node=final,
    )


def inert_slots(code):
    """Set bits whose ops are no-ops because their parent link is off."""
    return tuple(
        i for i, parent in DEPENDENT_SLOTS.items() if code.bits[i] and not code.bits[parent]
    )


# --- execution ---------------------------------------------------------------


def run_decoder(graph, taps, style_sides=None, config=None, record_sites=False, trace=False):
    """Execute the decoder program on encoder taps.

    ``style_sides``: per-site style statistics; transfers are identity
    when absent (reconstruction path). ``record_sites`` captures the
    feature entering every transfer site. ``trace`` keeps every node's
    activation for backprop.
    """
    vals = [None] * len(graph.program)
    sites = [None] * len(graph.transfer_sites) if record_sites else None
    tap_iter = iter(taps)
    for i, node in enumerate(graph.program):
        if node.op == "input":
            vals[i] = next(tap_iter)
        elif node.op == "conv":
            vals[i] = nn.conv_forward(graph.layer(node.param), vals[node.inputs[0]])
        elif node.op == "relu":
            vals[i] = nn.relu(vals[node.inputs[0]])
        elif node.op == "norm":
            vals[i] = nn.instance_norm(vals[node.inputs[0]])
        elif node.op == "upsample":
            vals[i] = nn.upsample_nearest(vals[node.inputs[0]])
        elif node.op == "concat":
            vals[i] = nn.concat_channels([vals[j] for j in node.inputs])
        elif node.op == "resize_like":
            ref = vals[node.ref]
            vals[i] = nn.resize_nearest(vals[node.inputs[0]], ref.shape[1], ref.shape[2])
        elif node.op == "transfer":
            x = vals[node.inputs[0]]
            if record_sites:
                sites[node.site] = x
            if style_sides is None:
                vals[i] = x
            else:
                vals[i] = apply_transfer(x, style_sides[node.site], config)
        elif node.op == "clamp":
            vals[i] = np.clip(vals[node.inputs[0]], 0.0, 1.0)
        else:  # pragma: no cover
            raise AssertionError(f"unknown op {node.op}")
    if trace:
        return vals
    if record_sites:
        return sites
    return vals[graph.final_node]


def decoder_backward(graph, vals, grad_out):
    """Reverse-mode walk of the decoder program (transfers disabled).

    ``vals`` is a full trace from ``run_decoder(..., trace=True)``;
    ``grad_out`` is the loss gradient at the pre-clamp output node.
    Returns parameter gradients keyed like ``graph.params``.
    """
    grads = {name: np.zeros_like(arr) for name, arr in graph.params.items()}
    gvals = [None] * len(graph.program)
    gvals[graph.out_node] = grad_out
    for i in range(graph.out_node, -1, -1):
        g = gvals[i]
        if g is None:
            continue
        node = graph.program[i]
        if node.op == "input":
            continue  # encoder is frozen
        if node.op == "conv":
            layer = graph.layer(node.param)
            gx, gw, gb = nn.conv_backward(layer, vals[node.inputs[0]], g)
            grads[f"{node.param}.weight"] += gw
            grads[f"{node.param}.bias"] += gb
            _accumulate(gvals, node.inputs[0], gx)
        elif node.op == "relu":
            _accumulate(gvals, node.inputs[0], nn.relu_backward(vals[node.inputs[0]], g))
        elif node.op == "norm":
            _accumulate(gvals, node.inputs[0], nn.instance_norm_backward(vals[node.inputs[0]], g))
        elif node.op == "upsample":
            _accumulate(gvals, node.inputs[0], nn.upsample_nearest_backward(g))
        elif node.op == "concat":
            sizes = [vals[j].shape[0] for j in node.inputs]
            for j, piece in zip(node.inputs, nn.split_channels(g, sizes)):
                _accumulate(gvals, j, piece)
        elif node.op == "resize_like":
            src = vals[node.inputs[0]]
            _accumulate(
                gvals, node.inputs[0], nn.resize_nearest_backward(g, src.shape[1], src.shape[2])
            )
        elif node.op == "transfer":
            _accumulate(gvals, node.inputs[0], g)  # identity during training
        else:  # pragma: no cover
            raise AssertionError(f"unexpected op {node.op} in backward walk")
    return grads


def _accumulate(gvals, idx, g):
    if gvals[idx] is None:
        gvals[idx] = g.copy()
    else:
        gvals[idx] += g


def _check_image(img, name):
    if img.ndim != 3 or img.shape[0] != 3:
        raise InputError(f"{name} must be an RGB (3, H, W) image, got shape {img.shape}")
    if img.shape[1] % SPATIAL_MULTIPLE or img.shape[2] % SPATIAL_MULTIPLE:
        raise InputError(
            f"{name} dims {img.shape[1]}x{img.shape[2]} must be divisible by {SPATIAL_MULTIPLE}"
        )


def prepare_style(graph, style_image, config):
    """Encode a style image and precompute per-site transfer statistics."""
    style_image = np.ascontiguousarray(style_image, dtype=REAL)
    _check_image(style_image, "style image")
    taps = graph.encoder.encode(style_image)
    site_feats = run_decoder(graph, taps, record_sites=True)
    return [prepare_style_side(f, config) for f in site_feats]


def forward(graph, content_image, style_image=None, config=None, style_sides=None):
    """Stylize (or reconstruct) a content image.

    With no transfer sites, no style input, or blend=0 the network reduces
    to reconstruction of the content image. Output is clamped to [0, 1]
    and has the content's shape.
    """
    config = config or TransferConfig()
    content_image = np.ascontiguousarray(content_image, dtype=REAL)
    _check_image(content_image, "content image")
    taps = graph.encoder.encode(content_image)

    transfers_active = bool(graph.transfer_sites) and config.blend > 0.0
    if transfers_active and style_sides is None and style_image is not None:
        style_sides = prepare_style(graph, style_image, config)
    if not transfers_active:
        style_sides = None

    return run_decoder(graph, taps, style_sides=style_sides, config=config)


def reconstruct(graph, image):
    """Forward pass with every transfer site disabled."""
    return forward(graph, image, style_image=None, config=TransferConfig(blend=0.0))


# --- analytic cost model ------------------------------------------------------


def _wct_flops(c, hw):
    # covariance + apply are C^2*HW each; eigendecompositions and matrix
    # assembly are charged a fixed 30*C^3
    return 2 * c * c * hw + 30 * c**3


def count_flops_detail(graph, input_dims):
    """Multiply-accumulate counts for one full stylize forward, by op kind.

    Models encoding the content image, and, when the graph has transfer
    sites, encoding the style image plus the statistics-recording style
    pass. Deterministic in (graph, dims).
    """
    h, w = input_dims
    if h % SPATIAL_MULTIPLE or w % SPATIAL_MULTIPLE:
        raise InputError(f"dims {h}x{w} must be divisible by {SPATIAL_MULTIPLE}")
    detail = {"conv": 0, "pool": 0, "relu": 0, "norm": 0, "resize": 0, "transfer": 0, "other": 0}

    def encoder_cost():
        c_in, eh, ew = 3, h, w
        for k, c_out in enumerate(graph.encoder.widths):
            if k > 0:
                eh, ew = eh // 2, ew // 2
                detail["pool"] += c_in * eh * ew
            detail["conv"] += c_out * c_in * 9 * eh * ew
            detail["relu"] += c_out * eh * ew
            c_in = c_out

    def program_cost(count_transfer_stats):
        dims = {}
        tap_dims = [(h, w), (h // 2, w // 2), (h // 4, w // 4), (h // 8, w // 8), (h // 16, w // 16)]
        tap_i = 0
        for i, node in enumerate(graph.program):
            if node.op == "input":
                dims[i] = tap_dims[tap_i]
                tap_i += 1
                continue
            src = node.inputs[0]
            ch = graph.channels[i]
            if node.op == "conv":
                dims[i] = dims[src]
                c_out, c_in = ch, graph.channels[src]
                detail["conv"] += c_out * c_in * 9 * dims[i][0] * dims[i][1]
            elif node.op in ("relu", "clamp"):
                dims[i] = dims[src]
                detail["relu" if node.op == "relu" else "other"] += ch * dims[i][0] * dims[i][1]
            elif node.op == "norm":
                dims[i] = dims[src]
                detail["norm"] += 4 * ch * dims[i][0] * dims[i][1]
            elif node.op == "upsample":
                dims[i] = (dims[src][0] * 2, dims[src][1] * 2)
                detail["resize"] += ch * dims[i][0] * dims[i][1]
            elif node.op == "resize_like":
                dims[i] = dims[node.ref]
                detail["resize"] += ch * dims[i][0] * dims[i][1]
            elif node.op == "concat":
                dims[i] = dims[src]
                detail["other"] += ch * dims[i][0] * dims[i][1]
            elif node.op == "transfer":
                dims[i] = dims[src]
                hw = dims[i][0] * dims[i][1]
                if count_transfer_stats:
                    detail["transfer"] += _wct_flops(ch, hw)

    encoder_cost()
    program_cost(count_transfer_stats=bool(graph.transfer_sites))
    if graph.transfer_sites:
        # style image: encoder plus the statistics-recording pass
        encoder_cost()
        program_cost(count_transfer_stats=False)
    return detail


def count_flops(graph, input_dims):
    return sum(count_flops_detail(graph, input_dims).values())
