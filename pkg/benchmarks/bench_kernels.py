"""Compare the compiled kernels against the NumPy fallback.

Runs each hot kernel (3x3 conv forward/backward, Jacobi eigensolver) on a
range of shapes under both backends and prints a timing table, plus an
end-to-end stylize forward comparison driven through subprocesses so each
backend is selected at import as it would be in production.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from stylenas._kernels import load_backend

CONV_SHAPES = [
    # (C_in, C_out, H, W)
    (8, 16, 32, 32),
    (32, 64, 16, 16),
    (64, 64, 8, 8),
    (64, 128, 64, 64),
]
EIG_SIZES = [8, 32, 64, 128]


def time_fn(fn, repeats):
    fn()  # warmup
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1000.0)
    return statistics.median(samples)


def bench_conv(backend, repeats):
    rows = []
    rng = np.random.default_rng(0)
    for c_in, c_out, h, w in CONV_SHAPES:
        x = rng.standard_normal((c_in, h, w)).astype(np.float32)
        weight = rng.standard_normal((c_out, c_in, 3, 3)).astype(np.float32)
        bias = rng.standard_normal(c_out).astype(np.float32)
        grad = rng.standard_normal((c_out, h, w)).astype(np.float32)
        fwd = time_fn(lambda: backend.conv3x3_forward(x, weight, bias), repeats)
        bwd = time_fn(lambda: backend.conv3x3_backward(x, weight, grad), repeats)
        rows.append((f"conv {c_in}->{c_out} @{h}x{w}", fwd, bwd))
    return rows


def bench_eig(backend, repeats):
    rows = []
    rng = np.random.default_rng(1)
    for n in EIG_SIZES:
        b = rng.standard_normal((n, n))
        a = b @ b.T
        ms = time_fn(lambda: backend.jacobi_eigh(a, 64), repeats)
        rows.append((f"jacobi eigh {n}x{n}", ms, None))
    return rows


def bench_forward(backend_name, repeats):
    """Full stylize forward, run in a subprocess so the backend is chosen
    at import exactly as a normal process would."""
    script = (
        "import numpy as np, time, statistics\n"
        "from stylenas import arch\n"
        "from stylenas.transfer import TransferConfig\n"
        "enc = arch.Encoder.seeded(8)\n"
        "g = arch.build_graph(arch.resolve_code('photonet'), 8, enc)\n"
        "rng = np.random.default_rng(0)\n"
        "c = rng.uniform(0, 1, (3, 128, 256)).astype(np.float32)\n"
        "s = rng.uniform(0, 1, (3, 128, 256)).astype(np.float32)\n"
        "arch.forward(g, c, s, TransferConfig())\n"
        "ts = []\n"
        f"for _ in range({repeats}):\n"
        "    t0 = time.perf_counter()\n"
        "    arch.forward(g, c, s, TransferConfig())\n"
        "    ts.append((time.perf_counter() - t0) * 1000)\n"
        "print(statistics.median(ts))\n"
    )
    env = dict(os.environ, STYLENAS_BACKEND=backend_name)
    out = subprocess.run(
        [sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True
    )
    return float(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=9)
    args = parser.parse_args()

    backends = {}
    for name in ("numpy", "compiled"):
        try:
            backends[name] = load_backend(name)
        except ImportError:
            print(f"backend {name} unavailable, skipping")
    if len(backends) < 2:
        print("only one backend present; timing it alone")

    results = {name: bench_conv(be, args.repeats) + bench_eig(be, args.repeats)
               for name, be in backends.items()}

    names = [row[0] for row in next(iter(results.values()))]
    print(f"{'kernel':32} " + " ".join(f"{n:>14}" for n in results) + "   speedup")
    for i, label in enumerate(names):
        cells = []
        for name in results:
            fwd, bwd = results[name][i][1], results[name][i][2]
            cells.append(f"{fwd:8.3f}ms" + (f"+{bwd:6.2f}" if bwd is not None else "       "))
        ratio = ""
        if len(results) == 2:
            a, b = (results[n][i][1] for n in results)
            ratio = f"{a / b:8.2f}x"
        print(f"{label:32} " + " ".join(f"{c:>14}" for c in cells) + ratio)

    if len(backends) == 2:
        print("\nfull stylize forward, photonet preset @256x128 (subprocess per backend):")
        for name in backends:
            print(f"  {name:>9}: {bench_forward(name, max(3, args.repeats // 3)):9.1f} ms")


if __name__ == "__main__":
    main()
