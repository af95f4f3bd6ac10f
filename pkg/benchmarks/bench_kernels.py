"""Compare the compiled kernels against the numpy reference.

Times the four hot kernels directly (both implementations imported side
by side), then one full training epoch per backend in a subprocess so
the end-to-end effect of FEDPOSE_KERNELS is visible.

    python3 benchmarks/bench_kernels.py [--batch 64] [--hidden 128] [--repeats 200]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fedpose.nn.kernels import reference

try:
    from fedpose.nn.kernels import _native as native
except ImportError:
    native = None

EPOCH_SNIPPET = """\
import time
import numpy as np
from fedpose.models import LstmConfig, build_model
from fedpose.nn.kernels import BACKEND
from fedpose.pose.splits import stratified_split
from fedpose.pose.synthetic import SyntheticSpec, synthesize_dataset
from fedpose.pose.preprocess import recording_to_windows
from fedpose.training import TrainConfig, train_local

spec = SyntheticSpec(subjects=1, recordings_per_subject=1, frames_per_recording=400)
frames = synthesize_dataset(spec, 0)
windows = recording_to_windows(frames, spec.image_width, spec.image_height)
ds = stratified_split(windows, "c1", 0)
config = LstmConfig(hidden={hidden})
params = build_model("lstm", config, seed=0)
tc = TrainConfig(max_epochs=1, patience=None, seed=0)
train_local(params, "lstm", config, ds.train, [], tc)  # warm up
t0 = time.perf_counter()
for _ in range({epochs}):
    train_local(params, "lstm", config, ds.train, [], tc)
print(f"{{BACKEND}}: {{(time.perf_counter() - t0) / {epochs} * 1e3:.1f}} ms/epoch")
"""


def timeit(fn, repeats: int) -> float:
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6  # us per call


def bench_kernels(batch: int, hidden: int, repeats: int) -> None:
    rng = np.random.default_rng(0)
    gates = rng.normal(size=(batch, 4 * hidden))
    c_prev = rng.normal(size=(batch, hidden))
    dh = rng.normal(size=(batch, hidden))
    dc = rng.normal(size=(batch, hidden))
    n = 200_000
    p = rng.normal(size=n)
    g = rng.normal(size=n) * 0.01
    logits = rng.normal(size=(batch, 8)) * 3.0
    labels = rng.integers(0, 8, batch)

    impls = [("python", reference)] + ([("native", native)] if native else [])
    if native is None:
        print("compiled extension not importable; timing the reference only")

    rows = []
    for name, impl in impls:

        def fwd():
            gg = gates.copy()
            impl.lstm_pointwise_forward(
                gg, c_prev, np.empty_like(c_prev), np.empty_like(c_prev),
                np.empty_like(c_prev),
            )

        act = gates.copy()
        tanh_c = np.tanh(rng.normal(size=(batch, hidden)))

        def bwd():
            impl.lstm_pointwise_backward(
                act, c_prev, tanh_c, dh, dc,
                np.empty_like(gates), np.empty_like(c_prev),
            )

        def adam():
            impl.adam_update(p.copy(), g, np.zeros(n), np.zeros(n),
                             2e-4, 0.9, 0.999, 1e-8, 1)

        def xent():
            impl.softmax_xent_forward(
                logits, labels, np.empty_like(logits), np.empty(batch)
            )

        rows.append((name, [timeit(fn, repeats) for fn in (fwd, bwd, adam, xent)]))

    header = ["backend", "lstm fwd", "lstm bwd", f"adam ({n//1000}k)", "softmax+xent"]
    print(f"\nkernel timings, us/call (batch={batch}, hidden={hidden}, "
          f"{repeats} repeats):")
    print(f"  {header[0]:<8} " + " ".join(f"{h:>14}" for h in header[1:]))
    for name, times in rows:
        print(f"  {name:<8} " + " ".join(f"{t:>14.1f}" for t in times))
    if len(rows) == 2:
        speedups = [a / b for a, b in zip(rows[0][1], rows[1][1])]
        print(f"  {'speedup':<8} " + " ".join(f"{s:>13.1f}x" for s in speedups))


def bench_epoch(hidden: int) -> None:
    print(f"\nfull LSTM training epoch (hidden={hidden}, one synthetic subject):")
    for backend in ("python", "native"):
        if backend == "native" and native is None:
            continue
        env = dict(os.environ, FEDPOSE_KERNELS=backend)
        snippet = EPOCH_SNIPPET.format(hidden=hidden, epochs=3)
        out = subprocess.run(
            [sys.executable, "-c", snippet], env=env,
            capture_output=True, text=True, check=True,
        )
        print("  " + out.stdout.strip())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--hidden", type=int, default=128)
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--skip-epoch", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.batch, args.hidden, args.repeats)
    if not args.skip_epoch:
        bench_epoch(args.hidden)


if __name__ == "__main__":
    main()
