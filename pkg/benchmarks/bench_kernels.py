"""Timing comparison of the compiled kernels against the numpy fallback.

Run inside the repository:

    python3 benchmarks/bench_kernels.py            # both backends, all sizes
    python3 benchmarks/bench_kernels.py --sizes 100000 --repeats 5

Each invocation measures the active backend in a subprocess per backend, so
the numbers come from clean imports.  The end-to-end row times a full
penalized fit at the desk scale, which exercises the kernels through the
whole solver loop.
"""

import argparse
import json
import os
import subprocess
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))


def timed(fn, repeats):
    """Best-of-N wall time in seconds."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def measure(sizes, repeats):
    import numpy as np

    from npamp import kernels
    from npamp.amp import run_amp
    from npamp.expectile import ExpectileSpec

    rng = np.random.default_rng(0)
    rows = []
    for size in sizes:
        z = rng.standard_normal(size)
        out = np.empty_like(z)
        loops = max(1, 2_000_000 // size)

        def many(call):
            def run():
                for _ in range(loops):
                    call()
            return run

        per = {
            "soft_threshold": timed(
                many(lambda: kernels.soft_threshold_into(z, 0.7, out)),
                repeats),
            "prox": timed(
                many(lambda: kernels.prox_into(z, 0.8, 0.27, 0.5, out)),
                repeats),
            "score": timed(
                many(lambda: kernels.score_into(z, 0.8, 0.27, 0.5, 10.0, out)),
                repeats),
            "count_le": timed(
                many(lambda: kernels.count_le(z, 0.27)), repeats),
        }
        rows.append({"size": size, "loops": loops,
                     **{name: t / loops for name, t in per.items()}})

    x = rng.standard_normal((100, 200)) / np.sqrt(100)
    beta = np.zeros(200)
    beta[:5] = 3.0 * rng.standard_normal(5)
    y = x @ beta + 0.5 * rng.standard_normal(100)
    from npamp.amp import Dataset
    data = Dataset(y, x)
    fit_time = timed(lambda: run_amp(data, ExpectileSpec(0.8, 0.27)), repeats)
    return {"backend": kernels.BACKEND, "rows": rows, "full_fit": fit_time}


def run_backend(pure_python, sizes, repeats):
    env = dict(os.environ)
    if pure_python:
        env["NPAMP_PURE_PYTHON"] = "1"
    else:
        env.pop("NPAMP_PURE_PYTHON", None)
    payload = json.dumps({"sizes": sizes, "repeats": repeats})
    proc = subprocess.run(
        [sys.executable, __file__, "--worker", payload],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[1_000, 100_000, 1_000_000])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--worker", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker is not None:
        spec = json.loads(args.worker)
        json.dump(measure(spec["sizes"], spec["repeats"]), sys.stdout)
        return 0

    compiled = run_backend(False, args.sizes, args.repeats)
    python = run_backend(True, args.sizes, args.repeats)
    if compiled["backend"] != "compiled":
        print("note: compiled extension not importable; comparing the "
              "fallback against itself", file=sys.stderr)

    kernel_names = ("soft_threshold", "prox", "score", "count_le")
    print(f"{'kernel':<16}{'size':>10}{'compiled':>12}{'numpy':>12}{'ratio':>8}")
    for row_c, row_p in zip(compiled["rows"], python["rows"]):
        for name in kernel_names:
            t_c, t_p = row_c[name], row_p[name]
            print(f"{name:<16}{row_c['size']:>10}"
                  f"{t_c * 1e6:>10.1f}us{t_p * 1e6:>10.1f}us"
                  f"{t_p / t_c:>8.2f}")
    t_c, t_p = compiled["full_fit"], python["full_fit"]
    print(f"{'full fit':<16}{'100x200':>10}"
          f"{t_c * 1e3:>10.1f}ms{t_p * 1e3:>10.1f}ms{t_p / t_c:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
