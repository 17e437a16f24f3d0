"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--sizes 5 13 50 200] [--batch 30] [--json out.json]

Reports the best-of-``--repeat`` wall time per call for each kernel and a
full shifted barycenter solve, plus the max absolute difference between
backends.
"""

import argparse
import json
import timeit

import numpy as np

from netfrechet import _backend, specmat
from netfrechet import barycenter as bc
from netfrechet.graphcore import laplacian, make_named


def _inputs(rng, k, batch):
    A = rng.standard_normal((batch, k, k))
    covs = A @ A.transpose(0, 2, 1) / k
    w = rng.dirichlet(np.ones(batch))
    s = covs.mean(axis=0)
    return covs, w, specmat.matrix_power(s, 0.5)


def _problem(k, batch):
    covs = np.stack([specmat.pinv_psd(laplacian(make_named("cycle", k, 1.0 / x))) for x in
                     np.linspace(2.0, 8.0, batch)])
    return bc.BarycenterProblem(covs, np.full(batch, 1.0 / batch))


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(sizes, batch, repeat, seed=0):
    rng = np.random.default_rng(seed)
    names = _backend.available()
    rows = []
    for k in sizes:
        covs, w, s_half = _inputs(rng, k, batch)
        prob = _problem(k, batch)
        cases = {
            "psd_funcm(sqrt)": lambda K: K.psd_funcm(covs, 0.5),
            "bw_sqrt_sum": lambda K: K.bw_sqrt_sum(s_half, covs, w),
            "entropic_sum": lambda K: K.entropic_sum(s_half, covs, w, 1e-5),
            "solve(shifted)": None,
        }
        number = max(1, int(2000 / (k * batch)))
        for cname, fn in cases.items():
            row = {"k": k, "batch": batch, "case": cname}
            outs = {}
            for name in names:
                K = _backend.get(name)
                if fn is None:
                    call = lambda name=name: bc.solve(prob, backend=name).result  # noqa: E731
                else:
                    call = lambda K=K, fn=fn: fn(K)  # noqa: E731
                row[name] = _best(call, repeat, number if fn is not None else 1)
                out = call()
                outs[name] = out[0] if isinstance(out, tuple) else out
            if len(outs) == 2:
                row["speedup"] = row["python"] / row["cython"]
                row["max_abs_diff"] = float(np.abs(outs["python"] - outs["cython"]).max())
            rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 13, 50, 200])
    ap.add_argument("--batch", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_out")
    args = ap.parse_args(argv)
    rows = bench(args.sizes, args.batch, args.repeat)
    names = _backend.available()
    head = f"{'k':>4} {'case':<16}" + "".join(f"{n + ' (ms)':>14}" for n in names)
    if len(names) == 2:
        head += f"{'speedup':>9}{'max diff':>11}"
    print(head)
    for r in rows:
        line = f"{r['k']:>4} {r['case']:<16}" + "".join(f"{1e3 * r[n]:>14.4f}" for n in names)
        if "speedup" in r:
            line += f"{r['speedup']:>8.2f}x{r['max_abs_diff']:>11.1e}"
        print(line)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump({"backends": names, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
