"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from sphwave import sphere
from sphwave import wavelets as wl
from sphwave._kernels import BACKEND, _pykernels
from sphwave.mesh import build_mesh

try:
    from sphwave._kernels import _ckernels
except ImportError:
    _ckernels = None


def cost_case(n_dirs, n_spk, rng):
    dirs = sphere.sample_vectors(n_dirs)
    U = sphere.sample_vectors(n_spk)
    S = rng.normal(size=(n_dirs, n_spk))
    w = rng.uniform(0.25, 1.0, n_dirs)
    alpha = np.array([1.0, 1.0, 1.0, 8.0, 1.0, 0.5, 2.0])
    return S, U, dirs, w, alpha


def vbap_case(levels, n_src):
    coarse = build_mesh(levels)[0]
    inv = np.ascontiguousarray(wl.triangle_inverses(coarse.vertices, coarse.triangles))
    return inv, sphere.sample_vectors(n_src)


def bench(label, fn_c, fn_py, args, repeat):
    t_py = min(timeit.repeat(lambda: fn_py(*args), number=1, repeat=repeat))
    line = f"{label:<28} numpy {t_py * 1e3:9.3f} ms"
    if fn_c is not None:
        t_c = min(timeit.repeat(lambda: fn_c(*args), number=1, repeat=repeat))
        line += f"   cython {t_c * 1e3:9.3f} ms   speed-up {t_py / t_c:6.1f}x"
    print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"active backend: {BACKEND}")
    if _ckernels is None:
        print("compiled extension unavailable; timing numpy only")
    for n_dirs, n_spk in ((66, 11), (900, 11), (5000, 24)):
        bench(f"idhoa_cost_grad {n_dirs}x{n_spk}",
              _ckernels and _ckernels.idhoa_cost_grad, _pykernels.idhoa_cost_grad,
              cost_case(n_dirs, n_spk, rng), args.repeat)
    for n_src in (360, 5000):
        inv, src = vbap_case(0, n_src)
        bench(f"vbap_locate 8 tri x {n_src}", _ckernels and _ckernels.vbap_locate,
              _pykernels.vbap_locate, (inv, src, 1e-10), args.repeat)
    inv, src = vbap_case(2, 5000)
    bench("vbap_locate 128 tri x 5000", _ckernels and _ckernels.vbap_locate,
          _pykernels.vbap_locate, (inv, src, 1e-10), args.repeat)


if __name__ == "__main__":
    main()
