"""Builds the extension module and exercises it from Python.

    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build() -> pathlib.Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "privsit-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libpyprivsit.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "pyprivsit.so"
    shutil.copy(lib, dest)
    return dest.parent


def main() -> None:
    sys.path.insert(0, str(build()))
    import pyprivsit as ps

    m = ps.SourceModel(1.0, 0.6, 1.0)
    assert m.privacy_bounds() == (0.64, 1.0)

    sol = ps.solve(m, 0.84)
    assert sol.constraint_active
    assert abs(sol.alpha + 0.2508513756224122) < 1e-12
    assert abs(sol.d_c - 0.0528581866273915) < 1e-12
    assert sol.rate is None

    comp = ps.solve(m, 0.9, setting="compression", sigma_n2=0.2)
    assert comp.rate is not None and comp.rate > 0

    rows = ps.tradeoff(m, grid=2)
    assert rows == [(0.64, 0.0, 0.0, 1.0), (1.0, 0.36, -0.6, 1.0)]

    rep = ps.verify(m, 0.92, setting="channel", p_t=1.0, sigma_z2=1.0)
    assert rep["passed"], rep

    sim = ps.simulate(m, 0.84, samples=200_000, seed=3)
    assert abs(sim["d_c_hat"] - sol.d_c) <= 5 * sim["stderr_dc"]
    assert sim["entropy_hat"] == ps.conditional_entropy(sim["d_p_hat"])

    assert math.isclose(ps.conditional_entropy(1.0), 0.5 * math.log(2 * math.pi * math.e))

    for bad in (lambda: ps.SourceModel(1.0, -0.1, 1.0), lambda: ps.solve(m, 2.0), lambda: ps.solve(m, 0.9, setting="channel")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("python smoke test passed:", sol)


if __name__ == "__main__":
    main()
