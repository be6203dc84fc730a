"""Smoke test for the cvrisk Python extension.

Builds the extension with cargo (unless CVRISK_PY_LIB points at a built
library), loads it, and checks a handful of known values.
"""

import importlib.machinery
import importlib.util
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile
from fractions import Fraction

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_library():
    lib = os.environ.get("CVRISK_PY_LIB")
    if lib:
        return pathlib.Path(lib)
    subprocess.run(
        ["cargo", "build", "--release", "-p", "cvrisk-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
    for name in ("libcvrisk_py.so", "libcvrisk_py.dylib", "cvrisk_py.dll"):
        path = target / "release" / name
        if path.exists():
            return path
    raise FileNotFoundError("built extension not found under " + str(target))


def load(lib):
    tmp = pathlib.Path(tempfile.mkdtemp())
    suffix = importlib.machinery.EXTENSION_SUFFIXES[0]
    dest = tmp / ("cvrisk_py" + suffix)
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("cvrisk_py", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    cv = load(build_library())

    assert Fraction(cv.cov_exact(3, 1)) == Fraction(1, 8), cv.cov_exact(3, 1)
    assert cv.minimize_cov(300) == (100, 3)
    assert cv.rank_prob(2, 2, 2, 2) == "3/8"
    assert cv.expected_loss_exact(1, 1, 2)[0] == "1/8"
    assert cv.cov_exact_factorized(3, 1) == "1/4"
    assert abs(cv.theta_eval(0.5, "lattice") - 0.0) < 1e-12
    assert abs(cv.squarewave_constants()["c0"] - 0.0424) < 1e-4

    terms = cv.decompose("anticorr", 2, 2)
    assert terms["mse"] == "0" and terms["sls"] == "1/8", terms
    assert cv.to_float(terms["sls"]) == 0.125

    value, err = cv.linear_mse_mc(4, 2, 3, 3, 2000, 7)
    assert 0.0 <= value <= 1.0 and err >= 0.0
    assert (value, err) == cv.linear_mse_mc(4, 2, 3, 3, 2000, 7)

    try:
        cv.cov_exact(5, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError for a non-divisor fold size")

    results = cv.verify_suite("squarewave", 3)
    assert results and all(passed for _, _, passed, _ in results), results

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
