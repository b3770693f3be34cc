"""Smoke test for the ustat Python extension.

Run after `cargo build -p ustat-py` (or a maturin build):

    python3 crates/py/python/smoke_test.py

If `ustat` is not importable, the freshly built shared library under
target/ is copied to a temporary directory and imported from there.
"""

import importlib
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", ".."))


def load_ustat():
    try:
        return importlib.import_module("ustat")
    except ImportError:
        pass
    libs = [os.path.join(ROOT, "target", p, "libustat.so") for p in ("release", "debug")]
    libs = [lib for lib in libs if os.path.exists(lib)]
    if not libs:
        sys.exit("ustat extension not found; run `cargo build -p ustat-py` first")
    tmp = tempfile.mkdtemp()
    shutil.copy(max(libs, key=os.path.getmtime), os.path.join(tmp, "ustat.so"))
    sys.path.insert(0, tmp)
    return importlib.import_module("ustat")


def main():
    ustat = load_ustat()

    k = ustat.Kernel("gini")
    assert (k.degree, k.dim, k.symmetric) == (2, 1, True)
    # values are stored on [-1, 1]; to_natural maps back
    assert k.to_natural(k([[0.0], [0.5]])) == 0.5

    data = ustat.sample("uniform", 50, 7)
    full = ustat.Design.complete(50, 2)
    assert len(full) == 50 * 49 // 2
    sub = ustat.Design.random(50, 2, 200, 3)
    u_full = ustat.estimate(k, data, full)
    u_sub = ustat.estimate(k, data, sub)
    assert -1.0 <= u_full <= 1.0 and -1.0 <= u_sub <= 1.0

    a, b, c = sub.scalars()
    stats = sub.stats()
    assert sum(stats["R"]) == 2 * 200 and math.isclose(stats["A"], a)
    again = ustat.Design.from_spec("random:200:3", 50, 2)
    assert again.subsets() == sub.subsets()

    prof = ustat.sensitivity(ustat.Kernel("product"), "rademacher", method="exact")
    assert prof["gamma"]["value"] == 8.0 and prof["beta"]["value"] == 4.0

    rep = ustat.bound("incomplete", design=sub, kernel=ustat.Kernel("product"),
                      distribution="rademacher", delta=0.05)
    assert rep["form"] == "delta" and rep["deviation"] > 0

    try:
        ustat.bound("random-design", n=1000, m=2, big_m=10, delta=0.05)
    except ustat.ValidityError:
        pass
    else:
        raise AssertionError("expected ValidityError for M < ln^2 n")
    forced = ustat.bound("random-design", n=1000, m=2, big_m=10, delta=0.05, force=True)
    assert forced["flags"][0]["ok"] is False

    try:
        ustat.Kernel("no-such-kernel")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    table = ustat.compare("m=2; n=100; t=0.1,0.5; sigma1=0")
    assert len(table) == 2 and all(r["complete_exact_b"] <= r["arcones"] for r in table)

    out = ustat.run_experiment("tail-validity",
                               {"n": "16", "M": "40", "replicates": "200", "seed": "5"})
    assert out["all_pass"] and out["seed"] == 5 and len(out["rows"]) > 0

    print("smoke test passed: U_full=%.4f U_W=%.4f A=%.4f B=%.4f C=%.4f" % (u_full, u_sub, a, b, c))


if __name__ == "__main__":
    main()
