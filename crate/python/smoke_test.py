"""Smoke test for the spt_py extension.

Build first with `cargo build -p spt-py` (add `--release` and pass
`--profile release` here for an optimized build). The script copies the
shared library next to a temporary `spt_py.so` and imports it.
"""

import argparse
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load(profile):
    target = ROOT / "target" / profile
    for name in ("libspt_py.so", "libspt_py.dylib", "spt_py.dll"):
        lib = target / name
        if lib.exists():
            break
    else:
        sys.exit(f"no built library in {target}; run cargo build -p spt-py")
    tmp = pathlib.Path(tempfile.mkdtemp())
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy(lib, tmp / f"spt_py{suffix}")
    sys.path.insert(0, str(tmp))
    import spt_py

    return spt_py


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--profile", default="debug")
    args = parser.parse_args()
    spt = load(args.profile)

    chain = spt.Model("cluster_qubit", 40)
    g, h = (1, 0), (0, 1)
    cuts = chain.bulk_cuts()
    assert chain.sigma(g, h, cuts[5]) == -1
    assert chain.sigma(g, h, cuts[20]) == -1
    assert chain.mu(g, h) == 1 and chain.mu(h, g) == -1
    assert abs(chain.string_order(g, 3, 30)) == 1
    sites, value, source = chain.boundary_operator(g, 10, "right")
    assert value == 0 and source == "localized" and sites

    qutrit = spt.Model("cluster_qudit", 5, d=3, backend="dense")
    root = qutrit.sigma(g, h)
    assert close(root**3, 1) and not close(root, 1)

    out = chain.measure(1, list(range(3, 37, 3)), seed=7)
    assert len(out.charges) == len(out.centers) == 12
    pair, left, right, connected, phase = out.lro(4, 33)
    assert abs(connected) == 1 and left == 0 and right == 0
    assert abs(phase) == 1

    flipped = list(out.charges)
    flipped[4] ^= 1
    other = chain.postselect(1, out.centers, flipped)
    assert other.lro(4, 33)[0] == -pair

    assert all(v == 0 for _, v in chain.z_pair_decay(2, [2, 10]))
    per_cell = chain.measure(0, list(range(1, 39)), seed=2)
    assert all(v == 1 for _, v in per_cell.z_pair_decay(2, [2, 10]))

    outcomes = spt.Model("cluster_qubit", 6, backend="dense").enumerate(0, [0, 1, 2, 3, 4])
    assert close(sum(p for _, p in outcomes), 1)

    try:
        spt.Model("cluster_qubit", 2)
    except spt.SimulationError as err:
        assert "too short" in str(err)
    else:
        raise AssertionError("short chain accepted")

    config = '[model]\nkind = "cluster_qubit"\nn_cells = 12\n'
    with tempfile.TemporaryDirectory() as tmp:
        files = spt.run_experiment(config, "index", out_dir=tmp, seed=3)
        text = pathlib.Path(files[0]).read_text()
        assert spt.config_hash(config) in text
    try:
        spt.run_experiment(config + "bogus = 1\n", "index")
    except ValueError as err:
        assert "bogus" in str(err)
    else:
        raise AssertionError("unknown key accepted")

    print("spt_py smoke test passed")


if __name__ == "__main__":
    main()
