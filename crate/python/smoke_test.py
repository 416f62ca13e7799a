"""Smoke test for the tpcheck_py extension.

Uses an installed `tpcheck_py` if present, otherwise the library built by
`cargo build -p tpcheck-py --release`.
"""

import importlib.machinery
import importlib.util
import pathlib
import sys


def load():
    try:
        import tpcheck_py

        return tpcheck_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libtpcheck_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("tpcheck_py", str(lib))
            spec = importlib.util.spec_from_file_location("tpcheck_py", str(lib), loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("tpcheck_py not found: build it with `cargo build -p tpcheck-py --release`")


def main():
    tp = load()

    assert tp.parse_formula("forall i . A F tok@i") == "forall i . A F tok@i"
    assert tp.formula_profile(tp.gen_formula("adj")) == (3, 1, True)

    adj = tp.gen_formula("adj")
    assert tp.check("shuttle", "ring:6", adj)["holds"] is True
    assert tp.check("shuttle", "ring:7", adj)["holds"] is False

    cex = tp.check("shuttle", "ring:3", "forall i . A G !tok@i")["counterexample"]
    assert cex["tuple"] == [1] and cex["lasso"]["cycle"]

    mutex = "forall i forall j distinct . A G !(crit@i & crit@j)"
    report = tp.pmcp("clique", "mutex", mutex, mode="cutoff")
    assert report["answer"] == "yes" and report["cutoff_or_bound"] == 3, report

    sweep = tp.pmcp("ring", "shuttle", adj, mode="sweep", bound=8)
    assert sweep["answer"] == "no" and sweep["per_size_verdicts"]["7"] is False

    code, out, _ = tp.run_cli(["gen-formula", "phi-k", "--k", "3"])
    assert code == 0 and "exists" in out

    try:
        tp.parse_formula("forall i . A X tok@i")
    except tp.TpcheckError:
        pass
    else:
        raise AssertionError("next-time operator must be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
