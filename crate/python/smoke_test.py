#!/usr/bin/env python3
"""Smoke test for the codemix_py extension module.

Builds nothing itself: run `cargo build -p codemix-py` first, then
`python3 python/smoke_test.py`. The built cdylib is copied into a temp
directory under the importable module name before loading.
"""

import math
import pathlib
import shutil
import sys
import sysconfig
import tempfile


def load_module():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "debug" / "libcodemix_py.so",
        root / "target" / "release" / "libcodemix_py.so",
        root / "target" / "debug" / "libcodemix_py.dylib",
        root / "target" / "release" / "libcodemix_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run: cargo build -p codemix-py")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    tmp = tempfile.mkdtemp(prefix="codemix_py_")
    shutil.copy2(built, pathlib.Path(tmp) / f"codemix_py{suffix}")
    sys.path.insert(0, tmp)
    import codemix_py

    return codemix_py


def main():
    m = load_module()
    print(f"codemix_py {m.__version__}")

    # 8 CJK chars + 2 Latin words; punctuation contributes nothing
    tokens = m.tokenize("今日去咗canteen食lunch，哇好正！")
    assert len(tokens) == 10, tokens
    assert ("canteen", "latin_word") in tokens
    assert ("今", "cjk_char") in tokens

    assert m.normalize_text("ＨＯＬＤ住") == "hold住"
    assert m.is_mixed("今日好hot")
    assert not m.is_mixed("今日好熱")

    counts = m.count_stats("今日去咗canteen食lunch")
    assert counts["cjk_chars"] == 5 and counts["latin_words"] == 2, counts
    assert math.isclose(counts["ratio_cjk_to_latin"], 2.5)

    # one substitution against a two-token reference
    pair = m.evaluate_pair("Hold住", "侯住")
    assert math.isclose(pair["mer"], 0.5), pair
    assert pair["counts"]["mer"] == {"S": 1, "I": 0, "D": 0, "N": 2, "C": 1}

    alignment = m.align(["今", "日", "hot"], ["今", "hot"])
    assert alignment == {"S": 0, "I": 0, "D": 1, "N": 3, "C": 2}, alignment

    # equal weights, perfect transcript, latency at the floor: (100+100+1)/3
    fal = m.compute_fal(fidelity=100.0, latency_s=1.0, reference_len=10, max_latency=5.0)
    assert math.isclose(fal["total"], 67.0), fal

    assert m.mock_fidelity("今日好hot", "今日好hot") == 100
    assert m.mock_fidelity("今日好hot", "完全唔同嘅嘢") == 0

    try:
        m.compute_fal(fidelity=100.0, latency_s=1.0, reference_len=10,
                      alpha=0.3, beta=0.3, gamma=0.3)
    except ValueError:
        pass
    else:
        sys.exit("weights off the simplex must raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
