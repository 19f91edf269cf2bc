#!/usr/bin/env python3
"""Dump PyWavelets db4 periodization results for a fixed random signal.

    python3 tests/oracle/make_wavelet_fixtures.py tests/fixtures/wavelet_db4.json
"""
import json
import sys

import numpy as np
import pywt


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/wavelet_db4.json"
    w = pywt.Wavelet("db4")
    rng = np.random.default_rng(7)
    # 700 -> 350 -> 175 -> 88 -> 44 -> 22 -> 11 -> 6 -> 3 -> 2 exercises odd padding twice.
    x = rng.standard_normal(700)
    coeffs = pywt.wavedec(x, "db4", mode="periodization", level=9)
    keep = [coeffs[0]] + [np.zeros_like(c) for c in coeffs[1:]]
    for level in (4, 5, 6):
        keep[-level] = coeffs[-level]
    denoised = pywt.waverec(keep, "db4", mode="periodization")[: len(x)]
    data = {
        "dec_lo": list(w.dec_lo),
        "dec_hi": list(w.dec_hi),
        "rec_lo": list(w.rec_lo),
        "rec_hi": list(w.rec_hi),
        "signal": x.tolist(),
        "approximation": coeffs[0].tolist(),
        # details[0] is D1.
        "details": [c.tolist() for c in reversed(coeffs[1:])],
        "denoised_d456_a9": denoised.tolist(),
    }
    with open(out, "w") as f:
        json.dump(data, f)


if __name__ == "__main__":
    main()
