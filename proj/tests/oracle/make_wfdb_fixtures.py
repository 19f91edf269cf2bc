#!/usr/bin/env python3
"""Write crafted WFDB records with the reference wfdb-python writer and dump
what the reference reader decodes from them.

The C++ parser tests compare against the JSON dumps produced here. Re-run
only when the fixtures need to change:

    python3 tests/oracle/make_wfdb_fixtures.py tests/fixtures/wfdb
"""
import json
import os
import sys

import numpy as np
import wfdb


def dump_record(out_dir, name):
    rec = wfdb.rdrecord(os.path.join(out_dir, name), physical=False)
    phys = wfdb.rdrecord(os.path.join(out_dir, name), physical=True)
    return {
        "record": name,
        "fs": rec.fs,
        "n_sig": rec.n_sig,
        "sig_len": rec.sig_len,
        "fmt": rec.fmt,
        "adc_gain": [float(g) for g in rec.adc_gain],
        "baseline": [int(b) for b in rec.baseline],
        "init_value": [int(v) for v in rec.init_value],
        "adc": rec.d_signal.T.astype(int).tolist(),
        # Invalid samples (adc -2048) read back as NaN; stored as null.
        "physical": [[None if v != v else v for v in lead] for lead in phys.p_signal.T.tolist()],
    }


def dump_ann(out_dir, name, ext):
    ann = wfdb.rdann(os.path.join(out_dir, name), ext, return_label_elements=["symbol", "label_store"])
    return {
        "sample": [int(s) for s in ann.sample],
        "symbol": list(ann.symbol),
        "code": [int(c) for c in ann.label_store],
        "chan": [int(c) for c in ann.chan],
        "num": [int(n) for n in ann.num],
        "subtype": [int(s) for s in ann.subtype],
        "aux_note": list(ann.aux_note),
    }


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/wfdb"
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(20240607)

    # Two interleaved leads spanning the full 12-bit range.
    n = 1001
    d = rng.integers(-2048, 2048, size=(n, 2)).astype(np.int32)
    d[0] = [995, 1011]
    d[1] = [-1, 0]
    d[2] = [-2048, 2047]
    wfdb.wrsamp("crafted2", fs=360, units=["mV", "mV"], sig_name=["MLII", "V5"],
                d_signal=d, fmt=["212", "212"], adc_gain=[200.0, 200.0],
                baseline=[1024, 1024], write_dir=out_dir)

    # One lead, odd sample count: the last byte triple is half filled.
    d1 = rng.integers(-2048, 2048, size=(7, 1)).astype(np.int32)
    wfdb.wrsamp("crafted1", fs=360, units=["mV"], sig_name=["MLII"],
                d_signal=d1, fmt=["212"], adc_gain=[100.0], baseline=[-12],
                write_dir=out_dir)

    # Annotations: beat labels, gaps above 1023 (SKIP), aux strings of odd
    # and even length (AUX), channel and number changes (CHN/NUM), subtypes.
    samples = [23, 40, 360, 2000, 2001, 70000, 70010, 70100, 150000, 150401, 151000, 151500]
    symbols = ["N", "+", "L", "R", "p", "V", "/", "A", "N", "t", "~", "N"]
    chans = [0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0]
    nums = [0, 0, 0, 3, 3, 0, 0, 0, 1, 1, 0, 0]
    subtypes = [0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1, 0]
    aux = ["", "(N", "", "", "", "", "", "hello", "", "", "", ""]
    wfdb.wrann("crafted2", "atr", np.array(samples), symbol=symbols,
               chan=np.array(chans), num=np.array(nums), subtype=np.array(subtypes),
               aux_note=aux, write_dir=out_dir)

    ref = {
        "crafted1": dump_record(out_dir, "crafted1"),
        "crafted2": dump_record(out_dir, "crafted2"),
        "crafted2_atr": dump_ann(out_dir, "crafted2", "atr"),
    }
    with open(os.path.join(out_dir, "reference.json"), "w") as f:
        json.dump(ref, f, indent=1)


if __name__ == "__main__":
    main()
