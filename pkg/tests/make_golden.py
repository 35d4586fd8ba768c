"""Regenerate the seeded regression values in tests/data/golden.json.

Run only when a deliberate change to the RNG layout, the decoder or the
default code invalidates the pinned values: ``python3 tests/make_golden.py``.
"""

import json
from pathlib import Path

import numpy as np

from cvqkd_rateopt.protograph import default_protograph_path, load_protograph
from cvqkd_rateopt.raptor import encode, extend_to_rate, lift, view_from_parity_check
from cvqkd_rateopt.sim import SimConfig, run_fer_point, shannon_snr, transmit_frame

TOY_H = np.array([
    [1, 1, 0, 1, 0, 0, 0, 0],
    [0, 1, 1, 0, 1, 0, 0, 0],
    [1, 0, 1, 0, 0, 1, 0, 0],
    [1, 1, 1, 0, 0, 0, 1, 0],
    [0, 1, 0, 1, 0, 0, 0, 1],
])
REG_SEED = 20240611
REG_BETA = 0.8


def toy_view():
    return view_from_parity_check(TOY_H, [0, 1, 2])


def transmit_reference():
    v = toy_view()
    c = encode(v, np.array([1, 0, 1]), full=True)
    return c, transmit_frame(v, c, 1.0, np.random.default_rng(12345))


def regression_point():
    code = lift(load_protograph(default_protograph_path()), 500, seed=1)
    v = extend_to_rate(code, 0.1)
    return run_fer_point(v, shannon_snr(0.1, REG_BETA), SimConfig(seed=REG_SEED, target_errors=50))


if __name__ == "__main__":
    _, llr = transmit_reference()
    smp = regression_point()
    doc = {
        "transmit_s1_seed12345": [float(x) for x in llr],
        "fer_point_r0.1": {"seed": REG_SEED, "beta": REG_BETA, "frames": smp.frames, "errors": smp.frame_errors},
    }
    out = Path(__file__).with_name("data") / "golden.json"
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(out.read_text())
