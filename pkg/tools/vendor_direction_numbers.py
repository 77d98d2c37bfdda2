"""Regenerate ``src/adabo/data/direction_numbers.txt``.

The table is the Joe & Kuo "new-joe-kuo-6.21201" set as redistributed with
scipy; only the first ``MAX_DIM`` dimensions are vendored.  Run once, then
update ``DIRECTION_TABLE_SHA256`` in ``adabo/sampling.py`` with the printed
digest.
"""

import hashlib
import os
import sys

import numpy as np
import scipy.stats

MAX_DIM = 1111


def main(path):
    npz = np.load(os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz"))
    poly, vinit = npz["poly"], npz["vinit"]
    lines = ["# d s a m_i (dimension 1 is the van der Corput sequence)"]
    for d in range(MAX_DIM):
        p = int(poly[d])
        s = p.bit_length() - 1
        a = (p >> 1) & ((1 << max(s - 1, 0)) - 1) if s > 0 else 0
        m = [int(v) for v in vinit[d, :s]]
        lines.append(" ".join(str(v) for v in [d + 1, s, a, *m]))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    print(hashlib.sha256(text.encode()).hexdigest())


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/adabo/data/direction_numbers.txt")
