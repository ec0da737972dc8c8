"""Log/antilog tables for GF(2^8) with reduction polynomial 0x11D.

Built once at import time and never mutated afterwards.
"""

import numpy as np

POLY = 0x11D
GENERATOR = 0x02


def _build():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= POLY
    # doubled range lets log[a] + log[b] index without a modulo
    exp[255:510] = exp[0:255]
    log[0] = -1

    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = np.arange(1, 256)
    la = log[nz]
    mul[1:, 1:] = exp[(la[:, None] + la[None, :])]

    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - la) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build()
for _t in (EXP, LOG, MUL, INV):
    _t.setflags(write=False)
del _t
