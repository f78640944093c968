"""Hand-rolled EDF byte builder, independent of the package's writer."""

import numpy as np


def _field(value, width):
    return str(value).ljust(width)[:width].encode("ascii")


def build_edf(signals, n_records, record_duration=1, header_bytes=None, reserved="",
              phys=(-3276.8, 3276.7), dig=(-32768, 32767)):
    """``signals`` is a list of ``(label, samples_per_record, int16 array)``."""
    n = len(signals)
    hb = 256 + 256 * n if header_bytes is None else header_bytes
    head = b"".join([
        _field("0", 8), _field("patient", 80), _field("recording", 80), _field("01.01.00", 8),
        _field("00.00.00", 8), _field(hb, 8), _field(reserved, 44), _field(n_records, 8),
        _field(record_duration, 8), _field(n, 4),
    ])
    cols = [
        [_field(lab, 16) for lab, _, _ in signals],
        [_field("", 80)] * n,
        [_field("uV", 8)] * n,
        [_field(phys[0], 8)] * n,
        [_field(phys[1], 8)] * n,
        [_field(dig[0], 8)] * n,
        [_field(dig[1], 8)] * n,
        [_field("", 80)] * n,
        [_field(spr, 8) for _, spr, _ in signals],
        [_field("", 32)] * n,
    ]
    head += b"".join(b"".join(c) for c in cols)
    body = bytearray()
    for r in range(n_records):
        for _, spr, data in signals:
            body += np.asarray(data[r * spr:(r + 1) * spr], dtype="<i2").tobytes()
    return head + bytes(body)
