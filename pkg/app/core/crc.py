# app/core/crc.py
"""
Cyclic redundancy checks for CRC-aided list decoding.

Bits are processed MSB-first through a shift register with zero initial
value, no reflection and no final XOR, so the check bits are the remainder
of payload(x) * x^L modulo the generator. The check bits are appended after
the payload; in a code they occupy the last information positions.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

# --- Constants ---
# Generator polynomials without the leading x^L term.
CRC_POLYNOMIALS: Dict[int, int] = {
    4: 0x3,        # CRC-4-ITU
    8: 0x07,       # CRC-8
    12: 0x80F,     # CRC-12
    16: 0x1021,    # CRC-16-CCITT
    20: 0xC1ACF,   # CRC-20
}


@dataclass(frozen=True)
class CrcScheme:
    """A CRC of `length` bits with the given generator (leading term implicit)."""
    length: int
    polynomial: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"CRC length must be positive, got {self.length}")
        if not 0 <= self.polynomial < (1 << self.length):
            raise ValueError(f"polynomial {self.polynomial:#x} does not fit {self.length} bits")


CRC_SCHEMES: Dict[int, CrcScheme] = {length: CrcScheme(length, poly) for length, poly in CRC_POLYNOMIALS.items()}


def crc_scheme(length: int) -> CrcScheme:
    """The repository's scheme for a CRC length in 4, 8, 12, 16, 20."""
    try:
        return CRC_SCHEMES[length]
    except KeyError:
        raise ValueError(f"unsupported CRC length {length}; choose from {sorted(CRC_SCHEMES)}") from None


def crc_remainder(payload, scheme: CrcScheme) -> np.ndarray:
    """The `scheme.length` check bits of `payload`, MSB first."""
    top = scheme.length - 1
    mask = (1 << scheme.length) - 1
    register = 0
    for bit in np.asarray(payload, dtype=np.int64).reshape(-1):
        feedback = ((register >> top) & 1) ^ (int(bit) & 1)
        register = (register << 1) & mask
        if feedback:
            register ^= scheme.polynomial
    return np.array([(register >> (top - j)) & 1 for j in range(scheme.length)], dtype=np.int8)


def crc_append(payload, scheme: CrcScheme) -> np.ndarray:
    """payload followed by its check bits."""
    payload = np.asarray(payload, dtype=np.int8).reshape(-1)
    return np.concatenate((payload, crc_remainder(payload, scheme)))


def crc_check(bits, scheme: CrcScheme) -> bool:
    """True when the last `scheme.length` bits are the check bits of the rest."""
    bits = np.asarray(bits, dtype=np.int8).reshape(-1)
    if bits.size < scheme.length:
        raise ValueError(f"need at least {scheme.length} bits for a CRC-{scheme.length} check, got {bits.size}")
    payload, received = bits[:-scheme.length], bits[-scheme.length:]
    return bool(np.array_equal(crc_remainder(payload, scheme), received))
