"""
Bit-level readers/writers for HEVC RBSP syntax and Annex-B emulation prevention
"""
from ..constants import HevcConstants
from .custom_exceptions import BitstreamExhaustedError


_ESCAPE_SEQUENCE = b"\x00\x00\x03"


def unescape_payload(data: bytes) -> bytes:
    """Remove emulation-prevention bytes (the 0x03 of every 00 00 03)."""
    result = bytearray()
    pos = 0
    while True:
        idx = data.find(_ESCAPE_SEQUENCE, pos)
        if idx == -1:
            result.extend(data[pos:])
            return bytes(result)
        result.extend(data[pos:idx + 2])
        pos = idx + 3


def escape_payload(payload: bytes) -> bytes:
    """Insert emulation-prevention bytes so no start code can appear in the payload.

    A 0x03 follows every 00 00 pair that precedes a byte <= 0x03, and is
    appended when the payload itself ends in 00 00.
    """
    result = bytearray()
    zeros = 0
    for byte in payload:
        if zeros >= 2 and byte <= HevcConstants.EMULATION_PREVENTION_BYTE:
            result.append(HevcConstants.EMULATION_PREVENTION_BYTE)
            zeros = 0
        result.append(byte)
        zeros = zeros + 1 if byte == 0 else 0
    if zeros >= 2:
        result.append(HevcConstants.EMULATION_PREVENTION_BYTE)
    return bytes(result)


class BitReader:
    """MSB-first bit reader over an RBSP (emulation bytes already removed)"""

    def __init__(self, data: bytes):
        self._value = int.from_bytes(data, "big") if data else 0
        self._length = len(data) * 8
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    @property
    def bits_left(self) -> int:
        return self._length - self._pos

    def read_bits(self, n: int) -> int:
        if n == 0:
            return 0
        if n > self.bits_left:
            raise BitstreamExhaustedError(
                f"Needed {n} bits at bit offset {self._pos}, {self.bits_left} left"
            )
        shift = self._length - self._pos - n
        self._pos += n
        return (self._value >> shift) & ((1 << n) - 1)

    def read_flag(self) -> bool:
        return self.read_bits(1) == 1

    def skip_bits(self, n: int) -> None:
        self.read_bits(n)

    def read_ue(self) -> int:
        """Unsigned Exp-Golomb ue(v)."""
        leading_zeros = 0
        while self.read_bits(1) == 0:
            leading_zeros += 1
            if leading_zeros > 32:
                raise BitstreamExhaustedError(f"Exp-Golomb prefix too long at bit offset {self._pos}")
        return (1 << leading_zeros) - 1 + self.read_bits(leading_zeros)

    def read_se(self) -> int:
        """Signed Exp-Golomb se(v)."""
        code = self.read_ue()
        return (code + 1) // 2 if code % 2 == 1 else -(code // 2)


class BitWriter:
    """MSB-first bit writer producing RBSP bytes"""

    def __init__(self) -> None:
        self._value = 0
        self._length = 0

    @property
    def bit_length(self) -> int:
        return self._length

    def write_bits(self, value: int, n: int) -> None:
        if n == 0:
            return
        if value < 0 or value >= (1 << n):
            raise ValueError(f"Value {value} does not fit in {n} bits")
        self._value = (self._value << n) | value
        self._length += n

    def write_flag(self, flag: bool) -> None:
        self.write_bits(1 if flag else 0, 1)

    def write_ue(self, value: int) -> None:
        if value < 0:
            raise ValueError("ue(v) value must be non-negative")
        code = value + 1
        self.write_bits(0, code.bit_length() - 1)
        self.write_bits(code, code.bit_length())

    def write_se(self, value: int) -> None:
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def write_trailing_bits(self) -> None:
        """rbsp_trailing_bits(): a stop bit then zero bits up to byte alignment."""
        self.write_bits(1, 1)
        pad = (-self._length) % 8
        self.write_bits(0, pad)

    def to_bytes(self) -> bytes:
        if self._length % 8:
            raise ValueError("Bitstream is not byte aligned")
        return self._value.to_bytes(self._length // 8, "big")
