import struct

import numpy as np
import pytest

from attnurse import atnm
from attnurse.attention import GridDims
from attnurse.errors import FormatError


class TestEncoding:
    def test_header_layout(self):
        data = atnm.encode(np.zeros((2, 3, 4)))
        assert data[:4] == bytes([0x41, 0x54, 0x4E, 0x4D])
        assert struct.unpack("<IIII", data[4:20]) == (1, 2, 3, 4)
        assert len(data) == 20 + 8 * 24

    def test_row_major_little_endian_body(self):
        stack = np.arange(12, dtype=np.float64).reshape(2, 3, 2)
        body = atnm.encode(stack)[20:]
        assert struct.unpack("<12d", body) == tuple(float(v) for v in range(12))

    def test_read_dims(self):
        assert atnm.read_dims(atnm.encode(np.ones((5, 1, 2)))) == GridDims(5, 1, 2)

    def test_round_trip_bits(self):
        vals = np.array([0.0, -0.0, 5e-324, 2.2e-308, 1.7976931348623157e308, np.inf, np.nan, 1.0])
        stack = vals.reshape(2, 2, 2)
        back = atnm.decode(atnm.encode(stack))
        assert back.tobytes() == stack.tobytes()

    def test_file_round_trip(self, tmp_path):
        stack = np.random.default_rng(0).random((3, 4, 2))
        atnm.save(tmp_path / "s.atnm", stack)
        assert atnm.load(tmp_path / "s.atnm").tobytes() == stack.tobytes()


class TestRejects:
    def test_bad_magic(self):
        data = bytearray(atnm.encode(np.ones((1, 1, 1))))
        data[0] = ord("X")
        with pytest.raises(FormatError, match="magic"):
            atnm.decode(bytes(data))

    def test_bad_version(self):
        data = bytearray(atnm.encode(np.ones((1, 1, 1))))
        data[4] = 2
        with pytest.raises(FormatError, match="version"):
            atnm.decode(bytes(data))

    @pytest.mark.parametrize("cut", [3, 19, 27])
    def test_truncated(self, cut):
        with pytest.raises(FormatError):
            atnm.decode(atnm.encode(np.ones((1, 1, 2)))[:cut])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError):
            atnm.decode(atnm.encode(np.ones((1, 1, 1))) + b"\0")

    def test_wrong_rank(self):
        with pytest.raises(FormatError):
            atnm.encode(np.ones((2, 2)))
