"""Frame validation, authorization lookups and trace round-trips."""

import numpy as np
import pytest

from canfp.errors import (
    LengthMismatchError,
    NonFiniteSampleError,
    UnknownIdentifierError,
)
from canfp.signal_model import (
    AuthorizationTable,
    VoltageFrame,
    authorized_sender,
    bits_from_bytes,
    count_transitions,
    validate_frame,
)
from canfp.trace_io import TraceHeader, frame_from_json, frame_to_json, read_trace, write_trace


def make_frame(n_bits=8, spb=40, **overrides):
    fields = dict(
        seq=0,
        true_ecu=0,
        claimed_id=0x100,
        authentic_tag=False,
        sample_rate=spb * 500e3,
        bit_rate=500e3,
        data_bits=tuple([1, 0] * (n_bits // 2)),
        samples=np.zeros(n_bits * spb),
        trip=0,
        temperature_c=20.0,
    )
    fields.update(overrides)
    return VoltageFrame(**fields)


TABLE = AuthorizationTable({0x100: 0, 0x110: 1})


class TestValidateFrame:
    def test_valid_frame_passes(self):
        frame = make_frame(n_bits=8, spb=40)
        assert frame.samples.shape == (320,)
        assert validate_frame(frame, TABLE) is frame

    def test_length_mismatch(self):
        frame = make_frame(samples=np.zeros(319))
        with pytest.raises(LengthMismatchError):
            validate_frame(frame, TABLE)

    def test_unknown_identifier(self):
        frame = make_frame(claimed_id=0x200)
        with pytest.raises(UnknownIdentifierError):
            validate_frame(frame, TABLE)

    def test_non_finite_sample(self):
        samples = np.zeros(320)
        samples[17] = np.nan
        frame = make_frame(samples=samples)
        with pytest.raises(NonFiniteSampleError):
            validate_frame(frame, TABLE)


class TestAuthorizedSender:
    def test_direct_lookup(self):
        assert authorized_sender(0x100, AuthorizationTable({0x100: 2})) == 2

    def test_map_miss(self):
        with pytest.raises(UnknownIdentifierError):
            authorized_sender(0x200, AuthorizationTable({0x100: 2}))

    def test_bijective_table(self):
        table = AuthorizationTable({0x100 + e: e for e in range(6)})
        senders = [authorized_sender(0x100 + e, table) for e in range(6)]
        assert senders == list(range(6))


class TestBits:
    def test_bits_from_bytes(self):
        assert bits_from_bytes(b"\x80\x01") == (1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1)

    def test_count_transitions(self):
        assert count_transitions((1, 0, 0, 1)) == (1, 1)
        assert count_transitions((1, 1, 1)) == (0, 0)
        assert count_transitions((1, 0, 1, 0)) == (2, 1)


class TestTraceRoundTrip:
    def test_frame_json_round_trip(self):
        rng = np.random.default_rng(3)
        frame = make_frame(samples=rng.normal(1.0, 0.5, 320), attack=True, mac_tag="abc123")
        parsed = frame_from_json(frame_to_json(frame))
        assert parsed.seq == frame.seq
        assert parsed.claimed_id == frame.claimed_id
        assert parsed.attack is True
        assert parsed.mac_tag == "abc123"
        assert parsed.data_bits == frame.data_bits
        np.testing.assert_allclose(parsed.samples, frame.samples, atol=1e-9)

    def test_reserialization_is_byte_stable(self):
        rng = np.random.default_rng(4)
        frame = make_frame(samples=rng.normal(1.0, 0.5, 320))
        once = frame_to_json(frame_from_json(frame_to_json(frame)))
        twice = frame_to_json(frame_from_json(once))
        assert once == twice

    def test_trace_file_round_trip(self, tmp_path, unit_trace):
        _, header, frames = unit_trace
        path = tmp_path / "copy.jsonl"
        write_trace(path, header, frames[:25])
        header2, frames2 = read_trace(path)
        assert header2.authorization.entries == header.authorization.entries
        assert header2.sample_rate == header.sample_rate
        assert len(frames2) == 25
        for a, b in zip(frames[:25], frames2):
            assert a.seq == b.seq
            assert a.data_bits == b.data_bits
            np.testing.assert_allclose(a.samples, b.samples, atol=1e-9)

    def test_simulated_frames_divisible(self, unit_trace):
        cfg, header, frames = unit_trace
        spb = int(header.sample_rate / header.bit_rate)
        for frame in frames[:80]:
            assert frame.samples.shape[0] == len(frame.data_bits) * spb
