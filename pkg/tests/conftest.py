import numpy as np
import pytest

from dronerid import codec
from dronerid.correct import ProtocolPriors
from dronerid.filterbank import builtin_prior
from dronerid.signal import FrameSpec
from dronerid.synth import synth_broadcast_frame


@pytest.fixture(scope="session")
def spec() -> FrameSpec:
    return FrameSpec()


@pytest.fixture(scope="session")
def priors(spec) -> ProtocolPriors:
    return ProtocolPriors(freq_prior=builtin_prior("2g4_fs100"), frame_spec=spec)


@pytest.fixture(scope="session")
def payload_bits() -> np.ndarray:
    block = codec.pack_payload(
        "1AS0123456789AB", 30.2741497, 120.1551, 55.0, 12.5, bytes(range(16))
    )
    return block[:codec.DEFAULT_SCHEMA.message_bits]


@pytest.fixture(scope="session")
def clean_frame(spec, payload_bits):
    return synth_broadcast_frame(spec, payload_bits)
