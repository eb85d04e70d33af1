"""Drone broadcast-frame detection and decoding in wideband I/Q captures.

Pipeline: protocol-prior filter banks -> spectrogram detection ->
bounding-box correction (bandwidth snapping plus pilot-correlation timing
with segmented energy refinement) -> OFDM synchronization and payload
decoding. A synthesis module builds ground-truth corpora and an
evaluation harness scores IoU/precision/recall sweeps.
"""

from .codec import DecodedPayload, PayloadSchema, pack_payload, parse_payload
from .correct import (
    CorrelationTrace,
    ProtocolPriors,
    RefineParams,
    correct_all,
    correct_frequency,
    correct_time,
    direct_refine,
    segmented_refine,
    zc_cross_correlate,
)
from .detect import BoundingBox, baseline_detect, load_boxes, save_boxes
from .filterbank import FilterBank, FreqPrior, apply_filter_bank, design_filter_bank
from .metrics import MatchResult, iou, match_and_score
from .signal import ChannelParams, ComplexSignal, FrameSpec, read_cf32, write_cf32
from .synth import (
    CaptureEvent,
    CaptureTruth,
    InterferenceParams,
    apply_channel,
    compose_capture,
    synth_broadcast_frame,
    synth_interference,
)
from .tfa import (
    BandwidthEstimate,
    PowerSpectrum,
    TimeFrequencyImage,
    estimate_bandwidth,
    estimate_num_subcarriers,
    gen_zc,
    identify_zc_root,
    stft,
    welch_psd,
)

__version__ = "0.1.0"
