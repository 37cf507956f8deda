"""Intensity Segment Modulation for vibrotactile rendering.

Converts wideband audio into a single low-frequency amplitude-modulated
carrier whose per-segment perceptual intensity matches the source.
"""

__version__ = "0.1.0"

from .errors import (ClipError, ClipInvariantError, ClipSchemaError,  # noqa: E402
                     ClipSyntaxError, ClippingWarning, DownmixWarning,
                     InvalidArgument, IsmError, MalformedWav, UnsupportedWav,
                     WavError, WavNotFound)
from .perception import (FrequencyCurve, PerceptionModel,  # noqa: E402
                         default_model, load_model)
from .pipeline import (AmplitudeEnvelope, AudioSignal, IntensityEnvelope,  # noqa: E402
                       IsmConfig, amplitude_series, convert, intensity_series,
                       segment, segment_intensity, spectrum, synthesize_am)
from .signal_io import (StereoStimulus, WavSpec, make_stereo_stimulus,  # noqa: E402
                        read_wav, reference_tone, write_wav)
from .haptic import (DeviceCalibration, HapticClip, lint_clip,  # noqa: E402
                     parse_clip, to_haptic_clip, write_clip)

__all__ = [
    "ClipError", "ClipInvariantError", "ClipSchemaError", "ClipSyntaxError",
    "ClippingWarning", "DownmixWarning", "InvalidArgument", "IsmError", "MalformedWav",
    "UnsupportedWav", "WavError", "WavNotFound",
    "FrequencyCurve", "PerceptionModel", "default_model", "load_model",
    "AmplitudeEnvelope", "AudioSignal", "IntensityEnvelope", "IsmConfig",
    "amplitude_series", "convert", "intensity_series", "segment", "segment_intensity",
    "spectrum", "synthesize_am",
    "StereoStimulus", "WavSpec", "make_stereo_stimulus", "read_wav", "reference_tone",
    "write_wav",
    "DeviceCalibration", "HapticClip", "lint_clip", "parse_clip", "to_haptic_clip",
    "write_clip",
]
