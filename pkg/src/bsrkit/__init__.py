"""bsrkit: bit-sequence audio features, spectral features, noise synthesis,
desk-scale classification, and posterior score fusion."""

__version__ = "0.1.0"

from bsrkit.audio_io import PcmClip, Waveform, load_wav, normalize_peak, pad_or_trim, scan_dataset, write_wav
from bsrkit.bsr import BitMatrix, Float16Bits, bit_pulses, decode_float16, encode_float16, encode_int16, waveform_to_bsr
from bsrkit.spectral import FeatureMatrix, FrameConfig, fbank, mfcc
from bsrkit.noise import NoiseSpec, mix_at_snr, pink_noise, white_noise
from bsrkit.scores import ScoreMatrix
from bsrkit.classifier import SoftmaxModel, TrainConfig, pool, sgdr_lr, train
from bsrkit.fusion import FusionSpec, accuracy, confusion, fuse, predict

__all__ = [
    "PcmClip", "Waveform", "load_wav", "write_wav", "pad_or_trim", "normalize_peak", "scan_dataset",
    "Float16Bits", "BitMatrix", "encode_float16", "decode_float16", "encode_int16",
    "waveform_to_bsr", "bit_pulses",
    "FrameConfig", "FeatureMatrix", "fbank", "mfcc",
    "NoiseSpec", "white_noise", "pink_noise", "mix_at_snr",
    "ScoreMatrix", "SoftmaxModel", "TrainConfig", "pool", "sgdr_lr", "train",
    "FusionSpec", "fuse", "predict", "accuracy", "confusion",
]
