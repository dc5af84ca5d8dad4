"""Audio difference explanation at desk scale.

A self-contained stack for the task of explaining, in natural language, how
two recordings differ: a small autodiff engine and optimizer, an audio
frontend with a toy event tagger, a byte-level BPE tokenizer and prompt
database, the prefix-tuned explanation model with its cross-projection
layer, staged training with ablations, top-k/top-p decoding, the caption
metric suite, the dataset construction pipeline, and a human-annotation
HTTP service. See the demos directory for narrative walkthroughs of each
piece.
"""

from .audio import AudioClip, MelConfig, MelSpec, load_wav, mel_spectrogram, save_wav
from .decoding import DecodeConfig, greedy_decode, topk_topp_decode
from .metrics import EvalPair, MetricReport, evaluate_pairs, pairs_from_texts
from .model import DiffExplainer, ModelConfig, PrefixAssembly, nearest_vocab
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .pipeline import System, load_system, save_system
from .prompts import PromptDB, default_prompt_db
from .tagger import AudioEncoder, EncoderConfig, EventTimeline, tag_events
from .tokenizer import Vocab, metric_tokenize, train_bpe
from .training import StagePlan, build_stage_plan, run_ablation, train_stage

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "MelConfig",
    "MelSpec",
    "load_wav",
    "save_wav",
    "mel_spectrogram",
    "DecodeConfig",
    "greedy_decode",
    "topk_topp_decode",
    "EvalPair",
    "MetricReport",
    "evaluate_pairs",
    "pairs_from_texts",
    "DiffExplainer",
    "ModelConfig",
    "PrefixAssembly",
    "nearest_vocab",
    "AdamState",
    "LrSchedule",
    "adam_step",
    "lr_at",
    "System",
    "load_system",
    "save_system",
    "PromptDB",
    "default_prompt_db",
    "AudioEncoder",
    "EncoderConfig",
    "EventTimeline",
    "tag_events",
    "Vocab",
    "metric_tokenize",
    "train_bpe",
    "StagePlan",
    "build_stage_plan",
    "run_ablation",
    "train_stage",
]
