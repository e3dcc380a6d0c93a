"""handrec: handwritten word-image recognition with global semantic supervision.

The pipeline rectifies a word image with a learned thin-plate-spline warp,
encodes it into a horizontal feature sequence, predicts a global semantic
vector supervised by subword word embeddings, and decodes characters with a
semantic-initialized attention GRU.
"""

from .augment import AugmentSettings, augment, preprocess
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import (
    BOS,
    EOS,
    PAD,
    UNK,
    Charset,
    WordSample,
    build_charset,
    decode_tokens,
    encode_transcription,
    load_dataset,
    split_samples,
)
from .decoder import AttentionDecoder, Hypothesis
from .embeddings import (
    EmbeddingTable,
    SubwordConfig,
    ToyCorpus,
    embed_word,
    extract_subwords,
    load_embedding_file,
    save_embedding_file,
    train_skipgram,
)
from .encoder import EncoderConfig, VisualEncoder
from .evaluate import evaluate, run_ablation, similarity_matrix
from .metrics import EditOps, MetricReport, cer, edit_ops, wer
from .model import ModelConfig, Recognizer
from .rectify import (
    ControlPoints,
    LocalizationNetwork,
    Rectifier,
    SamplingGrid,
    TpsTransform,
    generate_grid,
    predict_control_points,
    sample_bilinear,
    solve_tps,
)
from .semantic import SemanticHead, cosine_embedding_loss, predict_semantics
from .synth import Degradations, SynthConfig, default_fonts, load_lexicon, synthesize_dataset
from .training import LossBreakdown, TrainConfig, total_loss, train

__version__ = "0.1.0"
