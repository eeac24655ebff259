"""fredkit: deterministic tooling for frequency-dependent sound event detection.

Everything around model training: spectrogram augmentation, dynamic-conv
forward kernels with an equivalence oracle, coarse prediction pooling,
median and bounding-box post-processing, ensembling, pseudo-label
filtering, and PSDS1 / MPAUC evaluation.
"""

from .augment import (
    AugmentConfig,
    RngStream,
    SpectroFeature,
    augment_chain,
    filter_augment,
    freq_warp,
    mixup,
    sample_filter_curve,
)
from .core import (
    ClassVocabulary,
    ClipManifest,
    EventBox,
    FormatError,
    ScoreMatrix,
    apply_dataset_mask,
    format_events_tsv,
    parse_events_tsv,
    parse_score_csv,
)
from .ensemble import ModelRun, average_scores, select_best
from .freqconv import (
    AttentionParams,
    BasisKernelBank,
    PartialConvConfig,
    SEParams,
    fdy_forward,
    freq_attention,
    naive_oracle_forward,
    pfd_forward,
    se_forward,
    tfwse_forward,
)
from .metrics import MpaucSpec, PsdsSpec, match_detections, mpauc, psd_roc, psds1, sum_score
from .pooling import PoolingSpec, coarse_pool
from .postproc import CSebbSpec, MedianSpec, csebb_extract, median_filter
from .pseudolabel import (
    PseudoFilterSpec,
    WeakLabel,
    clip_confidence,
    filter_audioset,
    harden,
    mask_weak,
)

__version__ = "0.1.0"
