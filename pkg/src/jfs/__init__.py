"""Judge segmentation refinement with a few-shot-segmentation oracle.

The toolkit decides whether a refinement step actually improved a coarse
segmentation mask: prompt a few-shot segmentation model with each candidate
mask, let it segment a held-out support image with trusted ground truth, and
keep whichever candidate reproduces that ground truth better.
"""

from .dataio import (
    CandidateBank,
    DatasetIndex,
    EvalReport,
    ReportRow,
    load_candidate_bank,
    load_dataset,
    read_report,
    write_report,
)
from .errors import (
    BackendError,
    ContractViolationError,
    DimensionError,
    DuplicateEntryError,
    EmptyAggregateError,
    FormatError,
    GenerationError,
    GroupError,
    InvalidClassError,
    JfsError,
    MissingEntryError,
    ProtocolError,
    RleFormatError,
    SpawnError,
    SupportPoolError,
    UndefinedRegionError,
)
from .evaluation import (
    GroupSpec,
    JudgingDataset,
    SampleRecord,
    evaluate,
    improvement,
    judge_all,
    load_judging_dataset,
    pair_support,
    select_group,
    success,
    summarize,
)
from .fss import (
    EchoBackend,
    ExternalBackend,
    FssBackend,
    PrototypeBackend,
    PrototypeConfig,
    SupportPair,
    echo_predict,
    external_backend,
    predict,
    prototype_predict,
    resample_nearest,
)
from .judge import JudgeCase, JudgeResult, Verdict, judge, pick
from .maskcore import (
    BinaryMask,
    LabelMap,
    Rle,
    extract_class,
    iou,
    mask_algebra,
    masked_iou,
    mean_iou,
    morph,
    rle_decode,
    rle_encode,
    rle_from_bytes,
    rle_to_bytes,
)
from .refine import Assignment, RefineConfig, assign_candidates, refine, select_and_merge
from .synth import (
    DegradeConfig,
    SceneConfig,
    Shape,
    degrade_mask,
    derive_seed,
    generate_benchmark,
    generate_scene,
    oversegment,
    sample_shapes,
    seeded_rng,
)

__version__ = "0.1.0"
