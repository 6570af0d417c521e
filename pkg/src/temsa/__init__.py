"""temsa: multimodal sentiment from fused caption text and detected object
names.

The pipeline extracts object names from images, concatenates them with the
sample's caption or superimposed text into one token sequence, trains
text/image/multimodal sentiment classifiers, and compares experiments with a
Wilcoxon signed-rank test.
"""

from .labels import (
    LABEL_TO_INDEX,
    INDEX_TO_LABEL,
    NUM_CLASSES,
    SENTIMENTS,
    WILCOXON_CODES,
    LabelError,
)
from .corpus import (
    Dataset,
    KEEP_POLAR,
    ManifestError,
    STRICT_EQUAL,
    Sample,
    derive_joint_labels,
    filter_english_text,
    load_manifest,
    save_manifest,
    split_train_test,
    summarize,
)
from .tems import (
    LengthPolicy,
    MVSA_POLICY,
    PAD_INDEX,
    POLICIES,
    SIMPSON_POLICY,
    TemsSequence,
    Vocabulary,
    build_tems,
    clean_text,
    encode_pad,
    decode,
    load_embeddings,
    tokenize,
)
from .detect import (
    COCO_CLASSES,
    Detection,
    DetectionCache,
    Detections,
    DetectorError,
    FixtureDetector,
    detect_objects,
    merge_detections,
    object_count_histogram,
    single_object_subset,
)
from .records import ResultRecord, load_record, save_record
from .expctl import (
    ExperimentConfig,
    derive_seeds,
    evaluate_checkpoint,
    run_experiment,
    train_experiment,
)

__version__ = "0.1.0"
