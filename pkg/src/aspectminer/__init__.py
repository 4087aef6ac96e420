"""aspectminer: per-aspect binary classification of API discussion sentences.

Pipeline: HTML normalization -> wordpiece tokenization to 100 positions ->
per-token embedding -> masked max pooling -> two-layer softmax head, with a
TF-IDF + linear SVM baseline and a stratified 10-fold evaluation harness.
"""

__version__ = "0.1.0"

from .aspects import ALL_ASPECTS, Aspect, parse_aspect
from .baseline import (
    SvmBinaryClassifier,
    VocabConfig,
    VocabularyModel,
    fit_vocabulary,
    load_svm,
    predict_svm,
    save_svm,
    train_svm,
    vectorize,
)
from .benchmark import benchmark_path, write_benchmark
from .classifier import (
    ClassifierHead,
    Detection,
    HeadConfig,
    Prediction,
    TrainConfig,
    TrainedAspectModel,
    build_head,
    default_train_config,
    detect_aspects,
    fine_tune,
    forward,
    load_model,
    predict_aspect,
    save_model,
)
from .corpus import (
    AspectDistribution,
    BinaryView,
    Dataset,
    LabeledSentence,
    binarize,
    dataset_stats,
    load_dataset,
)
from .encoder import (
    ENCODER_REGISTRY,
    EncoderSpec,
    PooledVector,
    TokenEmbeddings,
    TokenSequence,
    embed,
    load_encoder,
    max_pool,
    save_encoder,
    tiny_spec,
    tokenize,
)
from .evaluation import (
    AspectResult,
    ComparisonReport,
    ConfusionCounts,
    FoldSplit,
    Metrics,
    compare,
    confusion,
    cross_validate,
    finetune_trainer,
    kfold_split,
    precision_recall_f1,
    svm_trainer,
)
from .preprocess import (
    CleanSentence,
    RawThreadItem,
    clean_text,
    normalize_links,
    preprocess,
    replace_code,
    strip_html,
)
from .report import render_report, report_from_json, write_report_files
