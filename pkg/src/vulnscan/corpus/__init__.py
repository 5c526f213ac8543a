from vulnscan.corpus.clean import clean_source, has_marker, normalize_format, scrub_markers, strip_comments
from vulnscan.corpus.dataset import DatasetFormatError, read_dataset, split_dataset, write_dataset
from vulnscan.corpus.sard import (
    N_CLASSES,
    NONVULN,
    CleanRecord,
    LabelMap,
    ScanResult,
    SourceFile,
    Split,
    UnknownTagError,
    Variant,
    preprocess,
    scan_sard,
)

__all__ = [
    "N_CLASSES",
    "NONVULN",
    "CleanRecord",
    "DatasetFormatError",
    "LabelMap",
    "ScanResult",
    "SourceFile",
    "Split",
    "UnknownTagError",
    "Variant",
    "clean_source",
    "has_marker",
    "normalize_format",
    "preprocess",
    "read_dataset",
    "scan_sard",
    "scrub_markers",
    "split_dataset",
    "strip_comments",
    "write_dataset",
]
