"""Datasets, held-out-class folds and episode streams."""

from lexseg.dataset.episodes import Episode, EpisodeStream, sample_episodes
from lexseg.dataset.partitions import (
    VOC_CLASSES,
    PartitionSpec,
    get_partition,
    label_text,
    load_partition_file,
    load_partitions,
)
from lexseg.dataset.store import Sample, SampleStore
from lexseg.dataset.synthetic import (
    SYNTH_CLASSES,
    load_corpus,
    save_corpus,
    synth_partitions,
    synth_shapes_corpus,
)
from lexseg.dataset.voc import convert_sbd, cooccurrence, ingest_voc_sbd, load_converted_sbd, load_voc_split

__all__ = [
    "Episode",
    "EpisodeStream",
    "PartitionSpec",
    "SYNTH_CLASSES",
    "Sample",
    "SampleStore",
    "VOC_CLASSES",
    "convert_sbd",
    "cooccurrence",
    "get_partition",
    "ingest_voc_sbd",
    "label_text",
    "load_converted_sbd",
    "load_corpus",
    "load_partition_file",
    "load_partitions",
    "load_voc_split",
    "sample_episodes",
    "save_corpus",
    "synth_partitions",
    "synth_shapes_corpus",
]
