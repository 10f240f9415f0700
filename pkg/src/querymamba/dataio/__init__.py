from .clips import (
    WINDOW_SECONDS,
    ClipAnnotation,
    Example,
    ExampleSkipped,
    FeatureSequence,
    InsufficientDurationError,
    choose_cut,
    clip_duration_for,
    generate_clip,
    generate_split,
    make_example,
    sample_action_chain,
)
from .ego4d import read_ego4d_lta
from .formats import (
    load_split,
    read_annotations,
    read_features,
    read_truths,
    write_annotations,
    write_features,
    write_split,
)
from .world import SyntheticWorldSpec, generate_world, stationary_distribution
