try:
    from ._levelsmith import (
        child_seed,
        evaluate,
        feature_count,
        generate_corpus,
        normalize_level,
        playable,
        shortest_path,
        train_and_sample,
    )
except ImportError:  # running against a plain build tree
    from _levelsmith import (
        child_seed,
        evaluate,
        feature_count,
        generate_corpus,
        normalize_level,
        playable,
        shortest_path,
        train_and_sample,
    )

__all__ = [
    "child_seed",
    "evaluate",
    "feature_count",
    "generate_corpus",
    "normalize_level",
    "playable",
    "shortest_path",
    "train_and_sample",
]
