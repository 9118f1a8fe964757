"""Shared configuration defaults and TOML loading.

One table per pipeline stage, mirroring the module defaults. A config file
only needs the keys it wants to override; unknown keys are rejected so typos
fail loudly instead of silently keeping a default.
"""

from __future__ import annotations

import copy
from pathlib import Path

import tomli

from ..errors import ParameterError

DEFAULTS: dict = {
    "synth": {
        "n_concepts": 200,
        "depth": 5,
        "branch_min": 2,
        "branch_max": 4,
        "extra_parent_prob": 0.15,
        "n_sentences": 20000,
        "zipf_s": 1.1,
        "signature_tokens_per_concept": 2,
        "noise_sigma": 0.05,
        "d_f": 32,
        "seed": 0,
    },
    "extractor": {
        "backend": "oracle",
        "p_drop": 0.1,
        "p_spur": 0.0,
        "tau": 0.5,
        "m_cap": 8,
        "epochs": 40,
        "lr": 1.0,
        "l2": 1e-4,
        "sample": 4000,
    },
    "sir": {
        "d": 64,
        "lr": 0.1,
        "epochs": 5,
        "init_scale": 0.1,
        "n_pairs": 10000,
        "n_neg_excluded": 10,
        "n_neg_random": 10,
        "max_included": 1,
        "seed": 0,
    },
    "loop": {
        "budget": 5,
        "annotator": "oracle",
    },
    "fsner": {
        "k": 5,
        "skew": 1.0,
        "pool_fraction": 0.5,
        "n_seeds": 10,
        "n_types": 3,
        "strategies": ["vanilla", "random", "kmeans", "entropy", "supercd"],
        "classifier_lr": 1.0,
        "classifier_l2": 1e-3,
        "base_seed": 0,
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8765,
        "store": "sessions",
    },
}


def load_config(path: str | Path | None) -> dict:
    """DEFAULTS deep-merged with the TOML file at ``path`` (if given)."""
    merged = copy.deepcopy(DEFAULTS)
    if path is None:
        return merged
    path = Path(path)
    if not path.exists():
        raise ParameterError(f"config file not found: {path}")
    with path.open("rb") as fh:
        try:
            overrides = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ParameterError(f"config file {path} is not valid TOML: {exc}") from exc
    for section, values in overrides.items():
        if section not in merged:
            raise ParameterError(f"unknown config section: [{section}]")
        if not isinstance(values, dict):
            raise ParameterError(f"config section [{section}] must be a table")
        for key, value in values.items():
            if key not in merged[section]:
                raise ParameterError(f"unknown config key: {section}.{key}")
            merged[section][key] = value
    return merged
