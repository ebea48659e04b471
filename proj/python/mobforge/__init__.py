"""Python bindings for mobforge."""

import json as _json

from . import _core
from ._core import Error, RunConfig, jsd, load_config, render_prompt, subcommand_names, template_body, template_names

__all__ = [
    "Error",
    "RunConfig",
    "dataset_summary",
    "evaluate",
    "jsd",
    "load_config",
    "render_prompt",
    "run",
    "run_all",
    "subcommand_names",
    "template_body",
    "template_names",
]


def run(subcommand, config):
    """Run one pipeline stage and return its JSON summary as a dict."""
    return _json.loads(_core.run_json(subcommand, config))


def run_all(config, stages=("synth", "cohort", "patterns", "generate", "evaluate")):
    return {s: run(s, config) for s in stages}


def evaluate(real_dir, generated_dir, day_filter="all", workers=1):
    return _json.loads(_core.evaluate_json(real_dir, generated_dir, day_filter, workers))


def dataset_summary(path):
    return _json.loads(_core.dataset_summary_json(path))
