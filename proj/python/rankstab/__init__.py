"""Ranking-stability statistics, surface metrics and the batch pipeline."""

import json

from . import _rankstab
from ._rankstab import (
    ConfigError,
    DataError,
    classify_agreement,
    fleiss_kappa,
    inversions,
    kendall_tau,
    mattr,
    permutation_test,
    render_report,
    self_bleu,
    spearman,
    tokenize,
    ttr,
)

__all__ = [
    "ConfigError",
    "DataError",
    "analyze_pair",
    "classify_agreement",
    "fleiss_kappa",
    "inversions",
    "kendall_tau",
    "mattr",
    "permutation_test",
    "power_analysis",
    "render_report",
    "run_cli",
    "sample_params",
    "self_bleu",
    "spearman",
    "tokenize",
    "ttr",
]


def analyze_pair(scores, first, second, n_boot=1500, n_perm=10000, seed=0):
    """Tau, rho, bootstrap intervals and the permutation test for one language pair.

    `scores` maps model -> language -> per-dialogue scores.
    """
    return json.loads(_rankstab.analyze_pair_json(scores, first, second, n_boot, n_perm, seed))


def sample_params(n, language, seed=0):
    return json.loads(_rankstab.sample_params_json(n, language, seed))


def power_analysis(**kwargs):
    return json.loads(_rankstab.power_analysis_json(**kwargs))


def run_cli(*args):
    """Runs one CLI invocation in-process; returns (exit code, stdout, stderr)."""
    return _rankstab.run_cli([str(a) for a in args])
