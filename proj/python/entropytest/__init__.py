"""Compression-based test for the order of a Markov source."""

import json

from ._core import (
    Alphabet,
    ArgumentError,
    CapacityError,
    CodecError,
    Error,
    ModelError,
    ParseError,
    Sequence,
    SourceModel,
    SpecError,
    UnsupportedError,
    conditional_entropy,
    empirical_entropy,
    external_code_length,
    kl_divergence,
    kraft_sum,
    limit_entropy,
    log_measure,
    log_probability,
    max_markov_log_prob,
    p_value_bound,
    parse_sequence,
    read_sequence_file,
    sample,
    stationary_distribution,
    test_statistic,
    verify_groups,
    word_count,
)
from . import _core


def parse(text, alphabet="binary"):
    """Parse a text or bytes payload under an alphabet spec."""
    if isinstance(text, str):
        text = text.encode("latin-1")
    if isinstance(alphabet, str):
        alphabet = Alphabet(alphabet)
    return parse_sequence(text, alphabet)


def run_test(seq, order=0, alpha=0.05, measure="mixture"):
    """Run the test on one sample; returns the outcome as a dict."""
    return json.loads(_core._run_test(seq, order, alpha, measure))


def run_experiment(spec, base_dir=".", threads=1):
    """Monte Carlo rejection rates for an experiment spec given as a dict."""
    return json.loads(_core._run_mc(json.dumps(spec), base_dir, threads))


def verify(groups=(), seed=20240101):
    return json.loads(_core._verify(list(groups), seed))


def source(doc):
    """SourceModel from a source document given as a dict."""
    return SourceModel.from_json(json.dumps(doc))
