"""Wall-clock measurement: end-to-end decode runs and projection scaling.

End-to-end timing opens the model file inside the measured window, so
loading and (for trimmed runs) slicing count toward the total, matching
how a deployment would pay for trimming. The scaling microbenchmark
instead isolates the output projection with a warm-up pass, because it
asks a different question: how the per-step cost grows with |V|.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import VtError
from .subvocab import SubVocabulary
from .toylm import greedy_decode, load_model, project_rows, trim_model


@dataclass(frozen=True)
class BenchResult:
    """Timing for the median end-to-end run. The phase windows are
    adjacent, so they sum exactly to end_to_end_seconds."""

    end_to_end_seconds: float
    load_seconds: float
    slice_seconds: float
    decode_seconds: float
    tokens_generated: int
    vocab_size_used: int
    repeats: int

    def __post_init__(self) -> None:
        for name in ("end_to_end_seconds", "load_seconds", "slice_seconds", "decode_seconds"):
            if getattr(self, name) < 0:
                raise VtError(f"{name} must be non-negative")
        phase_sum = self.load_seconds + self.slice_seconds + self.decode_seconds
        if phase_sum > self.end_to_end_seconds:
            raise VtError("phase times exceed the end-to-end window")


def time_end_to_end(
    model_path: str,
    sub: SubVocabulary | None,
    prompts: Sequence[Sequence[int]],
    max_new: int,
    repeats: int = 5,
    eos: int = 2,
) -> tuple[BenchResult, list[list[int]]]:
    """Measure repeated full pipelines: load from disk, slice, decode all
    prompts. Returns the median run (by end-to-end time; lower median for
    even repeats) and the decoded original-id sequences, which must be
    identical across repeats."""
    if repeats < 1:
        raise VtError(f"repeats must be >= 1, got {repeats}")
    runs: list[tuple[float, float, float]] = []
    outputs_first: list[list[int]] | None = None
    vocab_size_used = 0
    tokens_generated = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        model = load_model(model_path)
        t1 = time.perf_counter()
        if sub is not None:
            model = trim_model(model, sub)
        t2 = time.perf_counter()
        outputs: list[list[int]] = []
        tokens = 0
        for prompt in prompts:
            result = greedy_decode(model, list(prompt), max_new, eos, sub=sub)
            outputs.append(result.ids)
            tokens += result.steps
        t3 = time.perf_counter()
        runs.append((t1 - t0, t2 - t1, t3 - t2))
        vocab_size_used = model.config.vocab_size
        tokens_generated = tokens
        if outputs_first is None:
            outputs_first = outputs
        elif outputs != outputs_first:
            raise VtError("decode outputs changed between repeats")
        del model  # release before the next load; the big models are ~1 GiB

    order = sorted(range(repeats), key=lambda i: sum(runs[i]))
    load_s, slice_s, decode_s = runs[order[(repeats - 1) // 2]]
    result = BenchResult(
        end_to_end_seconds=load_s + slice_s + decode_s,
        load_seconds=load_s,
        slice_seconds=slice_s,
        decode_seconds=decode_s,
        tokens_generated=tokens_generated,
        vocab_size_used=vocab_size_used,
        repeats=repeats,
    )
    assert outputs_first is not None
    return result, outputs_first


def output_layer_scaling(
    hidden: int,
    vocab_sizes: Sequence[int],
    trials: int = 5,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Median seconds for one |V| x H -> |V| projection at each size.

    Uses the same kernel as the model forward pass. One untimed warm-up
    projection per size populates caches before measurement.
    """
    if trials < 3:
        raise VtError(f"trials must be >= 3, got {trials}")
    if hidden < 1 or any(v < 1 for v in vocab_sizes):
        raise VtError("hidden and vocab sizes must be >= 1")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(hidden, dtype=np.float32)
    results: list[tuple[int, float]] = []
    for vocab_size in vocab_sizes:
        matrix = rng.standard_normal((vocab_size, hidden), dtype=np.float32)
        project_rows(matrix, vec)  # warm-up, untimed
        times = []
        for _ in range(trials):
            t0 = time.perf_counter()
            project_rows(matrix, vec)
            times.append(time.perf_counter() - t0)
        times.sort()
        results.append((vocab_size, times[(trials - 1) // 2]))
        del matrix
    return results
