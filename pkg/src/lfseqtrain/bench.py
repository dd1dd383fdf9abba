"""Wall-clock benchmark of loss+gradient evaluation per criterion."""

from __future__ import annotations

import platform
import time

import numpy as np

from lfseqtrain.core import PosteriorTable
from lfseqtrain.criteria import Settings, evaluate
from lfseqtrain.fullsum import viterbi_align
from lfseqtrain.lm import train_lm

BENCH_CRITERIA = ("cefs", "lfmmi", "lfsegmbr", "lfmbr", "nbest-mbr")


def machine_info() -> list[str]:
    return [
        f"python {platform.python_version()} ({platform.python_implementation()})",
        f"numpy {np.__version__}",
        f"platform {platform.platform()}",
        f"processor {platform.processor() or platform.machine()}",
    ]


def synthetic_instance(T: int, V: int, k: int, seed: int):
    """Blank-heavy random table, a target of about T/4 labels, and a bigram-style LM."""
    rng = np.random.default_rng(seed)
    table = PosteriorTable.random(T, V, k, rng, scale=2.0, blank_bias=3.0)
    S = max(1, T // 4)
    target = tuple(int(a) for a in rng.integers(0, V, S))
    corpus = [tuple(int(a) for a in rng.integers(0, V, S)) for _ in range(20)] + [target]
    lm = train_lm(corpus, V, k, kappa=1.0)
    return table, target, lm


def run_bench(
    T: int = 100,
    V: int = 40,
    k: int = 1,
    reps: int = 3,
    seed: int = 0,
    settings: Settings = Settings(),
    criteria=BENCH_CRITERIA,
) -> list[dict]:
    """Mean milliseconds per utterance for each criterion.

    The reference alignment of the MBR criteria is computed once outside the
    timed region; the N-best row includes beam decoding.
    """
    table, target, lm = synthetic_instance(T, V, k, seed)
    viterbi = viterbi_align(table, target)
    rows = []
    for criterion in criteria:
        evaluate(criterion, table, target, lm, settings, viterbi)
        start = time.perf_counter()
        for _ in range(reps):
            evaluate(criterion, table, target, lm, settings, viterbi)
        elapsed = (time.perf_counter() - start) / reps
        rows.append({"criterion": criterion, "T": T, "V": V, "k": k, "ms_per_utt": 1000.0 * elapsed})
    return rows


def speedups(rows: list[dict], baseline: str = "nbest-mbr") -> dict[str, float]:
    """Relative time saved versus the baseline, e.g. 0.7 for 70 % faster."""
    times = {r["criterion"]: r["ms_per_utt"] for r in rows}
    if baseline not in times:
        return {}
    return {c: 1.0 - t / times[baseline] for c, t in times.items() if c != baseline}
