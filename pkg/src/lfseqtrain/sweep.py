"""DP-versus-enumeration sweep over small random instances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from lfseqtrain import oracle
from lfseqtrain.core import PosteriorTable
from lfseqtrain.fullsum import ce_fs_loss, viterbi_align
from lfseqtrain.lfmbr import UNPRUNED, MbrConfig, mbr_loss
from lfseqtrain.lfmmi import mmi_loss
from lfseqtrain.lfsegmbr import SegMbrConfig, segmbr_loss
from lfseqtrain.lm import ScoreScales, train_lm

TOLERANCE = 1e-9


@dataclass
class SweepRow:
    T: int
    V: int
    k: int
    criterion: str
    pruning: str
    dp: float
    brute: float

    @property
    def error(self) -> float:
        return abs(self.dp - self.brute)

    @property
    def passed(self) -> bool:
        return self.error <= TOLERANCE


def sweep_instance(T: int, V: int, k: int, rng: np.random.Generator):
    table = PosteriorTable.random(T, V, k, rng)
    target = tuple(int(a) for a in rng.integers(0, V, int(rng.integers(1, T + 1))))
    lm = train_lm([target, tuple(int(a) for a in rng.integers(0, V, 3))], V, k, kappa=1.0)
    return table, target, lm


def run_sweep(
    T_values: Iterable[int] = range(2, 7),
    V_values: Iterable[int] = (1, 2, 3),
    k_values: Iterable[int] = (1, 2),
    seed: int = 0,
    scales: ScoreScales = ScoreScales(1.2, 0.3),
    cap: int = oracle.DEFAULT_CAP,
) -> list[SweepRow]:
    T_values, V_values, k_values = list(T_values), list(V_values), list(k_values)
    largest = oracle.enumeration_size(max(T_values), max(V_values))
    if largest > cap:
        raise oracle.EnumerationCapError(f"sweep needs {largest} alignments per instance, cap is {cap}")
    rng = np.random.default_rng(seed)
    rows = []
    for T in T_values:
        for V in V_values:
            for k in k_values:
                table, target, lm = sweep_instance(T, V, k, rng)
                align, seg = viterbi_align(table, target)

                def add(criterion, pruning, dp, brute):
                    rows.append(SweepRow(T, V, k, criterion, pruning, dp, brute))

                add("cefs", "off", ce_fs_loss(table, target).value, oracle.brute_loss("cefs", table, target))
                add(
                    "lfmmi",
                    "off",
                    mmi_loss(table, target, lm, scales).value,
                    oracle.brute_loss("lfmmi", table, target, lm, scales),
                )
                for pruning, cfg in (("off", SegMbrConfig(L=2, c=0.3, I=T)), ("on", SegMbrConfig(L=2, c=0.3, I=1))):
                    add(
                        "lfsegmbr",
                        pruning,
                        segmbr_loss(table, target, (align, seg), lm, scales, cfg).value,
                        oracle.brute_loss("lfsegmbr", table, target, lm, scales, align, seg_cfg=cfg),
                    )
                for pruning, cfg in (("off", UNPRUNED), ("on", MbrConfig(L=2, gamma=1.1, W=1))):
                    add(
                        "lfmbr",
                        pruning,
                        mbr_loss(table, target, seg, lm, scales, cfg).value,
                        oracle.brute_loss("lfmbr", table, target, lm, scales, align, mbr_cfg=cfg),
                    )
    return rows


def format_rows(rows: list[SweepRow]) -> str:
    lines = [f"{'T':>2} {'V':>2} {'k':>2} {'criterion':<9} {'prune':<5} {'dp':>14} {'brute':>14} {'error':>9}  result"]
    for r in rows:
        lines.append(
            f"{r.T:>2} {r.V:>2} {r.k:>2} {r.criterion:<9} {r.pruning:<5} {r.dp:>14.9f} {r.brute:>14.9f} "
            f"{r.error:>9.1e}  {'pass' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)

