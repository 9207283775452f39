"""Whole-history verification, tolerant of pruned intervals.

A verifier replays segments in order: first every structural rule
(links, interval chains, p_lists, transaction roots), then the stateful
transaction rules, stopping at the first violation.  Interval bodies
may legitimately be missing, because deletion is the point: a gap is
accepted only when the permanent spine contains a confirmed delete for
that exact interval.  A gap without such evidence fails verification
with the offending heights listed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .blocks import PermanentBlock, RemovableBlock
from .errors import MissingDeleteEvidence, MutachainError
from .ledger import Chain, ChainParams

Segment = tuple[tuple[RemovableBlock, ...] | None, PermanentBlock]


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    height: int                 # last height accepted (-1 when genesis failed)
    present: int                # intervals with bodies on hand
    deleted: int                # intervals absent, backed by delete evidence
    problem: str | None = None

    def __str__(self) -> str:
        if self.ok:
            return (f"valid: height {self.height}, {self.present} intervals "
                    f"present, {self.deleted} deleted")
        return f"invalid at height {self.height + 1}: {self.problem}"


def replay_segments(segments, params: ChainParams | None = None) -> Chain:
    """Rebuild a chain from (interval_blocks, permanent_block) pairs.

    ``None`` interval blocks mark a gap.  Raises on the first rule
    violation; gap evidence is not settled here (the delete may follow
    later in the spine), use ``verify_chain`` for the full judgment.
    """
    chain = Chain(params, tolerant=True)
    for removable_blocks, block in segments:
        if removable_blocks is None and block.header.interval_len > 0:
            chain.append_gap_segment(block)
        else:
            chain.append_segment(removable_blocks or (), block)
    return chain


def gaps_without_evidence(chain: Chain) -> list[int]:
    heights = []
    for x in range(chain.height + 1):
        rec = chain.interval_record(x)
        if rec.blocks is None and rec.length > 0 and chain.delete_record(x) is None:
            heights.append(x)
    return heights


def verify_chain(segments, params: ChainParams | None = None) -> VerifyReport:
    """Full verification of a stored or received history."""
    chain = Chain(params, tolerant=True)
    for removable_blocks, block in segments:
        try:
            if removable_blocks is None and block.header.interval_len > 0:
                chain.append_gap_segment(block)
            else:
                chain.append_segment(removable_blocks or (), block)
        except MutachainError as exc:
            return VerifyReport(ok=False, height=chain.height,
                                present=_present(chain), deleted=_absent(chain),
                                problem=f"{type(exc).__name__}: {exc}")
    unbacked = gaps_without_evidence(chain)
    if unbacked:
        err = MissingDeleteEvidence(unbacked)
        return VerifyReport(ok=False, height=chain.height,
                            present=_present(chain), deleted=_absent(chain),
                            problem=f"{type(err).__name__}: {err}")
    return VerifyReport(ok=True, height=chain.height,
                        present=_present(chain), deleted=_absent(chain))


def _present(chain: Chain) -> int:
    return sum(1 for x in range(chain.height + 1)
               if chain.interval_record(x).blocks is not None
               and chain.interval_record(x).length > 0)


def _absent(chain: Chain) -> int:
    return sum(1 for x in range(chain.height + 1)
               if chain.interval_record(x).blocks is None
               and chain.interval_record(x).length > 0)
