"""Chain state: block admission, deletion authorization, pruning.

``Chain`` holds the permanent spine plus one record per closed
interval.  Blocks arrive as segments: the removable blocks of interval
``I_k`` followed by the permanent block at height ``k`` that closes it.
A segment is validated against a staged copy and committed atomically,
so a rejected block leaves no partial state behind.

Within a segment the interval's transactions are indexed before the
permanent body is applied.  A prepare in ``B_k`` may therefore name
``I_k`` itself, and a delete may chase a prepare confirmed earlier in
the same body.

Deletion of interval ``I_x`` is authorized two ways:

* fast path: the delete has no input and the interval's p_list is
  exactly the delete's signer, so nobody else's data is at stake;
* restricted path: the delete spends the output of a confirmed prepare
  for ``x`` by the same signer, and every removable transaction in
  ``I_x`` signed by someone else already has a byte-identical duplicate
  confirmed in another live interval.

A confirmed delete does not remove anything by itself.  ``prune`` drops
interval bodies once the delete is ``confirm_depth`` blocks deep and at
least ``delete_lock`` blocks younger than the interval it targets;
the interval's status flips to Deleted at that moment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import consent
from .blocks import (
    PermanentBlock,
    RemovableBlock,
    build_permanent_block,
    check_permanent_shape,
    check_removable_shape,
    compute_p_list,
)
from .crypto import NULL_HASH
from .errors import (
    BlockShapeError,
    BrokenIntervalChain,
    DuplicateRegistration,
    IntervalAlreadyDeleted,
    IntervalLenMismatch,
    InvalidDelete,
    LedgerError,
    MissingDuplicates,
    NotEligible,
    NotSoleOwnerAndNoPrepare,
    PListMismatch,
    PrepareSignerMismatch,
    RemovableTxDependsOnDeletedState,
    UnknownInterval,
    UnknownParent,
    UnknownRegisterRef,
)
from .tx import OutPoint, Transaction, TxKind, validate_stateless


@dataclass(frozen=True)
class ChainParams:
    confirm_depth: int = 2   # blocks a delete must age before pruning
    delete_lock: int = 1     # minimum height gap delete - interval


class IntervalStatus(Enum):
    PRESENT = "present"
    DELETED = "deleted"


@dataclass(frozen=True)
class IntervalRecord:
    status: IntervalStatus
    length: int                    # removable block count, from the header
    p_list: tuple[bytes, ...]
    blocks: tuple[RemovableBlock, ...] | None   # None once pruned or absent
    txids: frozenset               # removable txids; empty when absent


@dataclass(frozen=True)
class PrepareRecord:
    txid: bytes
    signer: bytes
    interval: int
    height: int


@dataclass(frozen=True)
class DeleteRecord:
    txid: bytes
    signer: bytes
    interval: int
    height: int


class Chain:
    """Validated view of one chain, from genesis to the current tip."""

    def __init__(self, params: ChainParams | None = None, *,
                 tolerant: bool = False):
        self.params = params or ChainParams()
        # tolerant mode is for replaying a stored or synced history that
        # legitimately lacks deleted interval bodies; duplicate evidence
        # hidden inside such a gap is then taken on trust
        self._tolerant = tolerant
        self._blocks: list[PermanentBlock] = []
        self._intervals: dict[int, IntervalRecord] = {}
        self._registrations: dict[bytes, bytes] = {}     # pubkey -> register txid
        self._infos: dict[bytes, consent.InfoRecord] = {}
        self._consents: dict[tuple[bytes, bytes], consent.ConsentChain] = {}
        self._prepares: dict[bytes, PrepareRecord] = {}  # prepare txid -> record
        self._spent_prepares: set[bytes] = set()
        self._deletes: dict[int, DeleteRecord] = {}      # interval -> record
        self._dup_index: dict[bytes, set[int]] = {}      # removable txid -> live intervals
        self._permanent_txids: set[bytes] = set()
        self._gone_txids: set[bytes] = set()             # no live copy anywhere

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def bootstrap(cls, genesis_txs=(), params: ChainParams | None = None) -> "Chain":
        chain = cls(params)
        genesis = build_permanent_block(
            height=0, prev_permanent=NULL_HASH, prev_removable=NULL_HASH,
            interval_len=0, p_list=(), txs=tuple(genesis_txs))
        chain.append_segment((), genesis)
        return chain

    def copy(self) -> "Chain":
        other = Chain(self.params, tolerant=self._tolerant)
        other._blocks = list(self._blocks)
        other._intervals = dict(self._intervals)
        other._registrations = dict(self._registrations)
        other._infos = dict(self._infos)
        other._consents = dict(self._consents)
        other._prepares = dict(self._prepares)
        other._spent_prepares = set(self._spent_prepares)
        other._deletes = dict(self._deletes)
        other._dup_index = {k: set(v) for k, v in self._dup_index.items()}
        other._permanent_txids = set(self._permanent_txids)
        other._gone_txids = set(self._gone_txids)
        return other

    def _adopt(self, staged: "Chain") -> None:
        self._blocks = staged._blocks
        self._intervals = staged._intervals
        self._registrations = staged._registrations
        self._infos = staged._infos
        self._consents = staged._consents
        self._prepares = staged._prepares
        self._spent_prepares = staged._spent_prepares
        self._deletes = staged._deletes
        self._dup_index = staged._dup_index
        self._permanent_txids = staged._permanent_txids
        self._gone_txids = staged._gone_txids

    # ------------------------------------------------------------------
    # tip accessors

    @property
    def height(self) -> int:
        return len(self._blocks) - 1

    @property
    def tip_hash(self) -> bytes:
        return self._blocks[-1].block_hash if self._blocks else NULL_HASH

    @property
    def permanent_blocks(self) -> tuple[PermanentBlock, ...]:
        return tuple(self._blocks)

    def block_at(self, height: int) -> PermanentBlock:
        if not 0 <= height < len(self._blocks):
            raise UnknownParent(f"no permanent block at height {height}")
        return self._blocks[height]

    # ------------------------------------------------------------------
    # segment admission

    def append_segment(self, removable_blocks, block: PermanentBlock) -> None:
        """Validate and commit interval blocks plus their closing block."""
        staged = self.copy()
        staged._apply_segment(tuple(removable_blocks), block)
        self._adopt(staged)

    def append_gap_segment(self, block: PermanentBlock) -> None:
        """Commit a permanent block whose interval body is unavailable.

        Only a tolerant chain accepts this; whether the gap is excused
        by delete evidence is settled once the whole history is in (see
        ``verify.verify_chain``).
        """
        if not self._tolerant:
            raise LedgerError("interval body missing on a strict chain")
        staged = self.copy()
        staged._apply_segment(None, block)
        self._adopt(staged)

    def _apply_segment(self, removable_blocks, block: PermanentBlock) -> None:
        height = len(self._blocks)
        h = block.header
        if h.height != height:
            raise UnknownParent(
                f"block height {h.height} does not extend tip {height - 1}")
        expected_prev = self.tip_hash
        if h.prev_permanent != expected_prev:
            raise UnknownParent("prev link does not match the tip hash")
        check_permanent_shape(block)

        absent = removable_blocks is None
        if absent:
            txids = frozenset()
        else:
            if len(removable_blocks) != h.interval_len:
                raise IntervalLenMismatch(
                    f"{len(removable_blocks)} interval blocks, header says {h.interval_len}")
            if height == 0 and removable_blocks:
                raise BlockShapeError("genesis closes an empty interval")
            anchor = expected_prev
            for seq, rb in enumerate(removable_blocks, start=1):
                check_removable_shape(rb)
                if rb.interval != height:
                    raise BrokenIntervalChain(
                        f"block tagged interval {rb.interval} inside interval {height}")
                if rb.seq != seq:
                    raise BrokenIntervalChain(
                        f"seq {rb.seq} where {seq} was expected")
                if rb.header.prev != anchor:
                    raise BrokenIntervalChain(f"link broken at seq {seq}")
                anchor = rb.block_hash
            if removable_blocks and h.prev_removable != anchor:
                raise BrokenIntervalChain(
                    "header does not link the interval's last block")
            interval_txs = [tx for rb in removable_blocks for tx in rb.txs]
            if compute_p_list(interval_txs) != h.p_list:
                raise PListMismatch(
                    "header p_list does not match the interval's signers")
            for tx in interval_txs:
                validate_stateless(tx)
            for tx in interval_txs:
                self._apply_removable(tx, height)
            txids = frozenset(tx.txid for tx in interval_txs)

        status = IntervalStatus.DELETED if absent else IntervalStatus.PRESENT
        self._intervals[height] = IntervalRecord(
            status=status, length=h.interval_len, p_list=h.p_list,
            blocks=None if absent else tuple(removable_blocks), txids=txids)

        for tx in block.txs:
            validate_stateless(tx)
        for tx in block.txs:
            self._apply_body_tx(tx, height)
        self._blocks.append(block)

    # ------------------------------------------------------------------
    # transaction rules

    def _register_outpoint(self, signer: bytes) -> OutPoint:
        reg_txid = self._registrations.get(signer)
        if reg_txid is None:
            raise UnknownRegisterRef("signer is not registered")
        return OutPoint(reg_txid, 0)

    def _check_register_input(self, tx: Transaction) -> None:
        expected = self._register_outpoint(tx.signer)
        got = tx.inputs[0]
        if got != expected:
            if got.txid in self._gone_txids:
                raise RemovableTxDependsOnDeletedState(
                    f"input {got.txid.hex()[:12]} was erased with its interval")
            raise UnknownRegisterRef(
                f"input {got.txid.hex()[:12]}:{got.index} is not the signer's register output")

    def _apply_removable(self, tx: Transaction, height: int) -> None:
        self._check_register_input(tx)
        self._dup_index.setdefault(tx.txid, set()).add(height)
        self._gone_txids.discard(tx.txid)

    def _apply_body_tx(self, tx: Transaction, height: int) -> None:
        # kind rules first: deterministic signing makes a rebuilt
        # transaction byte-identical, so the replay guard alone would
        # shadow the specific duplicate-register / already-deleted errors
        if tx.kind is TxKind.REGISTER:
            if tx.signer in self._registrations:
                raise DuplicateRegistration(
                    f"key {tx.signer.hex()[:12]} is already registered")
        elif tx.kind is TxKind.PREPARE:
            self._validate_prepare(tx)
            self._prepares[tx.txid] = PrepareRecord(
                txid=tx.txid, signer=tx.signer,
                interval=tx.payload.interval, height=height)
        elif tx.kind is TxKind.DELETE:
            used = self._validate_delete(tx)
            self._deletes[tx.payload.interval] = DeleteRecord(
                txid=tx.txid, signer=tx.signer,
                interval=tx.payload.interval, height=height)
            if used is not None:
                self._spent_prepares.add(used)
        elif tx.kind is TxKind.INFO:
            self._check_register_input(tx)
            self._infos[tx.txid] = consent.make_info_record(tx)
        elif tx.kind is TxKind.CONSENT:
            reg = self._register_outpoint(tx.signer)
            consent.apply_consent(tx, height, infos=self._infos,
                                  chains=self._consents, register_outpoint=reg)
        if tx.txid in self._permanent_txids:
            raise LedgerError(
                f"transaction {tx.txid.hex()[:12]} already confirmed")
        if tx.kind is TxKind.REGISTER:
            self._registrations[tx.signer] = tx.txid
        self._permanent_txids.add(tx.txid)

    def _interval_for_removal(self, x: int) -> IntervalRecord:
        rec = self._intervals.get(x)
        if rec is None:
            raise UnknownInterval(f"interval {x} is not closed yet")
        if rec.length == 0:
            raise UnknownInterval(f"interval {x} is empty")
        # judged by the delete evidence seen so far, not by the record's
        # status: a replayed gap interval is absent from the start, yet
        # prepares and the delete itself confirmed while it was live
        if x in self._deletes:
            raise IntervalAlreadyDeleted(f"interval {x} already has a delete")
        return rec

    def _validate_prepare(self, tx: Transaction) -> None:
        self._check_register_input(tx)
        rec = self._interval_for_removal(tx.payload.interval)
        if tx.signer not in rec.p_list:
            raise NotEligible(
                f"signer is not in the p_list of interval {tx.payload.interval}")

    def _validate_delete(self, tx: Transaction) -> bytes | None:
        """Check authorization; return the spent prepare txid, if any."""
        if tx.signer not in self._registrations:
            raise UnknownRegisterRef("delete signer is not registered")
        x = tx.payload.interval
        rec = self._interval_for_removal(x)
        if not tx.inputs:
            if rec.p_list != (tx.signer,):
                raise NotSoleOwnerAndNoPrepare(
                    f"interval {x} has other signers and no prepare is referenced")
            return None
        op = tx.inputs[0]
        prep = self._prepares.get(op.txid)
        if prep is None or op.index != 0:
            raise NotSoleOwnerAndNoPrepare(
                "input does not reference a confirmed prepare output")
        if op.txid in self._spent_prepares:
            raise InvalidDelete("the referenced prepare output is already spent")
        if prep.interval != x:
            raise InvalidDelete(
                f"prepare names interval {prep.interval}, delete names {x}")
        if prep.signer != tx.signer:
            raise PrepareSignerMismatch(
                "prepare and delete are signed by different keys")
        missing = self._missing_duplicates(x, exclude=tx.signer)
        if missing and not (self._tolerant and self._has_gap_after(x)):
            raise MissingDuplicates(missing)
        return op.txid

    def _missing_duplicates(self, x: int, exclude: bytes) -> list[bytes]:
        rec = self._intervals[x]
        if rec.blocks is None:
            return []
        missing = []
        for rb in rec.blocks:
            for tx in rb.txs:
                if tx.signer == exclude:
                    continue
                sites = self._dup_index.get(tx.txid, ())
                if not any(j != x and j not in self._deletes
                           and self._intervals[j].status is IntervalStatus.PRESENT
                           for j in sites):
                    missing.append(tx.txid)
        return missing

    def _has_gap_after(self, x: int) -> bool:
        return any(rec.status is IntervalStatus.DELETED and rec.blocks is None
                   and rec.txids == frozenset() and i > x
                   for i, rec in self._intervals.items())

    # ------------------------------------------------------------------
    # pruning

    def prune_eligible(self) -> list[int]:
        """Intervals whose confirmed delete has aged past both bounds."""
        tip = self.height
        out = []
        for x, rec in self._deletes.items():
            interval = self._intervals[x]
            if interval.status is not IntervalStatus.PRESENT:
                continue
            if tip - rec.height >= self.params.confirm_depth \
                    and rec.height - x >= self.params.delete_lock:
                out.append(x)
        return sorted(out)

    def prune(self) -> list[int]:
        """Drop every eligible interval body; return the heights dropped."""
        dropped = self.prune_eligible()
        for x in dropped:
            rec = self._intervals[x]
            for txid in rec.txids:
                sites = self._dup_index.get(txid)
                if sites is None:
                    continue
                sites.discard(x)
                if not sites:
                    del self._dup_index[txid]
                    self._gone_txids.add(txid)
            self._intervals[x] = IntervalRecord(
                status=IntervalStatus.DELETED, length=rec.length,
                p_list=rec.p_list, blocks=None, txids=rec.txids)
        return dropped

    # ------------------------------------------------------------------
    # queries

    def interval_record(self, x: int) -> IntervalRecord:
        rec = self._intervals.get(x)
        if rec is None:
            raise UnknownInterval(f"interval {x} is not closed yet")
        return rec

    def interval_status(self, x: int) -> IntervalStatus:
        return self.interval_record(x).status

    def interval_blocks(self, x: int) -> tuple[RemovableBlock, ...] | None:
        return self.interval_record(x).blocks

    def interval_txs(self, x: int) -> tuple[Transaction, ...]:
        blocks = self.interval_blocks(x)
        if blocks is None:
            return ()
        return tuple(tx for rb in blocks for tx in rb.txs)

    def reinclusion_candidates(self, prepare: Transaction) -> list[Transaction]:
        """Other signers' transactions of the prepared interval that still
        lack a live duplicate elsewhere, ready for re-broadcast."""
        x = prepare.payload.interval
        rec = self._intervals.get(x)
        if rec is None or rec.blocks is None:
            return []
        out = []
        seen = set()
        for rb in rec.blocks:
            for tx in rb.txs:
                if tx.signer == prepare.signer or tx.txid in seen:
                    continue
                seen.add(tx.txid)
                sites = self._dup_index.get(tx.txid, ())
                if not any(j != x and j not in self._deletes for j in sites):
                    out.append(tx)
        return out

    def registered(self, pubkey: bytes) -> bool:
        return pubkey in self._registrations

    def register_outpoint(self, pubkey: bytes) -> OutPoint | None:
        txid = self._registrations.get(pubkey)
        return OutPoint(txid, 0) if txid is not None else None

    def info_record(self, txid: bytes) -> consent.InfoRecord | None:
        return self._infos.get(txid)

    def info_records(self) -> tuple[consent.InfoRecord, ...]:
        return tuple(self._infos.values())

    def consent_chain(self, subject: bytes, info: bytes) -> consent.ConsentChain | None:
        return self._consents.get((subject, info))

    def consent_grant(self, subject: bytes, info: bytes) -> int:
        return consent.current_grant(self._consents, subject, info)

    def prepare_record(self, txid: bytes) -> PrepareRecord | None:
        return self._prepares.get(txid)

    def prepares_for(self, signer: bytes, interval: int) -> list[PrepareRecord]:
        return [p for p in self._prepares.values()
                if p.signer == signer and p.interval == interval
                and p.txid not in self._spent_prepares]

    def delete_record(self, x: int) -> DeleteRecord | None:
        return self._deletes.get(x)

    def delete_records(self) -> dict[int, DeleteRecord]:
        return dict(self._deletes)

    def tx_confirmed(self, txid: bytes) -> bool:
        """Confirmed and still live somewhere (permanent, or a live copy)."""
        if txid in self._permanent_txids:
            return True
        return any(j not in self._deletes for j in self._dup_index.get(txid, ()))
