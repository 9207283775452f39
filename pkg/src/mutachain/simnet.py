"""Deterministic in-process network of mining nodes.

Time is a step counter.  Each step delivers every message queued in the
previous step (per sender-receiver FIFO, receivers and senders walked
in id order), then the slot's proposer assembles and announces a
segment.  Nothing is random and nothing reads the clock, so a scenario
replays to byte-identical reports.

Offline nodes receive nothing; messages addressed to them while down
are lost, which is what forces the two-phase catch-up on rejoin: fetch
the permanent spine first, then request bodies only for intervals the
peer still holds.  Deleted intervals are never sent, a rejoining node
just sees the delete evidence in the spine.

Byzantine behaviour is modelled at proposal time: a faulty proposer
announces a corrupted segment (a wrong p_list, or a delete nobody
authorized) that honest nodes must reject.  Arbitrary corruption can be
injected through ``SimNet.mutate_block``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

from .blocks import PermanentBlock, RemovableBlock, build_permanent_block
from .crypto import KeyPair
from .errors import (
    AlreadyKnown,
    MempoolRejection,
    MutachainError,
    SyncAborted,
)
from .ledger import Chain, ChainParams, IntervalStatus
from .mempool import Mempool
from .tx import Transaction, build_delete
from .verify import gaps_without_evidence, replay_segments


@dataclass(frozen=True)
class TxGossip:
    tx: Transaction


@dataclass(frozen=True)
class BlockAnnounce:
    removable_blocks: tuple[RemovableBlock, ...]
    block: PermanentBlock


@dataclass(frozen=True)
class SyncRequest:
    height: int


@dataclass(frozen=True)
class SyncSpine:
    blocks: tuple[PermanentBlock, ...]


@dataclass(frozen=True)
class FillRequest:
    heights: tuple[int, ...]


@dataclass(frozen=True)
class FillResponse:
    fills: dict  # height -> tuple[RemovableBlock, ...]


class SimNode:
    def __init__(self, node_id: int, chain: Chain, store=None):
        self.id = node_id
        self.chain = chain
        self.mempool = Mempool()
        self.store = store
        self.online = True
        self.byzantine: str | None = None
        self.byzantine_key: KeyPair | None = None
        self._spine: tuple[PermanentBlock, ...] | None = None
        self._syncing = False
        self._backlog: list[BlockAnnounce] = []

    # ------------------------------------------------------------------

    def history_segments(self):
        segs = []
        for x in range(self.chain.height + 1):
            rec = self.chain.interval_record(x)
            segs.append((rec.blocks, self.chain.block_at(x)))
        return segs

    def _append(self, removable_blocks, block, net: "SimNet") -> bool:
        try:
            self.chain.append_segment(removable_blocks, block)
        except MutachainError as exc:
            net.log(self.id, ev="reject", height=block.height,
                    err=type(exc).__name__)
            return False
        self.mempool.observe_segment(removable_blocks, block, self.chain)
        if self.store is not None:
            self.store.append_segment(removable_blocks, block)
        net.log(self.id, ev="append", height=block.height)
        kept = net.archive.get(block.block_hash)
        # a late joiner appends deleted intervals without bodies; keep
        # the fullest copy ever seen
        if kept is None or len(removable_blocks) > len(kept[0]):
            net.archive[block.block_hash] = (tuple(removable_blocks), block)
        dropped = self.chain.prune()
        if dropped:
            if self.store is not None:
                for x in dropped:
                    self.store.prune(x)
            net.log(self.id, ev="prune", intervals=dropped)
        return True

    # ------------------------------------------------------------------
    # message handling

    def handle(self, sender: int, msg, net: "SimNet") -> None:
        if isinstance(msg, TxGossip):
            try:
                self.mempool.submit(msg.tx, self.chain)
            except AlreadyKnown:
                pass
            except MempoolRejection as exc:
                net.log(self.id, ev="tx-reject", err=type(exc).__name__)
        elif isinstance(msg, BlockAnnounce):
            h = msg.block.height
            if h <= self.chain.height:
                return
            if self._syncing:
                # applied after the rebuild lands, so blocks mined
                # during the handshake are not lost
                self._backlog.append(msg)
            elif h == self.chain.height + 1 \
                    and msg.block.header.prev_permanent == self.chain.tip_hash:
                self._append(msg.removable_blocks, msg.block, net)
            else:
                # behind, or forked while isolated: fetch the whole
                # spine and rebuild, the longer history wins
                self._syncing = True
                self._backlog.append(msg)
                net.send(self.id, sender, SyncRequest(0))
        elif isinstance(msg, SyncRequest):
            if msg.height < self.chain.height:
                blocks = tuple(self.chain.block_at(h)
                               for h in range(msg.height + 1, self.chain.height + 1))
                net.send(self.id, sender, SyncSpine(blocks))
        elif isinstance(msg, SyncSpine):
            if not self._syncing:
                return
            self._spine = msg.blocks
            needed = tuple(b.height for b in msg.blocks
                           if b.header.interval_len > 0)
            if needed:
                net.send(self.id, sender, FillRequest(needed))
            else:
                self._finish_sync({}, sender, net)
        elif isinstance(msg, FillRequest):
            fills = {}
            for h in msg.heights:
                if 0 <= h <= self.chain.height:
                    blocks = self.chain.interval_blocks(h)
                    if blocks is not None:
                        fills[h] = blocks
            net.send(self.id, sender, FillResponse(fills))
        elif isinstance(msg, FillResponse):
            if self._syncing and self._spine is not None:
                self._finish_sync(msg.fills, sender, net)

    def _finish_sync(self, fills: dict, peer: int, net: "SimNet") -> None:
        spine, self._spine, self._syncing = self._spine, None, False
        segments = [((), self.chain.block_at(0))]
        for block in spine:
            if block.header.interval_len == 0:
                segments.append(((), block))
            else:
                segments.append((fills.get(block.height), block))
        try:
            rebuilt = replay_segments(segments, self.chain.params)
            unbacked = gaps_without_evidence(rebuilt)
            if unbacked:
                raise SyncAborted("gap without delete evidence",
                                  evidence=unbacked)
        except MutachainError as exc:
            net.log(self.id, ev="sync-abort", peer=peer,
                    err=type(exc).__name__)
            self._backlog.clear()
            return
        if rebuilt.height > self.chain.height:
            rebuilt._tolerant = False
            self.chain = rebuilt
            self.chain.prune()
            if self.store is not None:
                self.store.rebuild(self.chain)
            net.log(self.id, ev="sync", peer=peer, height=self.chain.height)
        backlog, self._backlog = self._backlog, []
        for msg in backlog:
            if msg.block.height == self.chain.height + 1 \
                    and msg.block.header.prev_permanent == self.chain.tip_hash:
                self._append(msg.removable_blocks, msg.block, net)

    # ------------------------------------------------------------------
    # proposing

    def propose(self, net: "SimNet") -> None:
        interval, block = self.mempool.build_candidate(
            self.chain, net.max_interval_blocks)
        if self.byzantine == "wrong_p_list":
            interval, block = _fault_wrong_p_list(interval, block)
        elif self.byzantine == "unauthorized_delete":
            mutated = _fault_unauthorized_delete(
                self.chain, interval, block, self.byzantine_key)
            if mutated is None:
                return
            interval, block = mutated
        elif net.mutate_block is not None:
            mutated = net.mutate_block(self.id, interval, block)
            if mutated is None:
                return
            interval, block = mutated
        net.log(self.id, ev="propose", height=block.height,
                interval_blocks=len(interval), body=len(block.txs))
        # a corrupted segment fails here and the node's own chain stays
        # put, but the announcement still goes out for others to judge
        self._append(interval, block, net)
        net.broadcast(self.id, BlockAnnounce(interval, block))


def _fault_wrong_p_list(interval, block):
    fake = bytes(31) + b"\x7f"
    p_list = tuple(sorted(set(block.header.p_list) ^ {fake}))
    bad = build_permanent_block(
        height=block.height, prev_permanent=block.header.prev_permanent,
        prev_removable=block.header.prev_removable,
        interval_len=block.header.interval_len, p_list=p_list, txs=block.txs)
    return interval, bad


def _fault_unauthorized_delete(chain, interval, block, key):
    if key is None:
        return None
    target = None
    for x in range(1, chain.height + 1):
        rec = chain.interval_record(x)
        if rec.status is IntervalStatus.PRESENT and rec.length > 0 \
                and chain.delete_record(x) is None \
                and rec.p_list != (key.pubkey,):
            target = x
            break
    if target is None:
        return None
    rogue = build_delete(key, target)
    bad = build_permanent_block(
        height=block.height, prev_permanent=block.header.prev_permanent,
        prev_removable=block.header.prev_removable,
        interval_len=block.header.interval_len,
        p_list=block.header.p_list, txs=block.txs + (rogue,))
    return interval, bad


class SimNet:
    """The message fabric plus the global step loop."""

    def __init__(self, num_nodes: int, genesis_txs=(),
                 params: ChainParams | None = None, *,
                 max_interval_blocks: int = 1, propose_period: int = 1,
                 mutate_block=None, stores: dict | None = None):
        self.params = params or ChainParams()
        self.max_interval_blocks = max_interval_blocks
        self.propose_period = propose_period
        self.mutate_block = mutate_block
        base = Chain.bootstrap(genesis_txs, self.params)
        self.nodes: list[SimNode] = []
        for i in range(num_nodes):
            store = (stores or {}).get(i)
            node = SimNode(i, base.copy(), store=store)
            if store is not None:
                store.rebuild(node.chain)
            self.nodes.append(node)
        self.step_no = 0
        self.events: list[dict] = []
        self._queues: dict[tuple[int, int], deque] = {}
        # instrumentation, not part of the protocol: full bodies of
        # every segment any node accepted (never pruned), and which
        # removable bodies were ever handed to each node
        self.archive: dict[bytes, tuple] = {}
        self.body_deliveries: dict[int, set] = {i: set() for i in range(num_nodes)}

    # ------------------------------------------------------------------
    # fabric

    def log(self, node_id: int, **fields) -> None:
        entry = {"step": self.step_no, "node": node_id}
        entry.update(fields)
        self.events.append(entry)

    def send(self, sender: int, receiver: int, msg) -> None:
        if not self.nodes[receiver].online:
            return
        self._queues.setdefault((sender, receiver), deque()).append(msg)

    def broadcast(self, sender: int, msg) -> None:
        for node in self.nodes:
            if node.id != sender:
                self.send(sender, node.id, msg)

    def submit(self, tx: Transaction, via: int = 0) -> None:
        """Hand a transaction to one node and gossip it to the rest."""
        node = self.nodes[via]
        node.mempool.submit(tx, node.chain)
        self.broadcast(via, TxGossip(tx))

    def set_online(self, node_id: int, online: bool) -> None:
        self.nodes[node_id].online = online
        if not online:
            for key in list(self._queues):
                if key[1] == node_id:
                    del self._queues[key]

    def step(self, count: int = 1) -> None:
        for _ in range(count):
            self._deliver()
            if self.step_no % self.propose_period == 0:
                slot = self.step_no // self.propose_period
                proposer = self.nodes[slot % len(self.nodes)]
                if proposer.online and not proposer._syncing:
                    proposer.propose(self)
            self.step_no += 1

    def _deliver(self) -> None:
        batch, self._queues = self._queues, {}
        for sender, receiver in sorted(batch):
            node = self.nodes[receiver]
            for msg in batch[(sender, receiver)]:
                if node.online:
                    self._record_bodies(receiver, msg)
                    node.handle(sender, msg, self)

    def _record_bodies(self, receiver: int, msg) -> None:
        seen = self.body_deliveries[receiver]
        if isinstance(msg, BlockAnnounce):
            for rb in msg.removable_blocks:
                for tx in rb.txs:
                    seen.add((msg.block.height, tx.txid))
        elif isinstance(msg, FillResponse):
            for height, blocks in msg.fills.items():
                for rb in blocks:
                    for tx in rb.txs:
                        seen.add((height, tx.txid))

    # ------------------------------------------------------------------
    # reporting

    def report(self) -> dict:
        nodes = []
        for node in self.nodes:
            chain = node.chain
            intervals = {}
            for x in range(1, chain.height + 1):
                rec = chain.interval_record(x)
                if rec.length > 0:
                    intervals[str(x)] = rec.status.value
            nodes.append({
                "id": node.id,
                "online": node.online,
                "height": chain.height,
                "tip": chain.tip_hash.hex(),
                "intervals": intervals,
                "mempool": len(node.mempool),
            })
        return {"steps": self.step_no, "events": self.events, "nodes": nodes}

    def report_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2) + "\n"
