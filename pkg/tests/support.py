"""Hand-rolled builders shared across the test modules.

Segments are assembled here without going through the mempool, so tests
can produce shapes the honest pipeline never emits: wrong p_lists,
missing duplicates, forged links, out-of-order sequence numbers.
"""

from __future__ import annotations

from mutachain import (
    NULL_HASH,
    Chain,
    ChainParams,
    KeyPair,
    OutPoint,
    Transaction,
    build_permanent_block,
    build_register,
    build_removable,
    build_removable_block,
    compute_p_list,
    digest,
    keypair_from_seed,
)

MARK = digest(b"test-entity:")[:8]


def kp(name: str) -> KeyPair:
    """Deterministic throwaway key pair, distinct per name."""
    return keypair_from_seed(digest(MARK + name.encode()))


ALICE = kp("alice")
BOB = kp("bob")
CAROL = kp("carol")
DAN = kp("dan")
EVE = kp("eve")


def fresh_chain(*members: KeyPair, params: ChainParams | None = None) -> Chain:
    """Chain with a genesis that registers every given key."""
    return Chain.bootstrap(tuple(build_register(k) for k in members), params)


def reg(chain: Chain, k: KeyPair) -> OutPoint:
    ref = chain.register_outpoint(k.pubkey)
    assert ref is not None, "key not registered on this chain"
    return ref


def rem(chain: Chain, k: KeyPair, data: bytes) -> Transaction:
    return build_removable(k, reg(chain, k), data)


# dangling reference, fine for tests that never touch a chain
REF_DUMMY = OutPoint(digest(MARK + b"dummy-register"), 0)


def rem_raw(k: KeyPair, data: bytes) -> Transaction:
    return build_removable(k, REF_DUMMY, data)


def make_segment(chain: Chain, removable_txs=(), body_txs=(), *,
                 per_block: int = 8, p_list=None, interval_len=None,
                 prev_removable=None, prev_permanent=None, height=None):
    """Build (interval, permanent block) on top of ``chain``'s tip.

    Keyword overrides poke specific fields out of shape; with none
    given the segment is valid whenever its transactions are.
    """
    h = chain.height + 1 if height is None else height
    interval = []
    anchor = chain.tip_hash
    removable_txs = tuple(removable_txs)
    for at in range(0, len(removable_txs), per_block):
        blk = build_removable_block(h, len(interval) + 1, anchor,
                                    removable_txs[at:at + per_block])
        interval.append(blk)
        anchor = blk.block_hash
    if p_list is None:
        p_list = compute_p_list(removable_txs)
    if interval_len is None:
        interval_len = len(interval)
    if prev_removable is None:
        prev_removable = anchor if interval else NULL_HASH
    if prev_permanent is None:
        prev_permanent = chain.tip_hash
    block = build_permanent_block(
        height=h, prev_permanent=prev_permanent,
        prev_removable=prev_removable, interval_len=interval_len,
        p_list=p_list, txs=tuple(body_txs))
    return tuple(interval), block


def extend(chain: Chain, removable_txs=(), body_txs=(), **overrides):
    """Append one hand-built segment; returns (interval, block)."""
    interval, block = make_segment(chain, removable_txs, body_txs, **overrides)
    chain.append_segment(interval, block)
    return interval, block
