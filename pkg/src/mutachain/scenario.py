"""Line-oriented scenario files driving a simulated network.

A scenario is a plain text script.  Blank lines and ``#`` comments are
ignored; every other line is one directive.  Configuration directives
come first, then any mix of transaction and control directives:

=====================================  ===================================
directive                              effect
=====================================  ===================================
``params confirm_depth=N
delete_lock=N``                        chain parameters
``nodes N``                            network size (default 3)
``schedule N``                         max removable blocks per interval
``period N``                           steps between proposals
``entity NAME``                        create a keypair (deterministic)
``genesis NAME...``                    put register txs in the genesis
``register NAME``                      submit a register
``removable NAME LABEL [data=HEX]``    submit erasable data
``prepare NAME INTERVAL``              announce a deletion
``delete NAME INTERVAL``               request a deletion (the matching
                                       confirmed prepare, if any, is
                                       referenced automatically)
``info NAME LABEL purposes=A,B[,..]
[controller=TEXT]``                    publish a consent schema
``consent NAME INFOLABEL VALUE``       grant/update/revoke (0 revokes)
``step [N]``                           advance the network N steps
``offline N`` / ``online N``           drop / restore a node
``byzantine N MODE [key=NAME]``        node fault: wrong_p_list or
                                       unauthorized_delete
=====================================  ===================================

Transaction directives take ``via=N`` to choose the submitting node and
may be prefixed with ``try`` to tolerate a mempool rejection instead of
failing the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import KeyPair, digest, keypair_from_seed
from .errors import MempoolRejection, ScenarioError
from .ledger import ChainParams
from .simnet import SimNet
from .tx import (
    OutPoint,
    build_consent,
    build_delete,
    build_info,
    build_prepare,
    build_register,
    build_removable,
)

CONFIG_DIRECTIVES = {"params", "nodes", "schedule", "period", "entity", "genesis"}
ACTION_DIRECTIVES = {"register", "removable", "prepare", "delete", "info",
                     "consent", "step", "offline", "online", "byzantine"}


def entity_keypair(name: str) -> KeyPair:
    """Stable per-name keys so reruns produce identical bytes."""
    return keypair_from_seed(digest(b"entity:" + name.encode("utf-8")))


@dataclass
class Scenario:
    net: SimNet
    entities: dict[str, KeyPair]
    labels: dict[str, bytes] = field(default_factory=dict)   # label -> txid
    rejected: list[tuple[int, str]] = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.entities: dict[str, KeyPair] = {}
        self.genesis_names: list[str] = []
        self.num_nodes = 3
        self.schedule = 1
        self.period = 1
        self.params = ChainParams()
        self.lines = []
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                self.lines.append((no, line.split()))

    def fail(self, no: int, message: str):
        raise ScenarioError(message, line_no=no)

    @staticmethod
    def options(tokens: list[str]) -> tuple[list[str], dict[str, str]]:
        plain, opts = [], {}
        for tok in tokens:
            if "=" in tok:
                key, value = tok.split("=", 1)
                opts[key] = value
            else:
                plain.append(tok)
        return plain, opts

    def run(self) -> Scenario:
        scn: Scenario | None = None
        for no, tokens in self.lines:
            word = tokens[0]
            tolerate = word == "try"
            if tolerate:
                tokens = tokens[1:]
                if not tokens:
                    self.fail(no, "try needs a directive")
                word = tokens[0]
            if word in CONFIG_DIRECTIVES:
                if scn is not None:
                    self.fail(no, f"{word} must come before the first action")
                self.configure(no, word, tokens[1:])
                continue
            if word not in ACTION_DIRECTIVES:
                self.fail(no, f"unknown directive {word!r}")
            if scn is None:
                scn = self.start()
            self.act(scn, no, word, tokens[1:], tolerate)
        return scn if scn is not None else self.start()

    def configure(self, no: int, word: str, args: list[str]) -> None:
        plain, opts = self.options(args)
        if word == "params":
            if plain:
                self.fail(no, "params takes key=value pairs only")
            fields = {}
            for key, value in opts.items():
                if key not in ("confirm_depth", "delete_lock"):
                    self.fail(no, f"unknown parameter {key!r}")
                fields[key] = int(value)
            self.params = ChainParams(**fields)
        elif word == "nodes":
            self.num_nodes = int(plain[0])
        elif word == "schedule":
            self.schedule = int(plain[0])
        elif word == "period":
            self.period = int(plain[0])
        elif word == "entity":
            for name in plain:
                self.entities.setdefault(name, entity_keypair(name))
        elif word == "genesis":
            for name in plain:
                if name not in self.entities:
                    self.fail(no, f"unknown entity {name!r}")
                self.genesis_names.append(name)

    def start(self) -> Scenario:
        genesis_txs = tuple(build_register(self.entities[name])
                            for name in self.genesis_names)
        net = SimNet(self.num_nodes, genesis_txs, self.params,
                     max_interval_blocks=self.schedule,
                     propose_period=self.period)
        return Scenario(net=net, entities=self.entities)

    # ------------------------------------------------------------------

    def entity(self, no: int, name: str) -> KeyPair:
        kp = self.entities.get(name)
        if kp is None:
            self.fail(no, f"unknown entity {name!r}")
        return kp

    def act(self, scn: Scenario, no: int, word: str, args: list[str],
            tolerate: bool) -> None:
        net = scn.net
        plain, opts = self.options(args)
        if word == "step":
            net.step(int(plain[0]) if plain else 1)
            return
        if word == "offline":
            net.set_online(int(plain[0]), False)
            return
        if word == "online":
            net.set_online(int(plain[0]), True)
            return
        if word == "byzantine":
            node = net.nodes[int(plain[0])]
            mode = plain[1] if len(plain) > 1 else None
            if mode not in (None, "wrong_p_list", "unauthorized_delete"):
                self.fail(no, f"unknown fault {mode!r}")
            node.byzantine = mode
            if "key" in opts:
                node.byzantine_key = self.entity(no, opts["key"])
            return

        via = int(opts.get("via", "0"))
        chain = net.nodes[via].chain
        kp = self.entity(no, plain[0])
        if word == "register":
            tx = build_register(kp)
        elif word == "removable":
            label = plain[1]
            data = bytes.fromhex(opts["data"]) if "data" in opts \
                else label.encode("utf-8")
            ref = chain.register_outpoint(kp.pubkey)
            if ref is None:
                self.fail(no, f"{plain[0]} is not registered yet")
            tx = build_removable(kp, ref, data)
            scn.labels[label] = tx.txid
        elif word == "prepare":
            ref = chain.register_outpoint(kp.pubkey)
            if ref is None:
                self.fail(no, f"{plain[0]} is not registered yet")
            tx = build_prepare(kp, ref, int(plain[1]))
        elif word == "delete":
            interval = int(plain[1])
            preps = chain.prepares_for(kp.pubkey, interval)
            ref = OutPoint(preps[0].txid, 0) if preps else None
            tx = build_delete(kp, interval, prepare_ref=ref)
        elif word == "info":
            label = plain[1]
            purposes = opts.get("purposes", "").split(",")
            if purposes == [""]:
                self.fail(no, "info needs purposes=a,b,...")
            controller = opts.get("controller", plain[0]).encode("utf-8")
            ref = chain.register_outpoint(kp.pubkey)
            if ref is None:
                self.fail(no, f"{plain[0]} is not registered yet")
            tx = build_info(kp, ref, controller, tuple(purposes))
            scn.labels[label] = tx.txid
        elif word == "consent":
            info_txid = scn.labels.get(plain[1])
            if info_txid is None:
                self.fail(no, f"unknown info label {plain[1]!r}")
            value = int(plain[2])
            open_chain = chain.consent_chain(kp.pubkey, info_txid)
            if open_chain is not None and open_chain.live:
                spend = open_chain.outpoint
            else:
                spend = chain.register_outpoint(kp.pubkey)
                if spend is None:
                    self.fail(no, f"{plain[0]} is not registered yet")
            tx = build_consent(kp, spend, OutPoint(info_txid, 0), value)
        else:  # pragma: no cover
            self.fail(no, f"unhandled directive {word!r}")
        try:
            net.submit(tx, via=via)
        except MempoolRejection as exc:
            if not tolerate:
                raise ScenarioError(
                    f"{word} rejected: {type(exc).__name__}: {exc}",
                    line_no=no)
            scn.rejected.append((no, type(exc).__name__))


def run_scenario(text: str) -> Scenario:
    """Parse and execute a scenario, returning the final state."""
    return _Parser(text).run()
