"""Application-side transaction pipeline.

A ChannelClient holds one identity and one (channel, chaincode) binding --
the shape a per-robot recorder application uses. Writes run the full
endorse -> assemble -> order -> commit pipeline; queries are evaluated on
one peer and never pay block latency.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .contracts import ContractError
from .identity import Identity
from .ledger import ValidationCode
from .peer import CommitEvent, PeerError, Proposal, assemble_transaction

DEFAULT_COMMIT_TIMEOUT_S = 30.0


class SubmitRejected(Exception):
    def __init__(self, message: str, code: ValidationCode | None = None) -> None:
        super().__init__(message)
        self.code = code


class EndorsementFailure(Exception):
    pass


@dataclass
class PendingTx:
    tx_id: bytes
    submit_time: int
    _event: threading.Event
    result: CommitEvent | None = None

    def _resolve(self, event: CommitEvent) -> None:
        self.result = event
        self._event.set()

    @property
    def done(self) -> bool:
        return self.result is not None

    def wait(self, timeout_s: float = DEFAULT_COMMIT_TIMEOUT_S) -> CommitEvent:
        """Block until the commit event arrives (wall-clock runs). Logical
        runs resolve callbacks synchronously while the loop is pumped."""
        if not self._event.wait(timeout_s):
            raise TimeoutError(f"no commit event for tx {self.tx_id.hex()[:12]}")
        assert self.result is not None
        return self.result


class ChannelClient:
    def __init__(self, network, identity: Identity, channel: str, chaincode: str) -> None:
        self.network = network
        self.identity = identity
        self.channel = channel
        self.chaincode = chaincode
        self.clock = network.clock
        self._event_peer = None

    def _endorsing_peers(self):
        peers = self.network.endorsing_peers(self.channel)
        if not peers:
            raise EndorsementFailure(f"no peers joined to {self.channel!r}")
        return peers

    def _watch_peer(self):
        if self._event_peer is None:
            peers = self._endorsing_peers()
            own = [p for p in peers if p.org_id == self.identity.org_id]
            self._event_peer = own[0] if own else peers[0]
        return self._event_peer

    def submit_transaction(
        self,
        function: str,
        args: list[str] | tuple[str, ...],
        submit_time: int | None = None,
        on_commit=None,
    ) -> PendingTx:
        """Endorse on one peer per org, assemble, and hand to the orderer.

        Returns immediately after the orderer accepts; commit arrives via
        the returned PendingTx (and the optional on_commit callback).
        """
        proposal = Proposal.build(
            self.identity, self.channel, self.chaincode, function, tuple(args)
        )
        channel_cfg = self.network.channels[self.channel].config
        required = channel_cfg.required_endorsing_orgs()
        responses = []
        failures: list[str] = []
        for peer in self._endorsing_peers():
            try:
                responses.append(peer.endorse(proposal))
            except PeerError as exc:
                failures.append(f"{peer.peer_id}: {exc}")
        if responses and not responses[0].ok:
            raise ContractError(responses[0].response_payload.decode("utf-8"))
        if len(responses) < required:
            raise EndorsementFailure(
                f"needed {required} endorsements, got {len(responses)}"
                + (f" ({'; '.join(failures)})" if failures else "")
            )
        when = submit_time if submit_time is not None else self.clock.now_ns()
        tx = assemble_transaction(proposal, responses, self.identity, when)
        pending = PendingTx(tx_id=tx.tx_id, submit_time=when, _event=threading.Event())

        def _on_event(event: CommitEvent) -> None:
            pending._resolve(event)
            if on_commit is not None:
                on_commit(event)

        self._watch_peer().watch_tx(tx.tx_id, _on_event)
        result = self.network.orderer.submit(tx)
        if not result:
            raise SubmitRejected(result.reason, result.code)
        return pending

    def submit_and_wait(
        self, function: str, args, timeout_s: float = DEFAULT_COMMIT_TIMEOUT_S
    ) -> CommitEvent:
        pending = self.submit_transaction(function, args)
        if self.clock.is_logical:
            raise RuntimeError(
                "submit_and_wait only makes sense on a wall clock; pump the "
                "logical clock and read PendingTx.result instead"
            )
        return pending.wait(timeout_s)

    def evaluate(self, function: str, args) -> bytes:
        """Read-only query on this org's peer at current committed height."""
        return self._watch_peer().query(self.channel, self.chaincode, function, args)
