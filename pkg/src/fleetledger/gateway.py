"""Client gateway: framed wire protocol over TCP plus the in-process core.

Frames are 4-byte big-endian length + canonical payload, capped at a
configured maximum. A session opens with a nonce/hello exchange that binds
it to a verified identity and one channel; afterwards the client can
endorse (the gateway fans out to one peer per org), submit, query, pull the
block stream, or subscribe to commit events -- several requests can be in
flight, matched by request id.
"""

from __future__ import annotations

import logging
import os
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass

from .codec import CodecError, Decoder, Encoder
from .identity import Certificate, Identity, verify_identity, verify_signature
from .ledger import Transaction, ValidationCode, encode_block_file
from .peer import CommitEvent, PeerError, Proposal, ProposalResponse

log = logging.getLogger(__name__)

MAX_FRAME_BYTES = 1 << 20  # 1 MiB default
_LEN = struct.Struct(">I")

# request kinds
ENDORSE = 1
SUBMIT = 2
DELIVER_FROM = 3
QUERY = 4
EVENTS_SUBSCRIBE = 5

# response statuses
ST_OK = 0
ST_ERROR = 1
ST_STREAM = 2


class ProtocolError(Exception):
    pass


class SessionRefused(Exception):
    pass


def send_frame(
    sock: socket.socket,
    payload: bytes,
    lock: threading.Lock | None = None,
    max_frame: int = MAX_FRAME_BYTES,
) -> None:
    if len(payload) > max_frame:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds maximum")
    data = _LEN.pack(len(payload)) + payload
    if lock is None:
        sock.sendall(data)
    else:
        with lock:
            sock.sendall(data)


def recv_frame(sock: socket.socket, max_frame: int = MAX_FRAME_BYTES) -> bytes:
    header = _recv_exactly(sock, 4)
    (length,) = _LEN.unpack(header)
    if length > max_frame:
        raise ProtocolError(f"frame of {length} bytes exceeds maximum {max_frame}")
    return _recv_exactly(sock, length)


def _recv_exactly(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionError("peer closed the connection")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


# --- in-process service core ----------------------------------------------------


class GatewayService:
    """Channel-scoped operations the wire protocol and the web app share."""

    def __init__(self, network) -> None:
        self.network = network

    def verify_session(
        self, channel: str, cert: Certificate, nonce: bytes, signature: bytes
    ) -> None:
        channels = self.network.channels
        if channel not in channels:
            raise SessionRefused(f"unknown channel {channel!r}")
        config = channels[channel].config
        if not config.is_member_org(cert.org_id) or not verify_identity(
            cert, config.org_roots
        ):
            raise SessionRefused("NOT_A_MEMBER")
        bound = Encoder().raw(nonce).string(channel).done()
        if not verify_signature(cert, bound, signature):
            raise SessionRefused("NOT_A_MEMBER")

    def endorse(self, channel: str, proposal: Proposal) -> list[ProposalResponse]:
        """One response per org; a majority must endorse, stragglers may fail."""
        required = self.network.channels[channel].config.required_endorsing_orgs()
        responses = []
        failures: list[PeerError] = []
        for peer in self.network.endorsing_peers(channel):
            try:
                responses.append(peer.endorse(proposal))
            except PeerError as exc:
                failures.append(exc)
        if len(responses) < required:
            if failures:
                raise PeerError(str(failures[0]), failures[0].code)
            raise PeerError("no endorsing peers joined", None)
        return responses

    def submit(self, tx: Transaction):
        return self.network.orderer.submit(tx)

    def query(self, channel: str, chaincode: str, function: str, args) -> bytes:
        peer = self.network.endorsing_peers(channel)[0]
        return peer.query(channel, chaincode, function, args)

    def subscribe_blocks(self, channel: str, from_block: int, callback) -> None:
        self.network.orderer.deliver(channel, from_block, callback)

    def subscribe_events(self, channel: str, callback) -> None:
        peer = self.network.endorsing_peers(channel)[0]
        peer.on_commit(lambda e: callback(e) if e.channel == channel else None)

    def replay_commit_events(self, channel: str, from_block: int) -> list[CommitEvent]:
        """Reconstruct commit events from the chain (reconnect catch-up)."""
        peer = self.network.endorsing_peers(channel)[0]
        ledger = peer.channels[channel].ledger
        events = []
        for block in ledger.blocks[from_block:]:
            for tx, code in zip(block.transactions, block.validation_codes):
                events.append(
                    CommitEvent(channel, block.header.number, tx.tx_id, code, 0)
                )
        return events


# --- TCP server ------------------------------------------------------------------


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        service: GatewayService = self.server.service  # type: ignore[attr-defined]
        max_frame: int = self.server.max_frame  # type: ignore[attr-defined]
        sock = self.request
        write_lock = threading.Lock()
        try:
            nonce = os.urandom(16)
            send_frame(sock, nonce, write_lock)
            hello = Decoder(recv_frame(sock, max_frame))
            channel = hello.string()
            cert = Certificate.decode(hello.bytestr())
            signature = hello.bytestr()
            hello.expect_end()
            try:
                service.verify_session(channel, cert, nonce, signature)
            except SessionRefused as refusal:
                send_frame(sock, Encoder().u64(ST_ERROR).string(str(refusal)).done(), write_lock)
                return
            send_frame(sock, Encoder().u64(ST_OK).string("session established").done(), write_lock)
            while True:
                try:
                    frame = recv_frame(sock, max_frame)
                except ConnectionError:
                    return
                self._dispatch(service, sock, write_lock, channel, frame)
        except (ProtocolError, CodecError) as exc:
            log.info("gateway session ended: %s", exc)
        except Exception:
            log.exception("gateway session crashed")

    def _dispatch(self, service, sock, write_lock, channel, frame: bytes) -> None:
        dec = Decoder(frame)
        kind = dec.u64()
        request_id = dec.u64()

        def reply_ok(payload: bytes) -> None:
            send_frame(
                sock,
                Encoder().u64(request_id).u64(ST_OK).bytestr(payload).done(),
                write_lock,
            )

        def reply_error(message: str, code: ValidationCode | None = None) -> None:
            send_frame(
                sock,
                Encoder()
                .u64(request_id)
                .u64(ST_ERROR)
                .string(message)
                .u64(code.value if code is not None else 0xFF)
                .done(),
                write_lock,
            )

        def stream(payload: bytes) -> None:
            try:
                send_frame(
                    sock,
                    Encoder().u64(request_id).u64(ST_STREAM).bytestr(payload).done(),
                    write_lock,
                )
            except OSError:
                pass  # subscriber went away

        try:
            if kind == ENDORSE:
                proposal = Proposal.decode(dec.bytestr())
                if proposal.channel != channel:
                    reply_error("proposal channel does not match session")
                    return
                responses = service.endorse(channel, proposal)
                enc = Encoder().count(len(responses))
                for response in responses:
                    enc.bytestr(response.encode())
                reply_ok(enc.done())
            elif kind == SUBMIT:
                tx = Transaction.decode(dec.bytestr())
                if tx.channel != channel:
                    reply_error("transaction channel does not match session")
                    return
                result = service.submit(tx)
                if result:
                    reply_ok(b"accepted")
                else:
                    reply_error(result.reason, result.code)
            elif kind == QUERY:
                chaincode = dec.string()
                function = dec.string()
                args = [dec.string() for _ in range(dec.count())]
                reply_ok(service.query(channel, chaincode, function, args))
            elif kind == DELIVER_FROM:
                from_block = dec.u64()
                service.subscribe_blocks(
                    channel, from_block, lambda b: stream(encode_block_file(b))
                )
                reply_ok(b"subscribed")
            elif kind == EVENTS_SUBSCRIBE:
                service.subscribe_events(channel, lambda e: stream(e.encode()))
                reply_ok(b"subscribed")
            else:
                reply_error(f"unknown request kind {kind}")
        except PeerError as exc:
            reply_error(str(exc), exc.code)
        except (CodecError, ValueError) as exc:
            reply_error(f"malformed request: {exc}")


class GatewayServer:
    def __init__(
        self,
        network,
        bind_addr: tuple[str, int] = ("127.0.0.1", 0),
        max_frame: int = MAX_FRAME_BYTES,
    ) -> None:
        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = _Server(bind_addr, _Handler)
        self._server.service = GatewayService(network)  # type: ignore[attr-defined]
        self._server.max_frame = max_frame  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address  # type: ignore[return-value]

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="gateway-tcp", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


# --- remote client ---------------------------------------------------------------


@dataclass
class RemotePending:
    tx_id: bytes
    submit_time: int
    event: threading.Event
    result: CommitEvent | None = None
    on_commit: object | None = None

    @property
    def done(self) -> bool:
        return self.result is not None

    def wait(self, timeout_s: float = 30.0) -> CommitEvent:
        if not self.event.wait(timeout_s):
            raise TimeoutError("no commit event received")
        assert self.result is not None
        return self.result


class GatewayClient:
    """connect_to_gateway / connect_to_network / connect_to_channel /
    load_chaincode, collapsed into one session object with the same
    submit/evaluate surface as the in-process client."""

    def __init__(
        self,
        address: tuple[str, int],
        identity: Identity,
        channel: str,
        chaincode: str,
        clock,
    ) -> None:
        self.identity = identity
        self.channel = channel
        self.chaincode = chaincode
        self.clock = clock
        self._sock = socket.create_connection(address, timeout=10)
        self._write_lock = threading.Lock()
        self._pending: dict[int, object] = {}
        self._streams: dict[int, object] = {}
        self._watchers: dict[bytes, RemotePending] = {}
        self._next_id = 1
        self._id_lock = threading.Lock()
        self._hello()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._events_request()

    # --- session ------------------------------------------------------------

    def _hello(self) -> None:
        nonce = recv_frame(self._sock)
        bound = Encoder().raw(nonce).string(self.channel).done()
        hello = (
            Encoder()
            .string(self.channel)
            .bytestr(self.identity.certificate.encode())
            .bytestr(self.identity.sign(bound))
            .done()
        )
        send_frame(self._sock, hello, self._write_lock)
        answer = Decoder(recv_frame(self._sock))
        status = answer.u64()
        message = answer.string()
        if status != ST_OK:
            self._sock.close()
            raise SessionRefused(message)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    # --- request plumbing ------------------------------------------------------

    def _new_request(self) -> tuple[int, "threading.Event", list]:
        with self._id_lock:
            request_id = self._next_id
            self._next_id += 1
        done = threading.Event()
        box: list = []
        self._pending[request_id] = (done, box)
        return request_id, done, box

    def _call(self, kind: int, body: Encoder, timeout_s: float = 10.0):
        request_id, done, box = self._new_request()
        frame = Encoder().u64(kind).u64(request_id).raw(body.done()).done()
        send_frame(self._sock, frame, self._write_lock)
        if not done.wait(timeout_s):
            raise TimeoutError("gateway did not answer")
        status, payload = box[0]
        return status, payload

    def _read_loop(self) -> None:
        try:
            while True:
                frame = Decoder(recv_frame(self._sock))
                request_id = frame.u64()
                status = frame.u64()
                if status == ST_STREAM:
                    handler = self._streams.get(request_id)
                    if handler is not None:
                        handler(frame.bytestr())
                    continue
                if status == ST_ERROR:
                    message = frame.string()
                    code_raw = frame.u64()
                    code = (
                        ValidationCode(code_raw) if code_raw != 0xFF else None
                    )
                    payload: object = (message, code)
                else:
                    payload = frame.bytestr()
                entry = self._pending.pop(request_id, None)
                if entry is not None:
                    done, box = entry
                    box.append((status, payload))
                    done.set()
        except (ConnectionError, OSError, CodecError):
            for done, box in self._pending.values():
                box.append((ST_ERROR, ("connection lost", None)))
                done.set()

    def _events_request(self) -> None:
        request_id, done, box = self._new_request()
        self._streams[request_id] = self._on_event_frame
        frame = Encoder().u64(EVENTS_SUBSCRIBE).u64(request_id).done()
        send_frame(self._sock, frame, self._write_lock)
        done.wait(10)

    def _on_event_frame(self, payload: bytes) -> None:
        event = CommitEvent.decode(payload)
        pending = self._watchers.pop(event.tx_id, None)
        if pending is not None:
            pending.result = event
            pending.event.set()
            if pending.on_commit is not None:
                pending.on_commit(event)

    # --- client operations ------------------------------------------------------

    def endorse(self, proposal: Proposal) -> list[ProposalResponse]:
        status, payload = self._call(ENDORSE, Encoder().bytestr(proposal.encode()))
        if status != ST_OK:
            message, code = payload
            raise PeerError(message, code)
        dec = Decoder(payload)
        return [ProposalResponse.decode(dec.bytestr()) for _ in range(dec.count())]

    def submit_transaction(
        self, function: str, args, submit_time: int | None = None, on_commit=None
    ) -> RemotePending:
        from .peer import assemble_transaction
        from .contracts import ContractError

        proposal = Proposal.build(
            self.identity, self.channel, self.chaincode, function, tuple(args)
        )
        responses = self.endorse(proposal)
        if responses and not responses[0].ok:
            raise ContractError(responses[0].response_payload.decode("utf-8"))
        when = submit_time if submit_time is not None else self.clock.now_ns()
        tx = assemble_transaction(proposal, responses, self.identity, when)
        pending = RemotePending(tx.tx_id, when, threading.Event(), on_commit=on_commit)
        self._watchers[tx.tx_id] = pending
        status, payload = self._call(SUBMIT, Encoder().bytestr(tx.encode()))
        if status != ST_OK:
            self._watchers.pop(tx.tx_id, None)
            message, code = payload
            raise PeerError(message, code)
        return pending

    def evaluate(self, function: str, args) -> bytes:
        body = Encoder().string(self.chaincode).string(function).count(len(args))
        for arg in args:
            body.string(arg)
        status, payload = self._call(QUERY, body)
        if status != ST_OK:
            message, code = payload
            raise PeerError(message, code)
        return payload

    def deliver_from(self, from_block: int, callback) -> None:
        request_id, done, box = self._new_request()
        self._streams[request_id] = lambda data: callback(data)
        frame = Encoder().u64(DELIVER_FROM).u64(request_id).u64(from_block).done()
        send_frame(self._sock, frame, self._write_lock)
        done.wait(10)
