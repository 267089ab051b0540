import json

import pytest

from fleetledger.bootstrap import standard_network
from fleetledger.clock import LogicalClock, s_to_ns
from fleetledger.client import ChannelClient
from fleetledger.config import OrdererConfig
from fleetledger.contracts import ContractError
from fleetledger.ledger import ValidationCode
from fleetledger.peer import (
    EndorsementDivergence,
    PeerError,
    Proposal,
    assemble_transaction,
)

V = ValidationCode


@pytest.fixture
def stack():
    clock = LogicalClock()
    return standard_network(
        clock, orderer_config=OrdererConfig(batch_timeout_s=0.5, max_message_count=50)
    )


def path_json(seq=1, robot="uav1"):
    return json.dumps(
        {
            "asset_id": f"path~{robot}~{seq:06d}",
            "robot_id": robot,
            "x": 1.0, "y": 0.0, "z": 0.0, "yaw": 0.0,
            "stamp": 1, "owner_org": "Org1",
        }
    )


def client_for(stack, chaincode="path"):
    app = stack.network.issue_client_identity("Org1", f"app.{chaincode}")
    return ChannelClient(stack.network, app, stack.channel_name, chaincode)


def endorse_on(stack, peer_id, identity, function, args, chaincode="path"):
    proposal = Proposal.build(identity, stack.channel_name, chaincode, function, args)
    return stack.network.peers[peer_id].endorse(proposal), proposal


def test_endorse_create_records_absent_read_and_write(stack):
    app = stack.network.issue_client_identity("Org1", "app1")
    response, _ = endorse_on(
        stack, "peer0.org1", app, "CreateAsset", (path_json(),)
    )
    assert response.ok
    key = "path~uav1~000001"
    assert response.read_set == [(key, None)]
    assert [k for k, _, _ in response.write_set] == [key]


def test_endorse_query_has_empty_write_set(stack):
    app = stack.network.issue_client_identity("Org1", "app1")
    response, _ = endorse_on(stack, "peer0.org1", app, "ReadAllAssets", ())
    assert response.ok and response.write_set == []
    assert response.response_payload == b"[]"


def test_two_endorsers_identical_rwsets_different_signatures(stack):
    app = stack.network.issue_client_identity("Org1", "app1")
    proposal = Proposal.build(
        app, stack.channel_name, "path", "CreateAsset", (path_json(),)
    )
    r1 = stack.network.peers["peer0.org1"].endorse(proposal)
    r2 = stack.network.peers["peer0.org2"].endorse(proposal)
    assert r1.signed_payload() == r2.signed_payload()
    assert r1.endorser_signature != r2.endorser_signature
    tx = assemble_transaction(proposal, [r1, r2], app, submit_time=0)
    assert {org for org, _, _ in tx.endorsements} == {"Org1", "Org2"}


def test_assemble_rejects_divergent_rwsets(stack):
    app = stack.network.issue_client_identity("Org1", "app1")
    proposal = Proposal.build(
        app, stack.channel_name, "path", "CreateAsset", (path_json(),)
    )
    r1 = stack.network.peers["peer0.org1"].endorse(proposal)
    r2 = stack.network.peers["peer0.org2"].endorse(proposal)
    r2.write_set[0] = (r2.write_set[0][0], b"forged", False)
    with pytest.raises(EndorsementDivergence):
        assemble_transaction(proposal, [r1, r2], app, submit_time=0)


def test_single_org_endorsement_fails_policy_end_to_end(stack):
    clock = stack.network.clock
    app = stack.network.issue_client_identity("Org1", "app1")
    proposal = Proposal.build(
        app, stack.channel_name, "path", "CreateAsset", (path_json(),)
    )
    r1 = stack.network.peers["peer0.org1"].endorse(proposal)
    tx = assemble_transaction(proposal, [r1], app, submit_time=clock.now_ns())
    events = []
    stack.network.peers["peer0.org2"].on_commit(events.append)
    assert stack.network.orderer.submit(tx)
    clock.run_until(clock.now_ns() + s_to_ns(1.0))
    assert [e.validation_code for e in events if e.tx_id == tx.tx_id] == [
        V.ENDORSEMENT_POLICY_FAILURE
    ]


def test_commit_events_exactly_once_per_tx(stack):
    clock = stack.network.clock
    cli = client_for(stack)
    events = []
    stack.network.peers["peer0.org1"].on_commit(events.append)
    pendings = [
        cli.submit_transaction("CreateAsset", [path_json(seq=i)]) for i in (1, 2, 3)
    ]
    clock.run_until(s_to_ns(2.0))
    ids = [e.tx_id for e in events]
    assert sorted(ids) == sorted(p.tx_id for p in pendings)
    assert len(set(ids)) == 3
    assert all(p.result.validation_code is V.VALID for p in pendings)


def test_contract_error_surfaces_before_ordering(stack):
    clock = stack.network.clock
    cli = client_for(stack)
    cli.submit_transaction("CreateAsset", [path_json()])
    clock.run_until(s_to_ns(1.0))
    with pytest.raises(ContractError, match="already exists"):
        cli.submit_transaction("CreateAsset", [path_json()])


def test_same_block_double_create_yields_mvcc_conflict(stack):
    # raced in the same block: both endorsed at the same height
    clock = stack.network.clock
    cli = client_for(stack)
    p1 = cli.submit_transaction("CreateAsset", [path_json()])
    p2 = cli.submit_transaction("CreateAsset", [path_json()])
    clock.run_until(s_to_ns(1.0))
    codes = sorted(
        (p.result.validation_code for p in (p1, p2)), key=lambda c: c.name
    )
    assert codes == [V.MVCC_READ_CONFLICT, V.VALID]


def test_tampered_delivered_block_halts_peer(stack):
    clock = stack.network.clock
    peer = stack.network.peers["peer0.org1"]
    channel = stack.channel_name
    cli = client_for(stack)
    cli.submit_transaction("CreateAsset", [path_json(1)])
    clock.run_until(s_to_ns(1.0))
    assert not peer.halted(channel)
    # forge a block with a bad prev hash and push it straight to the peer
    from fleetledger.ledger import Block, CutReason

    good = stack.network.orderer.chain(channel)[-1]
    forged = Block.build(
        good.header.number + 1, b"\xde" * 32, good.transactions, CutReason.TIMEOUT
    )
    peer._on_block(peer.channels[channel], forged)
    assert peer.halted(channel)
    assert "prev_hash" in peer.channels[channel].halt_reason


def test_query_bypasses_ordering_and_matches_dump(stack):
    clock = stack.network.clock
    cli = client_for(stack)
    for i in (1, 2, 3):
        cli.submit_transaction("CreateAsset", [path_json(seq=i)])
    clock.run_until(s_to_ns(1.0))
    assets = json.loads(cli.evaluate("ReadAllAssets", []))
    assert len(assets) == 3
    dump = stack.network.peers["peer0.org1"].state_dump(stack.channel_name)
    dump_keys = [line.split("\t")[0] for line in dump.splitlines()]
    assert [a["asset_id"] for a in assets] == dump_keys


def test_unknown_chaincode_and_non_member_paths(stack):
    from fleetledger.identity import Organization, Role

    app = stack.network.issue_client_identity("Org1", "app1")
    with pytest.raises(PeerError) as err:
        endorse_on(stack, "peer0.org1", app, "CreateAsset", (path_json(),), "teleport")
    assert err.value.code is V.UNKNOWN_CHAINCODE

    mallory = Organization.create("Mallory").issue("spy", Role.CLIENT)
    with pytest.raises(PeerError) as err:
        endorse_on(stack, "peer0.org1", mallory, "CreateAsset", (path_json(),))
    assert err.value.code is V.NOT_A_MEMBER


def test_cross_peer_state_dumps_equal_after_run(stack):
    clock = stack.network.clock
    cli = client_for(stack)
    for i in range(10):
        cli.submit_transaction("CreateAsset", [path_json(seq=i)])
        clock.run_until(clock.now_ns() + s_to_ns(0.13))
    clock.run_until(clock.now_ns() + s_to_ns(1.0))
    d1 = stack.network.peers["peer0.org1"].state_dump(stack.channel_name)
    d2 = stack.network.peers["peer0.org2"].state_dump(stack.channel_name)
    assert d1 == d2 and len(d1.splitlines()) == 10
