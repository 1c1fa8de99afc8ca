import random
import threading
import time

import pytest

from ppkda import keystroke, paillier, trust
from ppkda.errors import (
    DuplicateUser,
    InsufficientSamples,
    SessionExpired,
    SessionRejected,
    UnknownKeyIndex,
    UnknownUser,
)
from ppkda.fixedpoint import FixedPointParams, encode
from ppkda.keystroke import GeneratorProfile, build_template, dwell_time, synthesize
from ppkda.protocol import (
    PPCP_LABELS,
    UNCONDITIONAL_LABELS,
    AuthClient,
    AuthServer,
)
from ppkda.store import TemplateStore
from ppkda.transport import SocketChannel, TcpServer, loopback_pair
from ppkda.trust import Decision, QuantizedTrustParams, TrustParams

FP = FixedPointParams()


class Tap:
    """Channel wrapper recording everything the client sends."""

    def __init__(self, inner):
        self.inner = inner
        self.sent = []

    def send(self, message):
        self.sent.append(message)
        self.inner.send(message)

    def recv(self):
        return self.inner.recv()

    def close(self):
        self.inner.close()


class Scenario:
    def __init__(self, tmp_path, keypair, seed=0, n_keys=4, **server_kwargs):
        self.pk, self.sk = keypair
        self.profile = GeneratorProfile.random(n_keys, seed=seed)
        self.enroll_events = synthesize(self.profile, 60 * n_keys, stream_seed=seed + 1)
        self.template = build_template(self.enroll_events)
        self.server = AuthServer(TemplateStore(tmp_path / "store"), TrustParams(),
                                 FP, rng=random.Random(seed + 2), **server_kwargs)
        self.qparams = QuantizedTrustParams.from_params(TrustParams(), FP)
        client_chan, server_chan = loopback_pair()
        threading.Thread(target=self.server.serve_connection,
                         args=(server_chan,), daemon=True).start()
        self.tap = Tap(client_chan)
        self.client = AuthClient(self.tap, "alice", self.pk, self.sk, FP,
                                 rng=random.Random(seed + 3))

    def auth_events(self, count, stream_seed, profile=None):
        events = synthesize(profile or self.profile, count * 3, stream_seed=stream_seed)
        usable = [e for e in events if e.key_index in self.template.stats]
        return usable[:count]

    def session(self):
        return self.server.sessions[self.client._session_id]


@pytest.fixture
def scenario(tmp_path, keypair):
    return Scenario(tmp_path, keypair)


def test_enroll_escrow_round_trip(scenario):
    report = scenario.client.enroll(scenario.enroll_events)
    assert report.stored_keys == len(scenario.template.stats)

    doc = scenario.server.store.get("alice")
    assert len(doc["entries"]) == report.stored_keys
    # exactly 2 ciphertexts per key, decrypting to the fixed-point statistics
    for entry in doc["entries"]:
        stats = scenario.template.stats[entry["key"]]
        inv = paillier.Ciphertext(int(entry["inv_sigma"], 16), scenario.pk.fingerprint)
        mu = paillier.Ciphertext(int(entry["mu_over_sigma"], 16), scenario.pk.fingerprint)
        assert paillier.decrypt_signed(scenario.sk, scenario.pk, inv) == \
            encode(1.0 / stats.stddev, FP)
        assert paillier.decrypt_signed(scenario.sk, scenario.pk, mu) == \
            encode(stats.mean / stats.stddev, FP)


def test_enroll_duplicate(scenario):
    scenario.client.enroll(scenario.enroll_events)
    with pytest.raises(DuplicateUser):
        scenario.client.enroll(scenario.enroll_events)


def test_enroll_requires_samples(scenario):
    with pytest.raises(InsufficientSamples):
        scenario.client.enroll([])


def test_begin_unknown_user(scenario):
    with pytest.raises(UnknownUser):
        scenario.client.begin()


def test_begin_returns_template_handles(scenario):
    scenario.client.enroll(scenario.enroll_events)
    n = scenario.client.begin()
    assert n == len(scenario.template.stats)
    session = scenario.session()
    assert session.transcript.rounds == 2  # request + template part
    assert session.transcript.template_keys == n
    # handed-back handles decrypt to encode(1/sigma)
    for key, ct in scenario.client._inv_sigma.items():
        stats = scenario.template.stats[key]
        assert paillier.decrypt_signed(scenario.sk, scenario.pk, ct) == \
            encode(1.0 / stats.stddev, FP)


def test_keystroke_ciphertext_is_scaled_template_handle(scenario):
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    event = scenario.auth_events(1, stream_seed=50)[0]
    scenario.client.keystroke(event)

    sent = [m for m in scenario.tap.sent if m["type"] == "KEYSTROKE"]
    assert len(sent) == 1  # one ciphertext per keystroke, subprotocols aside
    ct = paillier.Ciphertext(int(sent[0]["body"]["ct"], 16), scenario.pk.fingerprint)
    stats = scenario.template.stats[event.key_index]
    expected = dwell_time(event) * encode(1.0 / stats.stddev, FP)
    assert paillier.decrypt_signed(scenario.sk, scenario.pk, ct) == expected


def test_encrypted_trace_equals_quantized_oracle(scenario):
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    state = trust.init_quantized(scenario.qparams)
    session = scenario.session()
    for event in scenario.auth_events(30, stream_seed=60):
        decision = scenario.client.keystroke(event)
        d_q = trust.quantized_distance(
            dwell_time(event), scenario.template.stats[event.key_index], FP)
        assert d_q >= 0
        state = trust.step_quantized(state, d_q, scenario.qparams)
        c_plain = paillier.decrypt_signed(scenario.sk, scenario.pk, session.c_star)
        assert c_plain == state.level_q
        assert c_plain <= scenario.qparams.max_q
        assert decision == state.decision
        if decision is Decision.REJECTED:
            break


def test_rejection_propagates(tmp_path, keypair):
    scenario = Scenario(tmp_path, keypair, seed=7)
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    imposter = GeneratorProfile.random(scenario.profile.n_keys, seed=4242)
    events = scenario.auth_events(200, stream_seed=61, profile=imposter)
    decision = Decision.ACTIVE
    for event in events:
        decision = scenario.client.keystroke(event)
        if decision is Decision.REJECTED:
            break
    assert decision is Decision.REJECTED
    with pytest.raises(SessionRejected):
        scenario.client.keystroke(events[0])


def test_transcript_counters_and_labels(scenario):
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    state = trust.init_quantized(scenario.qparams)
    reward_branches = 0
    events = scenario.auth_events(12, stream_seed=62)
    for event in events:
        scenario.client.keystroke(event)
        d_q = trust.quantized_distance(
            dwell_time(event), scenario.template.stats[event.key_index], FP)
        if d_q <= scenario.qparams.dist_q:
            reward_branches += 1
        state = trust.step_quantized(state, d_q, scenario.qparams)

    t = scenario.session().transcript
    n = t.template_keys
    assert t.table_row() == (5, n + 4, 4)
    assert t.keystrokes == len(events)
    # every keystroke fires the three unconditional comparisons; the clamp
    # fires exactly once per reward branch
    for label in UNCONDITIONAL_LABELS:
        assert t.label_counts[label] == len(events)
    assert t.label_counts.get("reward_clamp", 0) == reward_branches
    assert set(t.label_counts) <= set(PPCP_LABELS)
    expected_invocations = 3 * len(events) + reward_branches
    assert t.ppcp_invocations == expected_invocations
    # per invocation: 3 ciphertext-bearing messages to the key holder, 2 back
    assert t.ppcp_msgs_to_client == 3 * expected_invocations
    assert t.ppcp_msgs_from_client == 2 * expected_invocations
    # rounds: begin(2) + per keystroke (KEYSTROKE + DECISION)
    assert t.rounds == 2 + 2 * len(events)


def test_unknown_key_index(scenario):
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    with pytest.raises(UnknownKeyIndex):
        scenario.client.keystroke(keystroke.KeyEvent(999, 0, 80))
    # server-side check too: bypass the client's own guard
    scenario.client._inv_sigma[999] = paillier.encrypt(scenario.pk, 1)
    with pytest.raises(UnknownKeyIndex):
        scenario.client.keystroke(keystroke.KeyEvent(999, 0, 80))


def test_session_timeout(tmp_path, keypair):
    scenario = Scenario(tmp_path, keypair, session_timeout=0.05)
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    time.sleep(0.2)
    with pytest.raises(SessionExpired):
        scenario.client.keystroke(scenario.auth_events(1, stream_seed=63)[0])


def test_server_holds_no_private_key(scenario):
    scenario.client.enroll(scenario.enroll_events)
    scenario.client.begin()
    scenario.client.keystroke(scenario.auth_events(1, stream_seed=64)[0])
    objs = [scenario.server, scenario.session(), scenario.session().transcript]
    for obj in objs:
        for value in vars(obj).values():
            assert not isinstance(value, paillier.HomPrivateKey)


def test_tcp_transport_equivalent_to_loopback(tmp_path, keypair):
    pk, sk = keypair
    profile = GeneratorProfile.random(3, seed=9)
    enroll_events = synthesize(profile, 150, stream_seed=10)
    template = build_template(enroll_events)
    auth_events = [e for e in synthesize(profile, 40, stream_seed=11)
                   if e.key_index in template.stats][:8]

    def run_scenario(channel, server):
        client = AuthClient(channel, "carol", pk, sk, FP, rng=random.Random(12))
        client.enroll(enroll_events)
        client.begin()
        decisions = [client.keystroke(e) for e in auth_events]
        transcript = server.sessions[client._session_id].transcript
        return decisions, transcript.table_row(), transcript.rounds

    # loopback
    server_a = AuthServer(TemplateStore(tmp_path / "a"), TrustParams(), FP,
                          rng=random.Random(13))
    chan, server_chan = loopback_pair()
    threading.Thread(target=server_a.serve_connection, args=(server_chan,),
                     daemon=True).start()
    result_loopback = run_scenario(chan, server_a)
    chan.close()

    # TCP
    server_b = AuthServer(TemplateStore(tmp_path / "b"), TrustParams(), FP,
                          rng=random.Random(13))
    tcp = TcpServer("127.0.0.1", 0, server_b.serve_connection)
    tcp.start()
    import socket
    sock = socket.create_connection(tcp.address)
    result_tcp = run_scenario(SocketChannel(sock), server_b)
    sock.close()
    tcp.stop()

    assert result_loopback == result_tcp
