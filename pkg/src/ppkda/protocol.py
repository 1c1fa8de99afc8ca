"""Client and server state machines of the encrypted authentication protocol.

Enrollment stores E(1/sigma_i) and E(mean_i/sigma_i) per key under the
user's public key.  At authentication start the server hands back the
E(1/sigma_i) handles and initializes the encrypted trust level at
E(max).  Every keystroke then runs, entirely on the server against the
key holder:

  1. abs branch      - which of E(t/sigma), E(mean/sigma) is larger,
                       so the encrypted distance comes out non-negative
  2. dist_vs_T       - distance against the penalty threshold
  3. reward_clamp    - (reward branch only) does C + R overshoot max
  4. reject_check    - is C still strictly above the lockout threshold

Each of those is a comparison subprotocol invocation; the server sees
only Booleans, key indices, ciphertexts, and counters.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Any

from . import errors, paillier
from .compare import (
    BlindedDiff,
    BlindedResult,
    CompareClient,
    CompareServer,
    LowBits,
    MaskedTerms,
    ZeroFlag,
)
from .errors import (
    DuplicateUser,
    InsufficientSamples,
    InvalidState,
    MalformedPayload,
    PpkdaError,
    SessionExpired,
    SessionRejected,
    UnknownKeyIndex,
    UnknownUser,
)
from .fixedpoint import DEFAULT_PARAMS, FixedPointParams, encode
from .keystroke import KeyEvent, ReferenceTemplate, build_template, dwell_time
from .paillier import Ciphertext, HomPrivateKey, HomPublicKey
from .store import TemplateStore, validate_user_id
from .transport import Channel
from .trust import Decision, QuantizedTrustParams, TrustParams

PPCP_LABELS = ("abs_branch", "dist_vs_T", "reward_clamp", "reject_check")
UNCONDITIONAL_LABELS = ("abs_branch", "dist_vs_T", "reject_check")

STORE_FORMAT_VERSION = 1


def _ct_hex(c: Ciphertext) -> str:
    return f"{c.value:x}"


def _hex_ct(h: str, pk: HomPublicKey) -> Ciphertext:
    try:
        return Ciphertext(value=int(h, 16), key_id=pk.fingerprint)
    except (TypeError, ValueError) as exc:
        raise MalformedPayload(f"bad ciphertext field: {h!r}") from exc


@dataclass
class SessionTranscript:
    """Per-session accounting of rounds, ciphertexts, and subprotocol calls.

    ``rounds`` counts main-protocol messages only; subprotocol traffic is
    tracked separately, matching the complexity-table convention.
    """

    rounds: int = 0
    keystrokes: int = 0
    template_keys: int = 0
    ciphertexts_sent: int = 0          # both directions, subprotocols included
    ppcp_invocations: int = 0
    label_counts: dict[str, int] = field(default_factory=dict)
    ppcp_msgs_to_client: int = 0       # ciphertext-bearing subprotocol messages
    ppcp_msgs_from_client: int = 0

    def record_label(self, label: str) -> None:
        self.ppcp_invocations += 1
        self.label_counts[label] = self.label_counts.get(label, 0) + 1

    def table_row(self) -> tuple[int, int, int]:
        """(rounds, transmitted encryptions, subprotocol invocations) for one
        enrollment-through-decision cycle, subprotocol internals excluded.

        Rounds: enrollment upload, auth request, template fetch, keystroke,
        decision.  Transmitted encryptions: N template handles + 1 keystroke
        ciphertext + one per always-firing subprotocol (the reward clamp only
        fires on the reward branch and is excluded from the nominal count).
        """
        rounds = 5
        transmitted = self.template_keys + 1 + len(UNCONDITIONAL_LABELS)
        return rounds, transmitted, len(PPCP_LABELS)


@dataclass
class ServerSession:
    """Everything the server keeps for one live authentication session.

    Deliberately nothing here is a plaintext biometric quantity: the
    privacy audit enumerates these fields.
    """

    session_id: str
    user_id: str
    pk: HomPublicKey
    inv_sigma: dict[int, Ciphertext]
    mu_over_sigma: dict[int, Ciphertext]
    c_star: Ciphertext
    decision: Decision
    transcript: SessionTranscript
    last_active: float
    seq_out: int = 0
    seq_in: int = 0


@dataclass(frozen=True)
class EnrollReport:
    stored_keys: int
    excluded: dict[int, str]


class AuthServer:
    """Server engine; one `serve_connection` call per client connection.

    The server never holds a private key: it is constructed without one
    and only ever manipulates ciphertexts, Booleans from the comparison
    subprotocol, and counters.
    """

    def __init__(self, store: TemplateStore,
                 trust_params: TrustParams | None = None,
                 fp: FixedPointParams = DEFAULT_PARAMS,
                 rng: random.Random | None = None,
                 session_timeout: float = 60.0):
        self.store = store
        self.trust_params = trust_params or TrustParams()
        self.fp = fp
        self.qparams = QuantizedTrustParams.from_params(self.trust_params, fp)
        self.rng = rng or random.SystemRandom()
        self.session_timeout = session_timeout
        self.sessions: dict[str, ServerSession] = {}
        self._session_ids = itertools.count(1)
        self._sub_ids = itertools.count(1)

    # -- connection loop ---------------------------------------------------

    def serve_connection(self, channel: Channel) -> None:
        while True:
            try:
                msg = channel.recv()
            except errors.ConnectionClosed:
                return
            try:
                self._dispatch(channel, msg)
            except errors.ConnectionClosed:
                return
            except PpkdaError as exc:
                self._send(channel, "ERROR",
                           user_id=msg.get("user_id", ""),
                           session_id=msg.get("session_id", ""),
                           body={"code": type(exc).__name__, "detail": str(exc)})

    def _dispatch(self, channel: Channel, msg: dict[str, Any]) -> None:
        mtype = msg.get("type")
        if mtype == "ENROLL":
            self._handle_enroll(channel, msg)
        elif mtype == "AUTH_BEGIN":
            self._handle_begin(channel, msg)
        elif mtype == "KEYSTROKE":
            self._handle_keystroke(channel, msg)
        else:
            raise MalformedPayload(f"unexpected message type {mtype!r}")

    def _send(self, channel: Channel, mtype: str, user_id: str = "",
              session_id: str = "", body: dict[str, Any] | None = None,
              session: ServerSession | None = None) -> None:
        if session is not None:
            session.seq_out += 1
            seq = session.seq_out
            user_id, session_id = session.user_id, session.session_id
        else:
            seq = 0
        channel.send({"type": mtype, "user_id": user_id,
                      "session_id": session_id, "seq": seq, "body": body or {}})

    # -- enrollment ----------------------------------------------------------

    def _handle_enroll(self, channel: Channel, msg: dict[str, Any]) -> None:
        user_id = validate_user_id(msg.get("user_id", ""))
        if self.store.exists(user_id):
            raise DuplicateUser(f"user {user_id} already enrolled")
        body = msg["body"]
        entries = body.get("entries", [])
        if not entries:
            raise InsufficientSamples("enrollment carries no usable keys")
        document = {
            "version": STORE_FORMAT_VERSION,
            "user_id": user_id,
            "pubkey": body["pubkey"],
            "entries": [
                {"key": int(e["key"]), "inv_sigma": e["inv_sigma"],
                 "mu_over_sigma": e["mu_over_sigma"]}
                for e in entries
            ],
        }
        self.store.put(user_id, document)
        self._send(channel, "ENROLL_ACK", user_id=user_id,
                   body={"stored": len(entries)})

    # -- authentication ------------------------------------------------------

    def _handle_begin(self, channel: Channel, msg: dict[str, Any]) -> None:
        user_id = validate_user_id(msg.get("user_id", ""))
        try:
            document = self.store.get(user_id)
        except errors.NotFound:
            raise UnknownUser(f"user {user_id} is not enrolled") from None
        pk = HomPublicKey(n=int(document["pubkey"]["n"], 16),
                          g=int(document["pubkey"]["g"], 16),
                          key_bits=document["pubkey"]["k"])
        inv_sigma = {}
        mu_over_sigma = {}
        for entry in document["entries"]:
            key = entry["key"]
            inv_sigma[key] = _hex_ct(entry["inv_sigma"], pk)
            mu_over_sigma[key] = _hex_ct(entry["mu_over_sigma"], pk)

        session_id = f"s{next(self._session_ids)}"
        transcript = SessionTranscript(template_keys=len(inv_sigma))
        transcript.rounds += 1  # AUTH_BEGIN
        c_star = paillier.encrypt_signed(pk, self.qparams.max_q, self.rng)
        session = ServerSession(
            session_id=session_id, user_id=user_id, pk=pk,
            inv_sigma=inv_sigma, mu_over_sigma=mu_over_sigma,
            c_star=c_star, decision=Decision.ACTIVE,
            transcript=transcript, last_active=time.monotonic())
        self.sessions[session_id] = session

        transcript.rounds += 1  # TEMPLATE_PART
        transcript.ciphertexts_sent += len(inv_sigma)
        self._send(channel, "TEMPLATE_PART", session=session, body={
            "entries": [{"key": k, "inv_sigma": _ct_hex(c)}
                        for k, c in sorted(inv_sigma.items())]})

    def _handle_keystroke(self, channel: Channel, msg: dict[str, Any]) -> None:
        session = self.sessions.get(msg.get("session_id", ""))
        if session is None:
            raise InvalidState("no such session; send AUTH_BEGIN first")
        now = time.monotonic()
        if now - session.last_active > self.session_timeout:
            del self.sessions[session.session_id]
            raise SessionExpired(f"session idle for more than {self.session_timeout}s")
        session.last_active = now
        if session.decision is Decision.REJECTED:
            raise SessionRejected("user already rejected on this session")

        body = msg["body"]
        key = int(body["key"])
        if key not in session.inv_sigma:
            raise UnknownKeyIndex(f"key index {key} is not enrolled")
        t_enc = _hex_ct(body["ct"], session.pk)

        transcript = session.transcript
        transcript.rounds += 1  # KEYSTROKE
        transcript.ciphertexts_sent += 1
        transcript.keystrokes += 1

        self._step(channel, session, key, t_enc)

        transcript.rounds += 1  # DECISION
        self._send(channel, "DECISION", session=session,
                   body={"status": session.decision.value})

    def _step(self, channel: Channel, session: ServerSession,
              key: int, t_enc: Ciphertext) -> None:
        pk = session.pk
        q = self.qparams
        mu_enc = session.mu_over_sigma[key]

        # 1. Absolute value branch: distance must come out non-negative.
        if self._ppcp_gt(channel, session, "abs_branch", t_enc, mu_enc):
            d_enc = paillier.add(pk, t_enc, paillier.negate(pk, mu_enc))
        else:
            d_enc = paillier.add(pk, mu_enc, paillier.negate(pk, t_enc))

        # 2. Penalty or reward.
        if self._ppcp_gt(channel, session, "dist_vs_T", d_enc, q.dist_q):
            c_star = paillier.add(pk, session.c_star, paillier.negate(pk, d_enc))
            c_star = paillier.add(pk, c_star,
                                  paillier.encrypt_signed(pk, q.dist_q, self.rng))
        else:
            candidate = paillier.add(
                pk, session.c_star,
                paillier.encrypt_signed(pk, q.reward_q, self.rng))
            if self._ppcp_gt(channel, session, "reward_clamp", candidate, q.max_q):
                c_star = paillier.encrypt_signed(pk, q.max_q, self.rng)
            else:
                c_star = candidate
        session.c_star = c_star

        # 4. Lockout: reject unless C is strictly above the threshold.
        if not self._ppcp_gt(channel, session, "reject_check", c_star, q.reject_q):
            session.decision = Decision.REJECTED

    # -- comparison subprotocol dialogue --------------------------------------

    def _ppcp_gt(self, channel: Channel, session: ServerSession, label: str,
                 x: int | Ciphertext, y: int | Ciphertext) -> int:
        """Strict [x > y] over the wire; operands are signed fixed-point values.

        Both sides are shifted into the non-negative comparison domain
        first; strictness comes from evaluating [y >= x] and negating.
        """
        offset = self.fp.max_magnitude
        x_off = paillier.add_plain(session.pk, x, offset) \
            if isinstance(x, Ciphertext) else x + offset
        y_off = paillier.add_plain(session.pk, y, offset) \
            if isinstance(y, Ciphertext) else y + offset

        cmp_server = CompareServer(session.pk, self.fp, self.rng)
        sub_id = f"{session.session_id}-p{next(self._sub_ids)}"
        transcript = session.transcript
        transcript.record_label(label)

        m1 = cmp_server.start(y_off, x_off)
        transcript.ciphertexts_sent += 1
        transcript.ppcp_msgs_to_client += 1
        self._send(channel, "PPCP_M1", session=session,
                   body={"sub_id": sub_id, "label": label, "z": _ct_hex(m1.z_enc)})

        m2 = self._expect(channel, "PPCP_M2", sub_id)
        bits = [_hex_ct(h, session.pk) for h in m2["bits"]]
        z_high = _hex_ct(m2["z_high"], session.pk)
        transcript.ciphertexts_sent += len(bits) + 1
        transcript.ppcp_msgs_from_client += 1

        m3 = cmp_server.mask_bits(LowBits(bit_encs=tuple(bits), z_high_enc=z_high))
        transcript.ciphertexts_sent += len(m3.term_encs)
        transcript.ppcp_msgs_to_client += 1
        self._send(channel, "PPCP_M3", session=session,
                   body={"sub_id": sub_id,
                         "terms": [_ct_hex(c) for c in m3.term_encs]})

        m4 = self._expect(channel, "PPCP_M4", sub_id)
        transcript.ciphertexts_sent += 1
        transcript.ppcp_msgs_from_client += 1
        m5 = cmp_server.finish(ZeroFlag(flag_enc=_hex_ct(m4["flag"], session.pk)))
        transcript.ciphertexts_sent += 1
        transcript.ppcp_msgs_to_client += 1
        self._send(channel, "PPCP_M5", session=session,
                   body={"sub_id": sub_id, "masked": _ct_hex(m5.masked_enc)})

        result_body = self._expect(channel, "PPCP_RESULT", sub_id)
        ge = cmp_server.absorb(int(result_body["bit"]))
        return 1 - ge

    def _expect(self, channel: Channel, mtype: str, sub_id: str) -> dict[str, Any]:
        msg = channel.recv()
        if msg.get("type") != mtype:
            raise MalformedPayload(
                f"expected {mtype} mid-subprotocol, got {msg.get('type')!r}")
        body = msg["body"]
        if body.get("sub_id") != sub_id:
            raise MalformedPayload("subprotocol id mismatch")
        return body


class AuthClient:
    """Client engine owning the key pair and the typing stream."""

    def __init__(self, channel: Channel, user_id: str,
                 pk: HomPublicKey, sk: HomPrivateKey,
                 fp: FixedPointParams = DEFAULT_PARAMS,
                 rng: random.Random | None = None):
        self.channel = channel
        self.user_id = validate_user_id(user_id)
        self.pk = pk
        self.sk = sk
        self.fp = fp
        self.rng = rng or random.SystemRandom()
        self._cmp = CompareClient(sk, pk, fp, self.rng)
        self._session_id = ""
        self._inv_sigma: dict[int, Ciphertext] = {}
        self._seq = 0

    # -- enrollment -----------------------------------------------------------

    def enroll(self, events: list[KeyEvent]) -> EnrollReport:
        """Build the template locally, encrypt it, ship it, forget it."""
        template = build_template(events)
        return self.enroll_template(template)

    def enroll_template(self, template: ReferenceTemplate) -> EnrollReport:
        if not template.stats:
            raise InsufficientSamples("no key has enough samples to enroll")
        entries = []
        for key, stats in sorted(template.stats.items()):
            inv_q = encode(1.0 / stats.stddev, self.fp)
            mu_q = encode(stats.mean / stats.stddev, self.fp)
            entries.append({
                "key": key,
                "inv_sigma": _ct_hex(paillier.encrypt_signed(self.pk, inv_q, self.rng)),
                "mu_over_sigma": _ct_hex(paillier.encrypt_signed(self.pk, mu_q, self.rng)),
            })
        self._send("ENROLL", body={
            "pubkey": {"n": f"{self.pk.n:x}", "g": f"{self.pk.g:x}",
                       "k": self.pk.key_bits},
            "entries": entries,
        })
        ack = self._recv_expect("ENROLL_ACK")
        return EnrollReport(stored_keys=ack["body"]["stored"],
                            excluded=dict(template.excluded))

    # -- authentication ---------------------------------------------------------

    def begin(self) -> int:
        """Open an authentication session; returns the enrolled key count."""
        self._send("AUTH_BEGIN")
        msg = self._recv_expect("TEMPLATE_PART")
        self._session_id = msg["session_id"]
        self._inv_sigma = {
            int(e["key"]): _hex_ct(e["inv_sigma"], self.pk)
            for e in msg["body"]["entries"]}
        return len(self._inv_sigma)

    def keystroke(self, event: KeyEvent) -> Decision:
        """Send one keystroke and serve the comparison subprotocols."""
        if not self._session_id:
            raise InvalidState("call begin() first")
        key = event.key_index
        if key not in self._inv_sigma:
            raise UnknownKeyIndex(f"key index {key} is not enrolled")
        t = dwell_time(event)
        ct = paillier.scalar_mul(self.pk, self._inv_sigma[key], t)
        self._send("KEYSTROKE", body={"key": key, "ct": _ct_hex(ct)})
        return self._serve_until_decision()

    def _serve_until_decision(self) -> Decision:
        while True:
            msg = self.channel.recv()
            mtype = msg.get("type")
            body = msg.get("body", {})
            if mtype == "PPCP_M1":
                m2 = self._cmp.split_bits(BlindedDiff(z_enc=_hex_ct(body["z"], self.pk)))
                self._send("PPCP_M2", body={
                    "sub_id": body["sub_id"],
                    "bits": [_ct_hex(c) for c in m2.bit_encs],
                    "z_high": _ct_hex(m2.z_high_enc)})
            elif mtype == "PPCP_M3":
                terms = tuple(_hex_ct(h, self.pk) for h in body["terms"])
                m4 = self._cmp.zero_flag(MaskedTerms(term_encs=terms))
                self._send("PPCP_M4", body={"sub_id": body["sub_id"],
                                            "flag": _ct_hex(m4.flag_enc)})
            elif mtype == "PPCP_M5":
                bit = self._cmp.reveal(
                    BlindedResult(masked_enc=_hex_ct(body["masked"], self.pk)))
                self._send("PPCP_RESULT", body={"sub_id": body["sub_id"], "bit": bit})
            elif mtype == "DECISION":
                return Decision(body["status"])
            elif mtype == "ERROR":
                self._raise_remote(body)
            else:
                raise MalformedPayload(f"unexpected message type {mtype!r}")

    # -- plumbing -----------------------------------------------------------------

    def _send(self, mtype: str, body: dict[str, Any] | None = None) -> None:
        self._seq += 1
        self.channel.send({"type": mtype, "user_id": self.user_id,
                           "session_id": self._session_id, "seq": self._seq,
                           "body": body or {}})

    def _recv_expect(self, mtype: str) -> dict[str, Any]:
        msg = self.channel.recv()
        if msg.get("type") == "ERROR":
            self._raise_remote(msg.get("body", {}))
        if msg.get("type") != mtype:
            raise MalformedPayload(f"expected {mtype}, got {msg.get('type')!r}")
        return msg

    def _raise_remote(self, body: dict[str, Any]) -> None:
        code = body.get("code", "PpkdaError")
        detail = body.get("detail", "")
        exc_type = getattr(errors, code, PpkdaError)
        if not (isinstance(exc_type, type) and issubclass(exc_type, PpkdaError)):
            exc_type = PpkdaError
        raise exc_type(detail)
