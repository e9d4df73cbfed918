"""Honest-device protocol engine.

Implements the two pairing flows (BLE-native with in-band cross-transport
derivation, and BT with the derivation negotiated over tunneled frames on
the encrypted link), association negotiation, and session establishment.

Key-store writes are transactional per pairing run: every prospective
record gets its policy verdict first, and nothing is committed unless all
of them pass, so an aborted pairing leaves both bond tables untouched.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

from .crypto import (
    Address,
    Key128,
    Nonce,
    SharedSecret,
    TRANSPORT_BLE,
    TRANSPORT_BT,
    TRANSPORTS,
    aes_cmac,
    ctkd_ble_to_bt,
    ctkd_bt_to_ble,
    dh_generate,
    dh_public_bytes,
    dh_shared,
    kdf_bt,
    kdf_le,
    random_nonce,
    session_key,
)
from .device import (
    Association,
    Device,
    DeviceProfile,
    KeyOrigin,
    KeyRecord,
    PairingRole,
)
from .policies import PolicySet, RejectionReason, c2_check, c4_check
from .smp import (
    CONFIRM_CAPABLE,
    AuthReqBits,
    IoCapability,
    KeyDistBits,
    MARKER_BLE_NATIVE,
    MARKER_BT_TUNNELED,
    OPCODE_REQUEST,
    SmpPairingMessage,
    TunnelFrame,
    ctkd_requested,
    encode_bt_auth_req,
    encode_pairing,
    hexdump,
)
from .trace import (
    KIND_KEY_REJECTED,
    KIND_KEY_STORED,
    KIND_MSG_RECEIVED,
    KIND_MSG_SENT,
    KIND_POLICY_VERDICT,
    KIND_SESSION_FAIL,
    KIND_SESSION_OK,
    TraceRecorder,
)


@dataclass
class SimContext:
    """Shared deterministic state for one simulation run."""

    rng: random.Random
    trace: TraceRecorder = field(default_factory=TraceRecorder)
    dh_backend: str = "toy-modp"

    @classmethod
    def seeded(cls, seed: int) -> "SimContext":
        return cls(rng=random.Random(seed))


def make_device(ctx: SimContext, profile: DeviceProfile, policies: Optional[PolicySet] = None) -> Device:
    return Device(profile, policies if policies is not None else PolicySet(), ctx.rng)


class PairingState(IntEnum):
    IDLE = 0
    REQUESTED = 1
    RESPONDED = 2
    KEYS_COMPUTED = 3
    CTKD_DONE = 4
    DISTRIBUTING = 5
    COMPLETE = 6
    ABORTED = 7


@dataclass
class Negotiated:
    association: Optional[Association] = None
    sc: bool = False
    ctkd: bool = False
    h7: bool = False
    key_strength: int = 16


@dataclass
class PairingSession:
    initiator: Address
    responder: Address
    transport: str
    state: PairingState = PairingState.IDLE
    negotiated: Negotiated = field(default_factory=Negotiated)
    nonces: Optional[tuple[Nonce, Nonce]] = None
    dh: Optional[tuple] = None  # (PK_i, PK_r, DK)
    abort_reason: Optional[RejectionReason] = None
    transcript: list[int] = field(default_factory=list)

    def advance(self, new_state: PairingState) -> None:
        if self.state is PairingState.ABORTED:
            raise ValueError("aborted pairing session is terminal")
        if new_state is not PairingState.ABORTED and new_state <= self.state:
            raise ValueError(f"cannot move from {self.state.name} to {new_state.name}")
        self.state = new_state

    def abort(self, reason: RejectionReason) -> None:
        self.abort_reason = reason
        self.advance(PairingState.ABORTED)

    @property
    def complete(self) -> bool:
        return self.state is PairingState.COMPLETE

    @property
    def aborted(self) -> bool:
        return self.state is PairingState.ABORTED


@dataclass
class SessionState:
    peers: tuple[Address, Address]
    transport: str
    session_key: Key128
    live: bool = True


SESSION_OK = "ok"
SESSION_KEY_MISMATCH = "key_mismatch"
SESSION_NO_BOND = "no_bond"


@dataclass
class SessionResult:
    outcome: str
    session: Optional[SessionState] = None

    @property
    def ok(self) -> bool:
        return self.outcome == SESSION_OK


def negotiate_association(
    io_i: IoCapability,
    io_r: IoCapability,
    mitm_i: bool,
    mitm_r: bool,
) -> Association:
    """Numeric Comparison only when both ends can confirm and both ask for MITM.

    Nothing authenticates this negotiation: either side may simply claim to
    have no input/output and force Just Works.
    """
    if io_i in CONFIRM_CAPABLE and io_r in CONFIRM_CAPABLE and mitm_i and mitm_r:
        return Association.NUMERIC_COMPARISON
    return Association.JUST_WORKS


def build_pairing_request(profile: DeviceProfile, ctkd: bool = True) -> SmpPairingMessage:
    """The pairing request an honest device with this profile sends."""
    auth = AuthReqBits(
        bonding=1,
        mitm=profile.wants_mitm,
        sc=profile.sc_supported,
        keypress=False,
        ct2_h7=profile.h7_supported,
    )
    dist = KeyDistBits(
        enc_key=True,
        id_key=True,
        sign_key=True,
        link_key=profile.ctkd_supported and ctkd,
    )
    return SmpPairingMessage(
        opcode=OPCODE_REQUEST,
        io_capability=profile.io_capability,
        oob=False,
        auth_req=auth,
        max_key_size=profile.max_key_size,
        initiator_dist=dist,
        responder_dist=dist,
    )


def build_pairing_response(profile: DeviceProfile, request: SmpPairingMessage) -> SmpPairingMessage:
    """Honest response: own capabilities, distribution masked by the request."""
    auth = AuthReqBits(
        bonding=1,
        mitm=profile.wants_mitm,
        sc=profile.sc_supported,
        keypress=False,
        ct2_h7=profile.h7_supported,
    )
    link = profile.ctkd_supported and ctkd_requested(request)
    return request.as_response(
        io_capability=profile.io_capability,
        auth_req=auth,
        max_key_size=profile.max_key_size,
        initiator_dist=replace(request.initiator_dist, link_key=link),
        responder_dist=replace(request.responder_dist, link_key=link),
    )


def numeric_comparison_value(pk_i, pk_r, n_i: Nonce, n_r: Nonce) -> int:
    """Deterministic 6-digit commitment both screens would display."""
    data = dh_public_bytes(pk_i) + dh_public_bytes(pk_r) + n_r.value
    return int.from_bytes(aes_cmac(n_i.value, data)[:4], "big") % 1_000_000


# ---------------------------------------------------------------------------
# Trace helpers
# ---------------------------------------------------------------------------

def _emit_message(
    ctx: SimContext,
    session: PairingSession,
    sender: Device,
    receiver: Device,
    transport: str,
    frame: bytes,
    opcode: str,
    tunneled: bool = False,
    **extra,
) -> None:
    payload = {
        "transport": transport,
        "peer": str(receiver.address),
        "frame": hexdump(frame),
        "opcode": opcode,
        "tunneled": tunneled,
        **extra,
    }
    sent = ctx.trace.emit(sender.address, KIND_MSG_SENT, **payload)
    payload_recv = dict(payload, peer=str(sender.address))
    ctx.trace.emit(receiver.address, KIND_MSG_RECEIVED, **payload_recv)
    session.transcript.extend([sent.index, sent.index + 1])
    sender.note_activity(transport, ctx.trace.clock)
    receiver.note_activity(transport, ctx.trace.clock)


def _emit_verdict(ctx, device: Device, *, stage, transport, peer, allow, reason, origin=None):
    ctx.trace.emit(
        device.address,
        KIND_POLICY_VERDICT,
        stage=stage,
        transport=transport,
        peer=str(peer),
        allow=allow,
        reason=None if reason is None else reason.value,
        origin=origin,
    )


def _record_payload(record: KeyRecord, overwrote: bool) -> dict:
    payload = {
        "transport": record.transport,
        "peer": str(record.peer),
        "origin": record.origin.value,
        "association": record.association.value,
        "role": record.role_at_pairing.value,
        "strength": record.key.strength,
        "mitm_protected": record.key.mitm_protected,
        "key": record.key.hex(),
        "overwrote": overwrote,
    }
    if record.extra_keys is not None:
        payload["extra_keys"] = {
            "csrk": record.extra_keys.csrk.hex(),
            "irk": record.extra_keys.irk.hex(),
        }
    return payload


def _invalidate_sessions(device: Device, peer: Address, transport: str) -> None:
    # A replaced bond kills any session that was running on it; the session
    # object is shared with the peer, so both ends observe the drop.
    for state in device.live_sessions(transport, peer):
        state.live = False


# ---------------------------------------------------------------------------
# Early (pre-key) policy checks
# ---------------------------------------------------------------------------

def _early_c4(ctx, session, device: Device, peer: Address, association: Association) -> bool:
    """Association monotonicity is checked before any key work happens."""
    if not device.policies.c4_association_monotonic:
        return True
    for transport in TRANSPORTS:
        verdict = c4_check(device.bonds.lookup(peer, transport), association)
        if not verdict.allow:
            _emit_verdict(
                ctx, device, stage="association", transport=session.transport,
                peer=peer, allow=False, reason=verdict.reason,
            )
            session.abort(verdict.reason)
            return False
    return True


def _early_c2(ctx, session, device: Device, peer: Address, peer_role: PairingRole) -> bool:
    """Role binding aborts the pairing at the request, before any key work."""
    if not device.policies.c2_role_binding:
        return True
    for transport in TRANSPORTS:
        verdict = c2_check(device.bonds.lookup(peer, transport), peer_role, session.transport)
        if not verdict.allow:
            _emit_verdict(
                ctx, device, stage="pairing_request", transport=session.transport,
                peer=peer, allow=False, reason=verdict.reason,
            )
            session.abort(verdict.reason)
            return False
    return True


def _abort_not_pairable(ctx, session, responder: Device, initiator: Device) -> None:
    _emit_verdict(
        ctx, responder, stage="pairing_request", transport=session.transport,
        peer=initiator.address, allow=False, reason=RejectionReason.NOT_PAIRABLE,
    )
    session.abort(RejectionReason.NOT_PAIRABLE)


# ---------------------------------------------------------------------------
# Transactional key storage
# ---------------------------------------------------------------------------

@dataclass
class _PendingStore:
    device: Device
    record: KeyRecord
    ctkd_source: Optional[KeyRecord] = None
    prior_direct: Optional[KeyRecord] = None


def _store_all(ctx: SimContext, session: PairingSession, pending: list[_PendingStore]) -> bool:
    """Evaluate every store first; commit only if all verdicts allow."""
    verdicts = []
    for p in pending:
        verdict = p.device.bonds.evaluate_store(
            p.record,
            p.device.policies,
            ctkd_source=p.ctkd_source,
            prior_direct=p.prior_direct,
            bt_version=p.device.profile.bt_version,
        )
        _emit_verdict(
            ctx, p.device, stage="store", transport=p.record.transport,
            peer=p.record.peer, allow=verdict.allow, reason=verdict.reason,
            origin=p.record.origin.value,
        )
        verdicts.append(verdict)
        if not verdict.allow:
            ctx.trace.emit(
                p.device.address,
                KIND_KEY_REJECTED,
                transport=p.record.transport,
                peer=str(p.record.peer),
                origin=p.record.origin.value,
                reason=verdict.reason.value,
            )
            session.abort(verdict.reason)
            return False
    for p in pending:
        outcome = p.device.bonds.commit(p.record)
        ctx.trace.emit(p.device.address, KIND_KEY_STORED, **_record_payload(p.record, outcome.overwrote))
        if outcome.overwrote:
            _invalidate_sessions(p.device, p.record.peer, p.record.transport)
    return True


def _pending_for(
    device: Device,
    peer: Address,
    peer_role: PairingRole,
    direct: KeyRecord,
    derived: Optional[KeyRecord],
) -> list[_PendingStore]:
    prior_direct = device.bonds.lookup(peer, direct.transport)
    pending = [_PendingStore(device, direct)]
    if derived is not None:
        pending.append(_PendingStore(device, derived, ctkd_source=direct, prior_direct=prior_direct))
    return pending


# ---------------------------------------------------------------------------
# BLE pairing (derivation negotiated in-band)
# ---------------------------------------------------------------------------

def ble_pair(
    ctx: SimContext,
    initiator: Device,
    responder: Device,
    request: Optional[SmpPairingMessage] = None,
) -> PairingSession:
    """Run BLE pairing, deriving the BT key as well when both ends agree.

    The initiator's address is whatever its profile claims; nothing below
    authenticates it.
    """
    if request is None:
        request = build_pairing_request(initiator.profile)
    session = PairingSession(initiator.address, responder.address, TRANSPORT_BLE)

    _emit_message(ctx, session, initiator, responder, TRANSPORT_BLE, encode_pairing(request), "request")
    session.advance(PairingState.REQUESTED)

    if not responder.is_pairable(TRANSPORT_BLE):
        _abort_not_pairable(ctx, session, responder, initiator)
        return session

    response = build_pairing_response(responder.profile, request)
    _emit_message(ctx, session, responder, initiator, TRANSPORT_BLE, encode_pairing(response), "response")
    session.advance(PairingState.RESPONDED)

    neg = session.negotiated
    neg.sc = request.auth_req.sc and response.auth_req.sc
    neg.ctkd = ctkd_requested(request) and ctkd_requested(response)
    neg.h7 = request.auth_req.ct2_h7 and response.auth_req.ct2_h7
    neg.key_strength = min(request.max_key_size, response.max_key_size)
    neg.association = negotiate_association(
        request.io_capability, response.io_capability,
        request.auth_req.mitm, response.auth_req.mitm,
    )

    # The BLE initiator is the central, i.e. the master-side role.
    if not _early_c2(ctx, session, responder, initiator.address, PairingRole.MASTER):
        return session
    if not _early_c2(ctx, session, initiator, responder.address, PairingRole.SLAVE):
        return session
    if not _early_c4(ctx, session, responder, initiator.address, neg.association):
        return session
    if not _early_c4(ctx, session, initiator, responder.address, neg.association):
        return session

    kp_i = dh_generate(ctx.rng, ctx.dh_backend)
    kp_r = dh_generate(ctx.rng, ctx.dh_backend)
    n_i = random_nonce(ctx.rng, initiator.address)
    n_r = random_nonce(ctx.rng, responder.address)
    dk = dh_shared(kp_i.private, kp_r.public)
    session.nonces = (n_i, n_r)
    session.dh = (kp_i.public, kp_r.public, dk)

    if neg.association is Association.NUMERIC_COMPARISON:
        # Honest users confirm when both screens show the same value; in a
        # lossless simulation they always do.
        shown_i = numeric_comparison_value(kp_i.public, kp_r.public, n_i, n_r)
        shown_r = numeric_comparison_value(kp_i.public, kp_r.public, n_i, n_r)
        if shown_i != shown_r:
            session.abort(RejectionReason.C4_ASSOCIATION_DOWNGRADE)
            return session

    k_ble = kdf_le(dk, initiator.address, responder.address, n_i, n_r, neg.key_strength)
    if neg.association is Association.NUMERIC_COMPARISON:
        k_ble = replace(k_ble, mitm_protected=True)
    session.advance(PairingState.KEYS_COMPUTED)

    k_bt = None
    if neg.ctkd:
        k_bt = ctkd_ble_to_bt(k_ble, neg.h7)
        session.advance(PairingState.CTKD_DONE)

    session.advance(PairingState.DISTRIBUTING)
    # CSRK/IRK travel over the now-encrypted BLE link, both directions.
    for sender, receiver in ((initiator, responder), (responder, initiator)):
        material = sender.key_material()
        frame = material.csrk.value + material.irk.value
        _emit_message(ctx, session, sender, receiver, TRANSPORT_BLE, frame, "key_material")

    pending: list[_PendingStore] = []
    for device, peer_dev, peer_role in (
        (responder, initiator, PairingRole.MASTER),
        (initiator, responder, PairingRole.SLAVE),
    ):
        direct = KeyRecord(
            peer=peer_dev.address,
            transport=TRANSPORT_BLE,
            key=k_ble,
            origin=KeyOrigin.DIRECT_PAIRING,
            association=neg.association,
            role_at_pairing=peer_role,
            extra_keys=peer_dev.key_material(),
        )
        derived = None
        if k_bt is not None:
            derived = KeyRecord(
                peer=peer_dev.address,
                transport=TRANSPORT_BT,
                key=k_bt,
                origin=KeyOrigin.CTKD_DERIVED,
                association=neg.association,
                role_at_pairing=peer_role,
            )
        pending.extend(_pending_for(device, peer_dev.address, peer_role, direct, derived))

    if not _store_all(ctx, session, pending):
        return session
    session.advance(PairingState.COMPLETE)
    return session


# ---------------------------------------------------------------------------
# BT pairing (derivation negotiated over tunneled frames)
# ---------------------------------------------------------------------------

def build_bt_pairing_request(profile: DeviceProfile) -> SmpPairingMessage:
    """BT-native pairing request: no key-distribution flags, no CT2 bit.

    Cross-transport derivation cannot be asked for here; that happens in the
    tunneled exchange after the link is encrypted.
    """
    auth = AuthReqBits(bonding=1, mitm=profile.wants_mitm, sc=profile.sc_supported)
    empty = KeyDistBits()
    return SmpPairingMessage(
        opcode=OPCODE_REQUEST,
        io_capability=profile.io_capability,
        oob=False,
        auth_req=auth,
        max_key_size=16,
        initiator_dist=empty,
        responder_dist=empty,
    )


def accept_tunnel_frame(device: Device, frame: TunnelFrame, session_encrypted: bool) -> bool:
    """Tunneled CTKD frames are only meaningful on an encrypted BT link."""
    if frame.marker != MARKER_BT_TUNNELED:
        return True
    return session_encrypted


def bt_pair(
    ctx: SimContext,
    initiator: Device,
    responder: Device,
    request: Optional[SmpPairingMessage] = None,
    want_ctkd: bool = True,
) -> PairingSession:
    """Run BT pairing; CTKD rides on tunneled frames over the encrypted link.

    The initiator always shows up in the master role: the transport allows
    switching roles right before a pairing request.
    """
    if request is None:
        request = build_bt_pairing_request(initiator.profile)
    session = PairingSession(initiator.address, responder.address, TRANSPORT_BT)

    _emit_message(
        ctx, session, initiator, responder, TRANSPORT_BT, encode_pairing(request), "request",
        bt_auth_req=f"0x{encode_bt_auth_req(True, request.auth_req.mitm):02x}",
    )
    session.advance(PairingState.REQUESTED)

    if not responder.is_pairable(TRANSPORT_BT):
        _abort_not_pairable(ctx, session, responder, initiator)
        return session

    if not _early_c2(ctx, session, responder, initiator.address, PairingRole.MASTER):
        return session
    if not _early_c2(ctx, session, initiator, responder.address, PairingRole.SLAVE):
        return session

    response = build_bt_pairing_request(responder.profile).as_response()
    _emit_message(
        ctx, session, responder, initiator, TRANSPORT_BT, encode_pairing(response), "response",
        bt_auth_req=f"0x{encode_bt_auth_req(True, response.auth_req.mitm):02x}",
    )
    session.advance(PairingState.RESPONDED)

    neg = session.negotiated
    neg.sc = request.auth_req.sc and response.auth_req.sc
    neg.key_strength = 16
    neg.association = negotiate_association(
        request.io_capability, response.io_capability,
        request.auth_req.mitm, response.auth_req.mitm,
    )

    if not _early_c4(ctx, session, responder, initiator.address, neg.association):
        return session
    if not _early_c4(ctx, session, initiator, responder.address, neg.association):
        return session

    kp_i = dh_generate(ctx.rng, ctx.dh_backend)
    kp_r = dh_generate(ctx.rng, ctx.dh_backend)
    n_i = random_nonce(ctx.rng, initiator.address)
    n_r = random_nonce(ctx.rng, responder.address)
    dk = dh_shared(kp_i.private, kp_r.public)
    session.nonces = (n_i, n_r)
    session.dh = (kp_i.public, kp_r.public, dk)

    if neg.association is Association.NUMERIC_COMPARISON:
        shown = numeric_comparison_value(kp_i.public, kp_r.public, n_i, n_r)
        if shown != numeric_comparison_value(kp_i.public, kp_r.public, n_i, n_r):
            session.abort(RejectionReason.C4_ASSOCIATION_DOWNGRADE)
            return session

    k_bt = kdf_bt(dk, initiator.address, responder.address, n_i, n_r)
    if neg.association is Association.NUMERIC_COMPARISON:
        k_bt = replace(k_bt, mitm_protected=True)
    session.advance(PairingState.KEYS_COMPUTED)

    # Link is encrypted from here on; CTKD negotiation frames are BLE-style
    # pairing messages tunneled over it, carrying the CT2 bit and key material.
    encrypted = True
    k_ble = None
    material_exchanged = False
    if want_ctkd and initiator.profile.ctkd_supported:
        tunnel_req = build_pairing_request(initiator.profile)
        if not accept_tunnel_frame(responder, TunnelFrame(MARKER_BT_TUNNELED, tunnel_req), encrypted):
            raise AssertionError("tunnel frame outside an encrypted session")
        _emit_message(
            ctx, session, initiator, responder, TRANSPORT_BT,
            encode_pairing(tunnel_req), "request", tunneled=True,
        )
        tunnel_resp = build_pairing_response(responder.profile, tunnel_req)
        _emit_message(
            ctx, session, responder, initiator, TRANSPORT_BT,
            encode_pairing(tunnel_resp), "response", tunneled=True,
        )
        neg.ctkd = ctkd_requested(tunnel_req) and ctkd_requested(tunnel_resp)
        neg.h7 = tunnel_req.auth_req.ct2_h7 and tunnel_resp.auth_req.ct2_h7
        if neg.ctkd:
            # BLE key material (CSRK/IRK) rides in the same tunneled exchange.
            for sender, receiver in ((initiator, responder), (responder, initiator)):
                material = sender.key_material()
                frame = material.csrk.value + material.irk.value
                _emit_message(
                    ctx, session, sender, receiver, TRANSPORT_BT, frame,
                    "key_material", tunneled=True,
                )
            material_exchanged = True
            k_ble = ctkd_bt_to_ble(k_bt, neg.h7)
            session.advance(PairingState.CTKD_DONE)

    session.advance(PairingState.DISTRIBUTING)
    pending: list[_PendingStore] = []
    for device, peer_dev, peer_role in (
        (responder, initiator, PairingRole.MASTER),
        (initiator, responder, PairingRole.SLAVE),
    ):
        direct = KeyRecord(
            peer=peer_dev.address,
            transport=TRANSPORT_BT,
            key=k_bt,
            origin=KeyOrigin.DIRECT_PAIRING,
            association=neg.association,
            role_at_pairing=peer_role,
        )
        derived = None
        if k_ble is not None:
            derived = KeyRecord(
                peer=peer_dev.address,
                transport=TRANSPORT_BLE,
                key=k_ble,
                origin=KeyOrigin.CTKD_DERIVED,
                association=neg.association,
                role_at_pairing=peer_role,
                extra_keys=peer_dev.key_material() if material_exchanged else None,
            )
        pending.extend(_pending_for(device, peer_dev.address, peer_role, direct, derived))

    if not _store_all(ctx, session, pending):
        return session
    session.advance(PairingState.COMPLETE)
    return session


# ---------------------------------------------------------------------------
# Session establishment
# ---------------------------------------------------------------------------

def establish_session(
    ctx: SimContext,
    a: Device,
    b: Device,
    transport: str,
    entropy_proposal: int = 16,
) -> SessionResult:
    """Bring up a secure session; failure is a modeled outcome, not an error.

    Succeeds only when both bond tables hold byte-identical keys for the
    peer on this transport. BT may negotiate the session-key entropy down,
    BLE always inherits the pairing key's strength.
    """
    rec_a = a.bonds.lookup(b.address, transport)
    rec_b = b.bonds.lookup(a.address, transport)
    if rec_a is None or rec_b is None:
        ctx.trace.emit(
            a.address, KIND_SESSION_FAIL,
            transport=transport, peer=str(b.address), reason=SESSION_NO_BOND,
        )
        return SessionResult(SESSION_NO_BOND)
    if rec_a.key.value != rec_b.key.value:
        ctx.trace.emit(
            a.address, KIND_SESSION_FAIL,
            transport=transport, peer=str(b.address), reason=SESSION_KEY_MISMATCH,
        )
        return SessionResult(SESSION_KEY_MISMATCH)

    entropy = rec_a.key.strength if transport == TRANSPORT_BLE else entropy_proposal
    n_a = random_nonce(ctx.rng, a.address)
    n_b = random_nonce(ctx.rng, b.address)
    sk = session_key(transport, rec_a.key, n_a, n_b, entropy)
    state = SessionState(peers=(a.address, b.address), transport=transport, session_key=sk)
    a.sessions.append(state)
    b.sessions.append(state)
    ctx.trace.emit(
        a.address, KIND_SESSION_OK,
        transport=transport, peer=str(b.address), entropy=entropy,
    )
    a.note_activity(transport, ctx.trace.clock)
    b.note_activity(transport, ctx.trace.clock)
    return SessionResult(SESSION_OK, state)
