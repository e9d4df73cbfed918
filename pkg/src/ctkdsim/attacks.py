"""Scripted attacker agents driving the four cross-transport attacks.

Every attack goes through the exact same public pairing entry points an
honest device uses; agents never read a victim's private key, shared
secret, or bond table. The cross-transport issues a run exploited are
derived afterwards by inspecting the trace, not hardcoded, so asserting
them against :func:`cti_map` is a real check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

from .crypto import Address, TRANSPORT_BLE, TRANSPORT_BT, TRANSPORTS, random_address
from .device import Association, Device, DeviceProfile, PairingRole, RoleCaps
from .pairing import (
    PairingSession,
    SimContext,
    ble_pair,
    bt_pair,
    build_pairing_request,
    establish_session,
    make_device,
)
from .policies import RejectionReason
from .smp import IoCapability
from .trace import (
    KIND_KEY_STORED,
    KIND_MSG_RECEIVED,
    KIND_SESSION_OK,
    TraceEvent,
)

STRATEGY_MI = "mi"
STRATEGY_SI = "si"
STRATEGY_MITM = "mitm"
STRATEGY_US = "us"
STRATEGIES = (STRATEGY_MI, STRATEGY_SI, STRATEGY_MITM, STRATEGY_US)

RECONNECT_OK = "ok"
RECONNECT_KEY_MISMATCH = "key_mismatch"
RECONNECT_NOT_ATTEMPTED = "not_attempted"


class CTI(IntEnum):
    """The four cross-transport specification issues."""

    EXTENDED_PAIRING = 1
    ROLE_ASYMMETRY = 2
    KEY_TAMPERING = 3
    ASSOCIATION_MANIPULATION = 4


class Requirement(Enum):
    REQUIRED = "required"
    NOT_NEEDED = "not_needed"
    SOMETIMES = "sometimes"


_CTI_TABLE = {
    STRATEGY_MI: (Requirement.REQUIRED, Requirement.NOT_NEEDED, Requirement.REQUIRED, Requirement.SOMETIMES),
    STRATEGY_SI: (Requirement.REQUIRED, Requirement.REQUIRED, Requirement.REQUIRED, Requirement.SOMETIMES),
    STRATEGY_MITM: (Requirement.REQUIRED, Requirement.REQUIRED, Requirement.REQUIRED, Requirement.SOMETIMES),
    STRATEGY_US: (Requirement.REQUIRED, Requirement.SOMETIMES, Requirement.REQUIRED, Requirement.NOT_NEEDED),
}


def cti_map(strategy: str) -> dict[CTI, Requirement]:
    """Which issues a strategy needs: required / not needed / sometimes."""
    try:
        row = _CTI_TABLE[strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}") from None
    return dict(zip(CTI, row))


@dataclass(frozen=True)
class AttackerConfig:
    """What the attacker claims and whom it goes after.

    The claimed capability set is fixed by the playbook: no input/output
    (forcing Just Works), Secure Connections, cross-transport derivation,
    and the Link Key distribution flag. The attacker holds no victim key
    at the start of a run.
    """

    strategy: str
    target: Address
    spoofed: Optional[Address] = None  # victim identity to claim (mi/si/mitm)
    true_identity: Optional[Address] = None  # fresh identity for us
    name: str = "charlie"

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class AttackOutcome:
    succeeded: bool
    keys_written: list[tuple[str, str, str]] = field(default_factory=list)
    overwrote_existing: bool = False
    victim_reconnect: str = RECONNECT_NOT_ATTEMPTED
    ctis_used: frozenset[CTI] = frozenset()
    rejection: Optional[RejectionReason] = None

    def to_dict(self) -> dict:
        return {
            "succeeded": self.succeeded,
            "keys_written": [list(k) for k in self.keys_written],
            "overwrote_existing": self.overwrote_existing,
            "victim_reconnect": self.victim_reconnect,
            "ctis_used": sorted(int(c) for c in self.ctis_used),
            "rejection": None if self.rejection is None else self.rejection.value,
        }


def _attacker_device(ctx: SimContext, config: AttackerConfig, claimed: Address) -> Device:
    profile = DeviceProfile(
        address=claimed,
        name=config.name,
        bt_version="5.0",
        io_capability=IoCapability.NO_INPUT_NO_OUTPUT,
        sc_host=True,
        sc_controller=True,
        ctkd_supported=True,
        h7_supported=True,
        pairable_bt=True,
        pairable_ble=True,
        discoverable=True,
        role_caps=RoleCaps(True, True, True),
    )
    return make_device(ctx, profile)


# ---------------------------------------------------------------------------
# Trace inspection: which cross-transport issues actually fired
# ---------------------------------------------------------------------------

def derive_ctis(
    events: list[TraceEvent],
    *,
    targets: set[str],
    attacker_identities: set[str],
    attack_start: int,
) -> frozenset[CTI]:
    """Replay the trace and record which issue predicates fired.

    * extended pairing: the attack pairing landed on a transport where the
      target had no live session at that moment;
    * role asymmetry: a BT pairing request from the attacker arrived while
      the target's bond for that identity was made with the other role;
    * key tampering: the attack wrote a derived key into a victim's store;
    * association manipulation: the attack re-keyed a peer whose stored
      association was stronger than the one it negotiated.
    """
    fired: set[CTI] = set()
    # Rolling state: bonds[(owner, peer, transport)] -> payload of last store;
    # live session keys are (sorted peer pair, transport).
    bonds: dict[tuple[str, str, str], dict] = {}
    sessions: dict[tuple[tuple[str, str], str], bool] = {}

    for event in events:
        payload = event.payload
        in_window = event.index >= attack_start

        if event.kind == KIND_MSG_RECEIVED and not payload.get("tunneled", False):
            if (
                in_window
                and payload.get("opcode") == "request"
                and event.actor in targets
                and payload.get("peer") in attacker_identities
            ):
                transport = payload["transport"]
                target_live = any(
                    live and transport == t and event.actor in pair
                    for (pair, t), live in sessions.items()
                )
                if not target_live:
                    fired.add(CTI.EXTENDED_PAIRING)
                if transport == TRANSPORT_BT:
                    for t in TRANSPORTS:
                        stored = bonds.get((event.actor, payload["peer"], t))
                        if stored is not None and stored["role"] != PairingRole.MASTER.value:
                            fired.add(CTI.ROLE_ASYMMETRY)

        elif event.kind == KIND_SESSION_OK:
            pair = tuple(sorted((event.actor, payload["peer"])))
            sessions[(pair, payload["transport"])] = True

        elif event.kind == KIND_KEY_STORED:
            if in_window and event.actor in targets and payload["peer"] in attacker_identities:
                if payload["origin"] == "ctkd_derived":
                    fired.add(CTI.KEY_TAMPERING)
                if payload["association"] == Association.JUST_WORKS.value:
                    for t in TRANSPORTS:
                        prior = bonds.get((event.actor, payload["peer"], t))
                        if prior is not None and prior["association"] == Association.NUMERIC_COMPARISON.value:
                            fired.add(CTI.ASSOCIATION_MANIPULATION)
            if payload.get("overwrote"):
                pair = tuple(sorted((event.actor, payload["peer"])))
                sessions[(pair, payload["transport"])] = False
            bonds[(event.actor, payload["peer"], payload["transport"])] = payload

    return frozenset(fired)


def _keys_written(events: list[TraceEvent], victims: set[str], since: int) -> tuple[list, bool]:
    written = []
    overwrote = False
    for event in events[since:]:
        if event.kind == KIND_KEY_STORED and event.actor in victims:
            written.append((event.actor, event.payload["transport"], event.payload["origin"]))
            overwrote = overwrote or bool(event.payload.get("overwrote"))
    return written, overwrote


def _victim_reconnect(ctx: SimContext, victim: Device, peer: Device) -> str:
    """The impersonated device tries to come back; BT first, then BLE."""
    for transport in (TRANSPORT_BT, TRANSPORT_BLE):
        if victim.bonds.lookup(peer.address, transport) is not None:
            result = establish_session(ctx, victim, peer, transport)
            return result.outcome
    return RECONNECT_NOT_ATTEMPTED


def _aborted_outcome(
    ctx: SimContext,
    session: PairingSession,
    targets: set[str],
    attacker_identities: set[str],
    start: int,
) -> AttackOutcome:
    return AttackOutcome(
        succeeded=False,
        victim_reconnect=RECONNECT_NOT_ATTEMPTED,
        ctis_used=derive_ctis(
            ctx.trace.events,
            targets=targets,
            attacker_identities=attacker_identities,
            attack_start=start,
        ),
        rejection=session.abort_reason,
    )


# ---------------------------------------------------------------------------
# The four attacks
# ---------------------------------------------------------------------------

def master_impersonation(
    ctx: SimContext,
    config: AttackerConfig,
    bob: Device,
    alice: Device,
) -> AttackOutcome:
    """Claim the master's identity over BLE and re-key the slave's store.

    One pairing run plants attacker keys for both transports in ``bob``'s
    table under ``alice``'s address; the real ``alice`` can no longer
    connect back.
    """
    start = ctx.trace.clock
    claimed = config.spoofed or alice.address
    charlie = _attacker_device(ctx, config, claimed)
    targets = {str(bob.address)}
    identities = {str(claimed)}

    session = ble_pair(ctx, charlie, bob, build_pairing_request(charlie.profile))
    if session.aborted:
        return _aborted_outcome(ctx, session, targets, identities, start)

    keys_written, overwrote = _keys_written(ctx.trace.events, targets, start)
    takeover_bt = establish_session(ctx, charlie, bob, TRANSPORT_BT)
    takeover_ble = establish_session(ctx, charlie, bob, TRANSPORT_BLE)
    reconnect = _victim_reconnect(ctx, alice, bob)
    return AttackOutcome(
        succeeded=session.complete and takeover_bt.ok and takeover_ble.ok,
        keys_written=keys_written,
        overwrote_existing=overwrote,
        victim_reconnect=reconnect,
        ctis_used=derive_ctis(
            ctx.trace.events, targets=targets,
            attacker_identities=identities, attack_start=start,
        ),
    )


def slave_impersonation(
    ctx: SimContext,
    config: AttackerConfig,
    alice: Device,
    bob: Device,
) -> AttackOutcome:
    """Claim the slave's identity over BT (after a role switch) and re-key
    the master's store; the derived key lands on BLE via the tunnel."""
    start = ctx.trace.clock
    claimed = config.spoofed or bob.address
    charlie = _attacker_device(ctx, config, claimed)
    targets = {str(alice.address)}
    identities = {str(claimed)}

    session = bt_pair(ctx, charlie, alice)
    if session.aborted:
        return _aborted_outcome(ctx, session, targets, identities, start)

    keys_written, overwrote = _keys_written(ctx.trace.events, targets, start)
    takeover_bt = establish_session(ctx, charlie, alice, TRANSPORT_BT)
    takeover_ble = establish_session(ctx, charlie, alice, TRANSPORT_BLE)
    reconnect = _victim_reconnect(ctx, bob, alice)
    return AttackOutcome(
        succeeded=session.complete and takeover_bt.ok and takeover_ble.ok,
        keys_written=keys_written,
        overwrote_existing=overwrote,
        victim_reconnect=reconnect,
        ctis_used=derive_ctis(
            ctx.trace.events, targets=targets,
            attacker_identities=identities, attack_start=start,
        ),
    )


def mitm(
    ctx: SimContext,
    config: AttackerConfig,
    alice: Device,
    bob: Device,
) -> AttackOutcome:
    """Sequential composition of the two impersonations.

    When the victims run a BLE session the slave leg goes first (over BT);
    otherwise the master leg opens. The second leg targets the victim the
    first one impersonated.
    """
    if alice.has_live_session(TRANSPORT_BLE, peer=bob.address):
        legs = ("si", "mi")
    else:
        legs = ("mi", "si")

    outcomes: list[AttackOutcome] = []
    for leg in legs:
        if leg == "si":
            cfg = AttackerConfig(STRATEGY_SI, target=alice.address, spoofed=bob.address, name=config.name)
            outcome = slave_impersonation(ctx, cfg, alice, bob)
        else:
            cfg = AttackerConfig(STRATEGY_MI, target=bob.address, spoofed=alice.address, name=config.name)
            outcome = master_impersonation(ctx, cfg, bob, alice)
        outcomes.append(outcome)
        if not outcome.succeeded:
            return AttackOutcome(
                succeeded=False,
                keys_written=[k for o in outcomes for k in o.keys_written],
                overwrote_existing=any(o.overwrote_existing for o in outcomes),
                victim_reconnect=RECONNECT_NOT_ATTEMPTED,
                ctis_used=frozenset().union(*(o.ctis_used for o in outcomes)),
                rejection=outcome.rejection,
            )

    reconnect = _victim_reconnect(ctx, alice, bob)
    return AttackOutcome(
        succeeded=True,
        keys_written=[k for o in outcomes for k in o.keys_written],
        overwrote_existing=any(o.overwrote_existing for o in outcomes),
        victim_reconnect=reconnect,
        ctis_used=frozenset().union(*(o.ctis_used for o in outcomes)),
    )


def unintended_session(
    ctx: SimContext,
    config: AttackerConfig,
    victim: Device,
    bonded_peer: Optional[Device] = None,
) -> AttackOutcome:
    """Silently bond with the victim as a fresh random device.

    One pairing on the currently unused transport yields keys for both, the
    victim's existing bonds stay byte-identical, and the attacker walks away
    with the victim's distributed identity keys (CSRK/IRK).
    """
    start = ctx.trace.clock
    fresh = config.true_identity or random_address(ctx.rng)
    charlie = _attacker_device(ctx, config, fresh)
    targets = {str(victim.address)}
    identities = {str(fresh)}

    if victim.has_live_session(TRANSPORT_BLE):
        transport = TRANSPORT_BT
    else:
        transport = TRANSPORT_BLE

    before = victim.bonds.snapshot()
    if transport == TRANSPORT_BLE:
        session = ble_pair(ctx, charlie, victim, build_pairing_request(charlie.profile))
    else:
        session = bt_pair(ctx, charlie, victim)
    if session.aborted:
        return _aborted_outcome(ctx, session, targets, identities, start)

    untouched = all(victim.bonds.records.get(k) == v for k, v in before.items())
    record_ble = charlie.bonds.lookup(victim.address, TRANSPORT_BLE)
    got_identity_keys = (
        record_ble is not None
        and record_ble.extra_keys is not None
        and record_ble.extra_keys.csrk.value == victim.csrk.value
        and record_ble.extra_keys.irk.value == victim.irk.value
    )

    keys_written, overwrote = _keys_written(ctx.trace.events, targets, start)
    bond_bt = establish_session(ctx, charlie, victim, TRANSPORT_BT)
    bond_ble = establish_session(ctx, charlie, victim, TRANSPORT_BLE)

    reconnect = RECONNECT_NOT_ATTEMPTED
    if bonded_peer is not None:
        reconnect = _victim_reconnect(ctx, victim, bonded_peer)

    return AttackOutcome(
        succeeded=(
            session.complete and bond_bt.ok and bond_ble.ok
            and untouched and got_identity_keys
        ),
        keys_written=keys_written,
        overwrote_existing=overwrote,
        victim_reconnect=reconnect,
        ctis_used=derive_ctis(
            ctx.trace.events, targets=targets,
            attacker_identities=identities, attack_start=start,
        ),
    )
