"""Pluggable defense policies evaluated on pairing steps and key-store writes.

``sig51_check`` models the standard's key-overwrite rule (no overwrite by a
key that is weaker in strength or MITM protection). The four countermeasures:

* C1 auto-disables pairability on idle transports,
* C2 binds the pairing role per peer and aborts on a mismatch,
* C3 blocks cross-transport key writes onto an already-keyed transport and
  refuses derivation from a weaker re-pairing key,
* C4 never lets the association method weaken across re-pairings.

All checks are pure; ``evaluate`` is the conjunction of whatever is enabled.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .crypto import TRANSPORTS
from .device import (
    Association,
    BondTable,
    KeyOrigin,
    KeyRecord,
    PairingRole,
    StoreContext,
    version_at_least,
)

if TYPE_CHECKING:
    from .device import Device


class RejectionReason(Enum):
    MITM_DOWNGRADE = "mitm_downgrade"
    STRENGTH_DOWNGRADE = "strength_downgrade"
    C3_OVERWRITE_BLOCK = "c3_overwrite_block"
    C3_WEAK_INPUT_BLOCK = "c3_weak_input_block"
    C2_ROLE_MISMATCH = "c2_role_mismatch"
    C4_ASSOCIATION_DOWNGRADE = "c4_association_downgrade"
    NOT_PAIRABLE = "not_pairable"


@dataclass(frozen=True)
class PolicyVerdict:
    allow: bool
    reason: Optional[RejectionReason] = None

    def __post_init__(self) -> None:
        if not self.allow and self.reason is None:
            raise ValueError("a rejecting verdict needs a reason")


ALLOW = PolicyVerdict(True)


@dataclass(frozen=True)
class PolicySet:
    """Independent defense toggles; the baseline is everything off."""

    sig51_rule: bool = False
    # Scenario knob: apply the overwrite rule only to devices >= 5.1, the
    # narrow reading of the standard's version-specific wording.
    sig51_version_gated: bool = False
    c1_auto_pairable: bool = False
    c1_idle_threshold: int = 10
    c2_role_binding: bool = False
    c3_no_cross_overwrite: bool = False
    c4_association_monotonic: bool = False

    @classmethod
    def from_dict(cls, raw: dict, where: str = "policies") -> "PolicySet":
        data = dict(raw)
        kwargs = {}
        for name in (
            "sig51_rule", "sig51_version_gated", "c1_auto_pairable",
            "c1_idle_threshold", "c2_role_binding", "c3_no_cross_overwrite",
            "c4_association_monotonic",
        ):
            if name in data:
                kwargs[name] = data.pop(name)
        # Short aliases used by scenario files and the CLI --policies flag.
        for alias, name in (
            ("sig51", "sig51_rule"), ("c1", "c1_auto_pairable"),
            ("c2", "c2_role_binding"), ("c3", "c3_no_cross_overwrite"),
            ("c4", "c4_association_monotonic"),
        ):
            if alias in data:
                kwargs[name] = data.pop(alias)
        if data:
            raise ValueError(f"{where}: unknown policy field(s) {sorted(data)}")
        return cls(**kwargs)

    def enabled_names(self) -> list[str]:
        names = []
        if self.sig51_rule:
            names.append("sig51")
        if self.c1_auto_pairable:
            names.append("c1")
        if self.c2_role_binding:
            names.append("c2")
        if self.c3_no_cross_overwrite:
            names.append("c3")
        if self.c4_association_monotonic:
            names.append("c4")
        return names


def sig51_check(existing: Optional[KeyRecord], incoming: KeyRecord) -> PolicyVerdict:
    """Reject an overwrite by a key weaker in strength or MITM protection.

    Equal strength and protection passes: that is the whole gap the
    equal-protection overwrite attacks drive through.
    """
    if existing is None:
        return ALLOW
    if incoming.key.strength < existing.key.strength:
        return PolicyVerdict(False, RejectionReason.STRENGTH_DOWNGRADE)
    if existing.key.mitm_protected and not incoming.key.mitm_protected:
        return PolicyVerdict(False, RejectionReason.MITM_DOWNGRADE)
    return ALLOW


def c2_check(
    existing: Optional[KeyRecord],
    incoming_role: PairingRole,
    incoming_transport: str,
) -> PolicyVerdict:
    """Reject when a stored bond for the peer was made with a different role."""
    if existing is not None and existing.role_at_pairing != incoming_role:
        return PolicyVerdict(False, RejectionReason.C2_ROLE_MISMATCH)
    return ALLOW


def _weaker(candidate: KeyRecord, baseline: KeyRecord) -> bool:
    return (
        candidate.key.strength < baseline.key.strength
        or candidate.association.rank < baseline.association.rank
    )


def c3_check(
    table: BondTable,
    incoming: KeyRecord,
    ctkd_source: Optional[KeyRecord] = None,
    prior_direct: Optional[KeyRecord] = None,
) -> PolicyVerdict:
    """Gate cross-transport writes; direct (explicit) re-pairing stays allowed.

    A derived key may not land on a transport that already has a pairing key,
    and derivation is refused outright when the direct key feeding it is
    weaker than what that transport held before the run.
    """
    if incoming.origin is not KeyOrigin.CTKD_DERIVED:
        return ALLOW
    if table.lookup(incoming.peer, incoming.transport) is not None:
        return PolicyVerdict(False, RejectionReason.C3_OVERWRITE_BLOCK)
    if ctkd_source is not None and prior_direct is not None and _weaker(ctkd_source, prior_direct):
        return PolicyVerdict(False, RejectionReason.C3_WEAK_INPUT_BLOCK)
    return ALLOW


def c4_check(existing: Optional[KeyRecord], incoming_association: Association) -> PolicyVerdict:
    """Association strength may never go down relative to any stored bond."""
    if existing is not None and incoming_association.rank < existing.association.rank:
        return PolicyVerdict(False, RejectionReason.C4_ASSOCIATION_DOWNGRADE)
    return ALLOW


def evaluate(policy: PolicySet, context: StoreContext) -> PolicyVerdict:
    """Conjunction of the enabled store-time checks; first failure wins."""
    incoming = context.incoming
    if policy.sig51_rule:
        gated_out = policy.sig51_version_gated and context.bt_version is not None and not version_at_least(context.bt_version, "5.1")
        if not gated_out:
            verdict = sig51_check(context.existing, incoming)
            if not verdict.allow:
                return verdict
    if policy.c2_role_binding:
        for transport in TRANSPORTS:
            verdict = c2_check(
                context.table.lookup(incoming.peer, transport),
                incoming.role_at_pairing,
                incoming.transport,
            )
            if not verdict.allow:
                return verdict
    if policy.c3_no_cross_overwrite:
        verdict = c3_check(
            context.table,
            incoming,
            ctkd_source=context.ctkd_source,
            prior_direct=context.prior_direct,
        )
        if not verdict.allow:
            return verdict
    if policy.c4_association_monotonic:
        for transport in TRANSPORTS:
            verdict = c4_check(
                context.table.lookup(incoming.peer, transport),
                incoming.association,
            )
            if not verdict.allow:
                return verdict
    return ALLOW


def c1_tick(device: "Device", transport: str, event_clock: int) -> bool:
    """Auto-disable pairability on an idle, session-less transport.

    Returns True when this tick turned pairability off. Transports the user
    toggled manually are left alone.
    """
    policy = device.policies
    if not policy.c1_auto_pairable:
        return False
    if device.manually_set(transport):
        return False
    if not device.is_pairable(transport):
        return False
    if device.has_live_session(transport):
        return False
    if event_clock - device.last_activity[transport] >= policy.c1_idle_threshold:
        device.set_pairable(transport, False, manual=False)
        return True
    return False
