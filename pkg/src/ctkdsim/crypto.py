"""Key material and key-derivation primitives for the simulator.

Implements the cross-transport conversion of pairing keys between the two
Bluetooth transports (an AES-CMAC chain with fixed 4-byte tags), plus
model-level stand-ins for the per-transport pairing-key and session-key
derivations. The pairing/session KDFs are deliberately not the standard's
f5/E3 constructions: they are deterministic, collision-resistant domain
separated CMAC chains, which is all the protocol-level attacks need.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers.algorithms import AES
from cryptography.hazmat.primitives.cmac import CMAC

MIN_STRENGTH = 7
MAX_STRENGTH = 16

#: Transports are plain strings everywhere ("BT" / "BLE"); a two-element
#: tuple keeps validation trivial without an enum import dance.
TRANSPORT_BT = "BT"
TRANSPORT_BLE = "BLE"
TRANSPORTS = (TRANSPORT_BT, TRANSPORT_BLE)


def other_transport(transport: str) -> str:
    if transport == TRANSPORT_BT:
        return TRANSPORT_BLE
    if transport == TRANSPORT_BLE:
        return TRANSPORT_BT
    raise ValueError(f"unknown transport {transport!r}")


class BackendMismatchError(ValueError):
    """Raised when a DH private and public value come from different groups."""


@dataclass(frozen=True, order=True)
class Address:
    """6-byte device identifier, shared by both transports on a dual-mode device."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 6:
            raise ValueError("address must be 6 bytes")

    @classmethod
    def parse(cls, text: str) -> "Address":
        parts = text.split(":")
        if len(parts) != 6:
            raise ValueError(f"bad address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.value)


@dataclass(frozen=True)
class Key128:
    """16-byte key with a declared entropy (in bytes) and MITM-protection flag."""

    value: bytes
    strength: int = MAX_STRENGTH
    mitm_protected: bool = False

    def __post_init__(self) -> None:
        if len(self.value) != 16:
            raise ValueError("key must be 16 bytes")
        if not MIN_STRENGTH <= self.strength <= MAX_STRENGTH:
            raise ValueError(f"strength {self.strength} outside {MIN_STRENGTH}..{MAX_STRENGTH}")

    @classmethod
    def from_hex(cls, text: str, strength: int = MAX_STRENGTH, mitm_protected: bool = False) -> "Key128":
        return cls(bytes.fromhex(text), strength, mitm_protected)

    def hex(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class TagString:
    """One of the four fixed 4-character conversion tags.

    When a tag is used as a MAC key it is expanded to a 16-byte salt with
    the ASCII bytes in the low positions; when used as a MAC message it is
    the bare 4 ASCII bytes. Both encodings come from this one table.
    """

    ascii: str

    def __post_init__(self) -> None:
        if self.ascii not in ("tmp1", "tmp2", "lebr", "brle"):
            raise ValueError(f"unknown tag {self.ascii!r}")

    @property
    def salt_encoding(self) -> bytes:
        return bytes(12) + self.ascii.encode("ascii")

    @property
    def message_encoding(self) -> bytes:
        return self.ascii.encode("ascii")


TAG_TMP1 = TagString("tmp1")
TAG_TMP2 = TagString("tmp2")
TAG_LEBR = TagString("lebr")
TAG_BRLE = TagString("brle")


@dataclass(frozen=True)
class Nonce:
    """Fresh 16-byte per-run value, tagged with the address that produced it."""

    value: bytes
    origin: Address

    def __post_init__(self) -> None:
        if len(self.value) != 16:
            raise ValueError("nonce must be 16 bytes")


@dataclass(frozen=True)
class SharedSecret:
    """16-byte Diffie-Hellman shared secret."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 16:
            raise ValueError("shared secret must be 16 bytes")


def aes_cmac(key: bytes, message: bytes) -> bytes:
    """Standard AES-CMAC of ``message`` under a 16-byte ``key``."""
    if len(key) != 16:
        raise ValueError("CMAC key must be 16 bytes")
    mac = CMAC(AES(key))
    mac.update(message)
    return mac.finalize()


def _convert(key: Key128, h7_supported: bool, tag: TagString, key_id: TagString) -> Key128:
    # Salted-first branch when both sides negotiated h7; otherwise the input
    # key itself keys the first MAC and the tag is the message.
    if h7_supported:
        intermediate = aes_cmac(tag.salt_encoding, key.value)
    else:
        intermediate = aes_cmac(key.value, tag.message_encoding)
    out = aes_cmac(intermediate, key_id.message_encoding)
    # Conversion changes neither the declared entropy nor the MITM flag.
    return Key128(out, key.strength, key.mitm_protected)


def ctkd_ble_to_bt(k_ble: Key128, h7_supported: bool) -> Key128:
    """Derive the BT pairing key from a BLE pairing key (tags tmp1/lebr)."""
    return _convert(k_ble, h7_supported, TAG_TMP1, TAG_LEBR)


def ctkd_bt_to_ble(k_bt: Key128, h7_supported: bool) -> Key128:
    """Derive the BLE pairing key from a BT pairing key (tags tmp2/brle)."""
    return _convert(k_bt, h7_supported, TAG_TMP2, TAG_BRLE)


# ---------------------------------------------------------------------------
# Diffie-Hellman backends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DhPrivate:
    value: object
    backend: str


@dataclass(frozen=True)
class DhPublic:
    value: object
    backend: str


@dataclass(frozen=True)
class DhKeyPair:
    private: DhPrivate
    public: DhPublic


class ToyModPBackend:
    """Deterministic commutative group: modular exponentiation mod 2**127 - 1.

    The attacks in this simulator are protocol-level, so the group only has
    to be commutative and collision-free at desk scale, not secure.
    """

    name = "toy-modp"
    prime = 2**127 - 1
    generator = 5

    def generate(self, rng: random.Random) -> DhKeyPair:
        exponent = rng.randrange(2, self.prime - 1)
        public = pow(self.generator, exponent, self.prime)
        return DhKeyPair(DhPrivate(exponent, self.name), DhPublic(public, self.name))

    def shared(self, private: DhPrivate, public: DhPublic) -> bytes:
        return pow(public.value, private.value, self.prime).to_bytes(16, "big")

    def public_bytes(self, public: DhPublic) -> bytes:
        return public.value.to_bytes(16, "big")


class P256Backend:
    """Real NIST P-256 ECDH behind the same interface (seeded deterministically)."""

    name = "p256"
    # Order of the P-256 base point.
    _order = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

    def generate(self, rng: random.Random) -> DhKeyPair:
        from cryptography.hazmat.primitives.asymmetric import ec
        from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

        scalar = rng.randrange(1, self._order)
        key = ec.derive_private_key(scalar, ec.SECP256R1())
        pub = key.public_key().public_bytes(Encoding.X962, PublicFormat.UncompressedPoint)
        return DhKeyPair(DhPrivate(scalar, self.name), DhPublic(pub, self.name))

    def shared(self, private: DhPrivate, public: DhPublic) -> bytes:
        from cryptography.hazmat.primitives.asymmetric import ec

        key = ec.derive_private_key(private.value, ec.SECP256R1())
        peer = ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), public.value)
        return key.exchange(ec.ECDH(), peer)[:16]

    def public_bytes(self, public: DhPublic) -> bytes:
        return public.value


_BACKENDS = {
    ToyModPBackend.name: ToyModPBackend(),
}


def get_backend(name: str):
    if name == P256Backend.name and name not in _BACKENDS:
        _BACKENDS[name] = P256Backend()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown DH backend {name!r}") from None


def dh_generate(rng: random.Random, backend: str = ToyModPBackend.name) -> DhKeyPair:
    """Generate a keypair in the configured group from the simulation RNG."""
    return get_backend(backend).generate(rng)


def dh_shared(private: DhPrivate, public: DhPublic) -> SharedSecret:
    """16-byte shared secret; symmetric in the two participants."""
    if private.backend != public.backend:
        raise BackendMismatchError(
            f"private key from {private.backend!r}, public key from {public.backend!r}"
        )
    return SharedSecret(get_backend(private.backend).shared(private, public))


def dh_public_bytes(public: DhPublic) -> bytes:
    return get_backend(public.backend).public_bytes(public)


# ---------------------------------------------------------------------------
# Pairing-key and session-key derivations (model-level)
# ---------------------------------------------------------------------------

def _truncate_to_strength(tag: bytes, strength: int) -> bytes:
    # Entropy reduction keeps the leading `strength` bytes and zeroes the rest.
    return tag[:strength] + bytes(16 - strength)


def kdf_le(
    dk: SharedSecret,
    addr_i: Address,
    addr_r: Address,
    n_i: Nonce,
    n_r: Nonce,
    strength: int,
) -> Key128:
    """BLE pairing key from the DH secret, addresses and nonces.

    BLE negotiates key entropy, so the result is truncated and zero-padded
    to ``strength`` bytes and labeled with it.
    """
    if not MIN_STRENGTH <= strength <= MAX_STRENGTH:
        raise ValueError(f"strength {strength} outside {MIN_STRENGTH}..{MAX_STRENGTH}")
    msg = b"LE" + addr_i.value + addr_r.value + n_i.value + n_r.value
    tag = aes_cmac(dk.value, msg)
    return Key128(_truncate_to_strength(tag, strength), strength)


def kdf_bt(
    dk: SharedSecret,
    addr_m: Address,
    addr_s: Address,
    n_m: Nonce,
    n_s: Nonce,
) -> Key128:
    """BT pairing key: same shape as the BLE one but always full strength."""
    msg = b"BT" + addr_m.value + addr_s.value + n_m.value + n_s.value
    return Key128(aes_cmac(dk.value, msg), MAX_STRENGTH)


def session_key(
    transport: str,
    pairing_key: Key128,
    n_a: Nonce,
    n_b: Nonce,
    negotiated_entropy: int,
) -> Key128:
    """Fresh session key from the pairing key and two nonces.

    BT may negotiate the session-key entropy down; a BLE session key always
    inherits the entropy of its pairing key.
    """
    if transport not in TRANSPORTS:
        raise ValueError(f"unknown transport {transport!r}")
    if not MIN_STRENGTH <= negotiated_entropy <= MAX_STRENGTH:
        raise ValueError(f"entropy {negotiated_entropy} outside {MIN_STRENGTH}..{MAX_STRENGTH}")
    if transport == TRANSPORT_BLE and negotiated_entropy != pairing_key.strength:
        raise ValueError(
            f"BLE session entropy {negotiated_entropy} must equal "
            f"pairing-key strength {pairing_key.strength}"
        )
    msg = b"SK" + transport.encode("ascii") + n_a.value + n_b.value
    tag = aes_cmac(pairing_key.value, msg)
    return Key128(
        _truncate_to_strength(tag, negotiated_entropy),
        negotiated_entropy,
        pairing_key.mitm_protected,
    )


def random_key128(rng: random.Random, strength: int = MAX_STRENGTH, mitm_protected: bool = False) -> Key128:
    return Key128(rng.randbytes(16), strength, mitm_protected)


def random_nonce(rng: random.Random, origin: Address) -> Nonce:
    return Nonce(rng.randbytes(16), origin)


def random_address(rng: random.Random) -> Address:
    # Locally-administered unicast prefix keeps synthetic addresses obvious.
    return Address(bytes([0x02]) + rng.randbytes(5))
