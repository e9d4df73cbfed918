"""Walk through the cross-transport key derivation step by step.

Shows the two-step CMAC chain in both directions and both negotiation
branches, checks the bundled known-answer vectors, and demonstrates that
the derivation preserves key strength and MITM-protection flags.
"""

import random

from ctkdsim import Key128, aes_cmac, ctkd_ble_to_bt, ctkd_bt_to_ble
from ctkdsim.crypto import TAG_LEBR, TAG_TMP1
from ctkdsim.vectors import load_cmac_vectors, load_ctkd_vectors

rng = random.Random(1)

# A BLE pairing key, as it would exist right after BLE pairing completes.
k_ble = Key128(rng.randbytes(16), strength=16, mitm_protected=False)
print(f"BLE pairing key      : {k_ble.hex()}")

# Derive the BT pairing key. With the salted branch (both sides advertise
# the modern conversion function), the tag is the *MAC key*, zero-padded to
# 16 bytes; the pairing key is the message.
intermediate = aes_cmac(TAG_TMP1.salt_encoding, k_ble.value)
k_bt_manual = aes_cmac(intermediate, TAG_LEBR.message_encoding)
k_bt = ctkd_ble_to_bt(k_ble, h7_supported=True)
print(f"intermediate value   : {intermediate.hex()}")
print(f"derived BT key       : {k_bt.hex()}")
assert k_bt.value == k_bt_manual

# The legacy branch keys the first MAC with the pairing key instead.
k_bt_legacy = ctkd_ble_to_bt(k_ble, h7_supported=False)
print(f"legacy-branch BT key : {k_bt_legacy.hex()}  (different by design)")
assert k_bt.value != k_bt_legacy.value

# Strength and MITM flags ride through the conversion untouched. That is
# exactly why equal-protection overwrites pass the 5.1 rule.
weak = Key128(rng.randbytes(16), strength=7, mitm_protected=True)
derived = ctkd_bt_to_ble(weak, h7_supported=True)
print(f"strength 7 in -> {derived.strength} out, mitm {weak.mitm_protected} -> {derived.mitm_protected}")

# Known-answer vectors bundled with the package.
for direction in ("ble_to_bt", "bt_to_ble"):
    fn = ctkd_ble_to_bt if direction == "ble_to_bt" else ctkd_bt_to_ble
    vectors = load_ctkd_vectors(direction)
    assert all(fn(k, h7).value == out for k, h7, out in vectors)
    print(f"{direction}: {len(vectors)} fixture vectors OK")

cmacs = load_cmac_vectors()
assert all(aes_cmac(k, m) == mac for k, m, mac in cmacs)
print(f"CMAC known answers: {len(cmacs)} vectors OK (incl. the published conversion pair)")
