"""Independent reference values for the crypto/did/credential test vectors.

Uses only the Python `cryptography` package and hand-written field arithmetic,
never the Rust implementation under test.
"""
import base64
import hashlib
import json

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

P = 2**255 - 19
RAW = serialization.Encoding.Raw, serialization.PublicFormat.Raw
B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def b58(data: bytes) -> str:
    n = int.from_bytes(data, "big")
    out = ""
    while n:
        n, r = divmod(n, 58)
        out = B58[r] + out
    return "1" * (len(data) - len(data.lstrip(b"\0"))) + out


def ed_pub(seed: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(seed).public_key().public_bytes(*RAW)


def ed_to_x_pub(pub: bytes) -> bytes:
    y = int.from_bytes(pub, "little") & ((1 << 255) - 1)
    u = (1 + y) * pow(1 - y, P - 2, P) % P
    return u.to_bytes(32, "little")


def x25519(scalar: bytes, point: bytes) -> bytes:
    return X25519PrivateKey.from_private_bytes(scalar).exchange(X25519PublicKey.from_public_bytes(point))


def x_pub(scalar: bytes) -> bytes:
    return X25519PrivateKey.from_private_bytes(scalar).public_key().public_bytes(*RAW)


def hkdf(ikm: bytes, info: bytes, length: int = 32, salt=None) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=salt, info=info).derive(ikm)


def b64u(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


zero = bytes(32)
zpub = ed_pub(zero)
print("zero_seed_ed25519_pk", zpub.hex())
print("zero_seed_x25519_pk", ed_to_x_pub(zpub).hex())
print("zero_seed_sig_abc", Ed25519PrivateKey.from_private_bytes(zero).sign(b"abc").hex())
print("zero_seed_did_key", "did:key:z" + b58(b"\xed\x01" + zpub))
print("zero_seed_x25519_multibase", "z" + b58(b"\xec\x01" + ed_to_x_pub(zpub)))

# RFC 8032 7.1 TEST 1
rfc_seed = bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
print("rfc8032_t1_pk", ed_pub(rfc_seed).hex())
print("rfc8032_t1_sig", Ed25519PrivateKey.from_private_bytes(rfc_seed).sign(b"").hex())

# RFC 7748 6.1
alice = bytes.fromhex("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a")
bob = bytes.fromhex("5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb")
print("rfc7748_alice_pub", x_pub(alice).hex())
print("rfc7748_bob_pub", x_pub(bob).hex())
print("rfc7748_shared", x25519(alice, x_pub(bob)).hex())

# RFC 5869 A.1 / A.3
print("rfc5869_a1", hkdf(bytes([0x0B] * 22), bytes(range(0xF0, 0xFA)), 42, bytes(range(0x0D))).hex())
print("rfc5869_a3", hkdf(bytes([0x0B] * 22), b"", 42, b"").hex())

# kdf over a 64-byte secret
print("kdf_64", hkdf(bytes(range(64)), b"DAXiot-1PU").hex())

# ecdh_es: ephemeral = alice scalar, receiver static = bob
es_ctx = b"DAXiot-ES" + b"did:key:sender" + b"did:web:receiver"
print("ecdh_es", hkdf(x25519(alice, x_pub(bob)), es_ctx).hex())

# ecdh_1pu: sender static = alice, ephemeral = 0x01..0x20, receiver static = bob
eph = bytes(range(1, 33))
pu_ctx = b"DAXiot-1PU" + b"did:key:sender" + b"did:web:receiver"
ze = x25519(eph, x_pub(bob))
zs = x25519(alice, x_pub(bob))
print("ecdh_1pu", hkdf(ze + zs, pu_ctx).hex())
print("ecdh_1pu_swapped", hkdf(zs + ze, pu_ctx).hex())

# disclosure digest over canonical JSON array
disclosure = ["2GLC42sKQveCfGfryNRN9w", "did:web:broker1.com", {"sub": ["t1"], "pub": ["t2"]}]
ser = json.dumps(disclosure, separators=(",", ":"))
print("disclosure_serialized", ser)
print("disclosure_digest", b64u(hashlib.sha256(ser.encode()).digest()))
