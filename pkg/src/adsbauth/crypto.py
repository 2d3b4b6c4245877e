"""Thin wrappers over ``cryptography`` for the primitives the protocol needs.

* 256-bit hash: SHA-256
* signatures: Ed25519 (deterministic, so chains built from seeded keys are reproducible)
* public-key sealing: X25519 ephemeral-static ECDH, HKDF-SHA256, AES-256-GCM
* keyed MAC: HMAC-SHA256 truncated to 128 bits
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AdsbAuthError

MAC_BYTES = 16
_SEAL_INFO = b"adsbauth credential seal v1"
_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw
_RAW_PRIV = serialization.PrivateFormat.Raw


class DecryptFailure(AdsbAuthError):
    pass


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def seed_bytes(label: str, seed: int, size: int = 32) -> bytes:
    """Deterministic key material from a label and integer seed (test/demo use)."""
    out = b""
    counter = 0
    while len(out) < size:
        out += digest(f"{label}|{seed}|{counter}".encode())
        counter += 1
    return out[:size]


def signing_key(seed: int | None = None, label: str = "sign") -> Ed25519PrivateKey:
    if seed is None:
        return Ed25519PrivateKey.generate()
    return Ed25519PrivateKey.from_private_bytes(seed_bytes(label, seed))


def sealing_key(seed: int | None = None, label: str = "seal") -> X25519PrivateKey:
    if seed is None:
        return X25519PrivateKey.generate()
    return X25519PrivateKey.from_private_bytes(seed_bytes(label, seed))


def public_bytes(key: Ed25519PrivateKey | Ed25519PublicKey | X25519PrivateKey | X25519PublicKey) -> bytes:
    if isinstance(key, (Ed25519PrivateKey, X25519PrivateKey)):
        key = key.public_key()
    return key.public_bytes(_RAW, _RAW_PUB)


def private_bytes(key: Ed25519PrivateKey | X25519PrivateKey) -> bytes:
    return key.private_bytes(_RAW, _RAW_PRIV, serialization.NoEncryption())


def sign(key: Ed25519PrivateKey, message: bytes) -> bytes:
    return key.sign(message)


def verify(public_key: bytes | Ed25519PublicKey, signature: bytes, message: bytes) -> bool:
    try:
        if isinstance(public_key, (bytes, bytearray)):
            public_key = Ed25519PublicKey.from_public_bytes(bytes(public_key))
        public_key.verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def mac(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, message, hashlib.sha256).digest()[:MAC_BYTES]


def mac_equal(a: bytes, b: bytes) -> bool:
    return hmac.compare_digest(a, b)


def _seal_key(shared: bytes, ephemeral_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(), length=32, salt=ephemeral_pub + recipient_pub, info=_SEAL_INFO
    ).derive(shared)


def seal(plaintext: bytes, recipient: bytes | X25519PublicKey) -> bytes:
    """``ephemeral_pub(32) || nonce(12) || AES-GCM ciphertext+tag``."""
    if isinstance(recipient, (bytes, bytearray)):
        recipient = X25519PublicKey.from_public_bytes(bytes(recipient))
    ephemeral = X25519PrivateKey.generate()
    eph_pub = public_bytes(ephemeral)
    key = _seal_key(ephemeral.exchange(recipient), eph_pub, public_bytes(recipient))
    nonce = os.urandom(12)
    return eph_pub + nonce + AESGCM(key).encrypt(nonce, plaintext, eph_pub)


def unseal(sealed: bytes, recipient: X25519PrivateKey) -> bytes:
    if len(sealed) < 32 + 12 + 16:
        raise DecryptFailure("sealed blob too short")
    eph_pub, nonce, body = sealed[:32], sealed[32:44], sealed[44:]
    try:
        shared = recipient.exchange(X25519PublicKey.from_public_bytes(eph_pub))
        key = _seal_key(shared, eph_pub, public_bytes(recipient))
        return AESGCM(key).decrypt(nonce, body, eph_pub)
    except (InvalidTag, ValueError) as exc:
        raise DecryptFailure("credential could not be unsealed") from exc


@dataclass(frozen=True)
class UasKeys:
    """A UAS operator's key pair: Ed25519 to sign plans, X25519 to receive credentials."""

    signing: Ed25519PrivateKey
    sealing: X25519PrivateKey

    @classmethod
    def generate(cls, seed: int | None = None) -> UasKeys:
        return cls(signing_key(seed, "uas-sign"), sealing_key(seed, "uas-seal"))

    @property
    def signing_public(self) -> bytes:
        return public_bytes(self.signing)

    @property
    def sealing_public(self) -> bytes:
        return public_bytes(self.sealing)

    def to_dict(self) -> dict[str, str]:
        return {"signing": private_bytes(self.signing).hex(), "sealing": private_bytes(self.sealing).hex()}

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> UasKeys:
        return cls(
            Ed25519PrivateKey.from_private_bytes(bytes.fromhex(data["signing"])),
            X25519PrivateKey.from_private_bytes(bytes.fromhex(data["sealing"])),
        )
