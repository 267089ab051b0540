"""Organizations, certificate authorities and signed identities.

Membership is what makes the network permissioned: every component holds a
certificate issued by its organization's CA, and every signature can be
checked against the org's root public key. Certificates are deliberately
simplified (single-level chain, canonical binary encoding, Ed25519 by
default with a pluggable algorithm byte); x509 compatibility is a non-goal.
"""

from __future__ import annotations

import enum
import os
import threading
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .codec import CodecError, Decoder, Encoder

SIG_ALG_ED25519 = 0x01


class IdentityError(ValueError):
    """Issuance or wallet handling failed."""


class Role(enum.Enum):
    PEER = "peer"
    ORDERER = "orderer"
    CLIENT = "client"
    ADMIN = "admin"


def generate_keypair() -> tuple[bytes, bytes]:
    """Return (private_key, public_key) as raw 32-byte strings."""
    priv = Ed25519PrivateKey.generate()
    from cryptography.hazmat.primitives import serialization

    priv_bytes = priv.private_bytes(
        serialization.Encoding.Raw,
        serialization.PrivateFormat.Raw,
        serialization.NoEncryption(),
    )
    pub_bytes = priv.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return priv_bytes, pub_bytes


def sign_bytes(private_key: bytes, payload: bytes, alg: int = SIG_ALG_ED25519) -> bytes:
    if alg != SIG_ALG_ED25519:
        raise IdentityError(f"unknown signature algorithm id {alg}")
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(payload)


def verify_bytes(
    public_key: bytes, payload: bytes, signature: bytes, alg: int = SIG_ALG_ED25519
) -> bool:
    if alg != SIG_ALG_ED25519:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
        return True
    except (InvalidSignature, ValueError):
        return False


@dataclass(frozen=True)
class Certificate:
    serial: int
    subject_id: str
    org_id: str
    role: Role
    subject_public_key: bytes
    sig_alg: int
    ca_signature: bytes

    def signing_payload(self) -> bytes:
        """Canonical bytes the CA signs: every field except the signature."""
        return (
            Encoder()
            .u64(self.serial)
            .string(self.subject_id)
            .string(self.org_id)
            .string(self.role.value)
            .bytestr(self.subject_public_key)
            .u64(self.sig_alg)
            .done()
        )

    def encode(self) -> bytes:
        return Encoder().raw(self.signing_payload()).bytestr(self.ca_signature).done()

    @classmethod
    def read_from(cls, dec: Decoder) -> "Certificate":
        serial = dec.u64()
        subject_id = dec.string()
        org_id = dec.string()
        role_name = dec.string()
        pub = dec.bytestr()
        alg = dec.u64()
        sig = dec.bytestr()
        try:
            role = Role(role_name)
        except ValueError as exc:
            raise CodecError(f"unknown role {role_name!r}") from exc
        return cls(serial, subject_id, org_id, role, pub, alg, sig)

    @classmethod
    def decode(cls, data: bytes) -> "Certificate":
        dec = Decoder(data)
        cert = cls.read_from(dec)
        dec.expect_end()
        return cert


@dataclass(frozen=True)
class Identity:
    certificate: Certificate
    private_key: bytes

    @property
    def subject_id(self) -> str:
        return self.certificate.subject_id

    @property
    def org_id(self) -> str:
        return self.certificate.org_id

    def sign(self, payload: bytes) -> bytes:
        return sign_bytes(self.private_key, payload, self.certificate.sig_alg)

    def encode(self) -> bytes:
        return Encoder().bytestr(self.certificate.encode()).bytestr(self.private_key).done()

    @classmethod
    def decode(cls, data: bytes) -> "Identity":
        dec = Decoder(data)
        cert = Certificate.decode(dec.bytestr())
        priv = dec.bytestr()
        dec.expect_end()
        return cls(cert, priv)


class CertificateAuthority:
    """Per-organization issuer; the only holder of the org root private key."""

    def __init__(self, org_id: str) -> None:
        if not org_id:
            raise IdentityError("rejected-empty-id: org_id must be non-empty")
        self.org_id = org_id
        self._root_private_key, self.root_public_key = generate_keypair()
        self.issued_serials: set[int] = set()
        self._issued_subjects: set[str] = set()
        self._next_serial = 1
        self._lock = threading.Lock()

    def issue_identity(self, subject_id: str, role: Role) -> Identity:
        if not subject_id:
            raise IdentityError("rejected-empty-id: subject_id must be non-empty")
        with self._lock:
            if subject_id in self._issued_subjects:
                raise IdentityError(
                    f"subject {subject_id!r} already issued by {self.org_id}"
                )
            serial = self._next_serial
            self._next_serial += 1
            self.issued_serials.add(serial)
            self._issued_subjects.add(subject_id)
        priv, pub = generate_keypair()
        unsigned = Certificate(
            serial, subject_id, self.org_id, role, pub, SIG_ALG_ED25519, b""
        )
        signature = sign_bytes(self._root_private_key, unsigned.signing_payload())
        cert = Certificate(
            serial, subject_id, self.org_id, role, pub, SIG_ALG_ED25519, signature
        )
        return Identity(cert, priv)

    def save(self, path: str | Path) -> None:
        """Persist the CA (root keys and issuance state) to one file."""
        with self._lock:
            enc = (
                Encoder()
                .string(self.org_id)
                .bytestr(self._root_private_key)
                .bytestr(self.root_public_key)
                .u64(self._next_serial)
                .count(len(self._issued_subjects))
            )
            for subject in sorted(self._issued_subjects):
                enc.string(subject)
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(enc.done())

    @classmethod
    def load(cls, path: str | Path) -> "CertificateAuthority":
        dec = Decoder(Path(path).read_bytes())
        ca = cls.__new__(cls)
        ca.org_id = dec.string()
        ca._root_private_key = dec.bytestr()
        ca.root_public_key = dec.bytestr()
        ca._next_serial = dec.u64()
        ca._issued_subjects = {dec.string() for _ in range(dec.count())}
        dec.expect_end()
        ca.issued_serials = set(range(1, ca._next_serial))
        ca._lock = threading.Lock()
        return ca


@dataclass
class Organization:
    org_id: str
    ca: CertificateAuthority
    member_ids: set[str]

    @classmethod
    def create(cls, org_id: str) -> "Organization":
        return cls(org_id=org_id, ca=create_ca(org_id), member_ids=set())

    def issue(self, subject_id: str, role: Role) -> Identity:
        ident = self.ca.issue_identity(subject_id, role)
        self.member_ids.add(subject_id)
        return ident

    @property
    def root_public_key(self) -> bytes:
        return self.ca.root_public_key


def create_ca(org_id: str) -> CertificateAuthority:
    return CertificateAuthority(org_id)


@lru_cache(maxsize=8192)
def _verify_cert_cached(cert_bytes: bytes, root_public_key: bytes) -> bool:
    try:
        cert = Certificate.decode(cert_bytes)
    except CodecError:
        return False
    return verify_bytes(
        root_public_key, cert.signing_payload(), cert.ca_signature, cert.sig_alg
    )


def verify_identity(cert: Certificate, known_orgs: Mapping[str, bytes]) -> bool:
    """True iff cert's org is known and the CA signature checks out.

    Never raises: unknown orgs, tampered fields and malformed signatures all
    come back False.
    """
    root = known_orgs.get(cert.org_id)
    if root is None:
        return False
    try:
        return _verify_cert_cached(cert.encode(), root)
    except Exception:
        return False


def verify_signature(cert: Certificate, payload: bytes, signature: bytes) -> bool:
    return verify_bytes(cert.subject_public_key, payload, signature, cert.sig_alg)


# --- wallet directory format: one file of canonical bytes per identity ---


def save_identity(wallet_dir: str | Path, identity: Identity) -> Path:
    path = Path(wallet_dir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / identity.subject_id
    target.write_bytes(identity.encode())
    return target


def load_identity(path: str | Path) -> Identity:
    data = Path(path).read_bytes()
    try:
        return Identity.decode(data)
    except CodecError as exc:
        raise IdentityError(f"wallet file {path} is not a valid identity") from exc


def load_wallet(wallet_dir: str | Path) -> dict[str, Identity]:
    out: dict[str, Identity] = {}
    for entry in sorted(Path(wallet_dir).iterdir()):
        if entry.is_file():
            ident = load_identity(entry)
            out[ident.subject_id] = ident
    return out


def new_nonce() -> bytes:
    return os.urandom(16)
