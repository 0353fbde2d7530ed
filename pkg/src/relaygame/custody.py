"""Signed chain-of-custody envelopes and fee settlement.

A transaction record fixes the fee parameters (f, beta, height) and the
set of seed keys. Every forwarding step appends a hop signed over all
prior content, so the path to the eventual authorizer is tamper-evident
end to end; fake identities are just extra hops through fresh keys held
by the same party. Settlement pays position j on a chain of length h the
amount floor(f * r(j, h)).

Encoding is canonical: fixed field order, big-endian fixed-width
integers, length-prefixed byte strings, rationals as (int64, int64)
pairs. Signatures are computed over canonical bytes.

The signature scheme is pluggable. The bundled KeyedHashSigner is a
deterministic HMAC stand-in for tests: it keeps a private registry of the
keys it generated and is NOT cryptographically secure signing.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import math
import random
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import (
    BadSignatureError,
    BrokenLinkError,
    ChainTooLongError,
    DecodeError,
    InvalidParameterError,
    NotCustodyHeadError,
    UnknownSeedError,
)
from .schemes import RewardTable, make_almost_uniform

__all__ = [
    "KeyPair",
    "Signer",
    "KeyedHashSigner",
    "TransactionRecord",
    "Hop",
    "CustodyEnvelope",
    "init_transaction",
    "open_envelope",
    "forward",
    "verify_chain",
    "settle",
    "encode_envelope",
    "decode_envelope",
    "envelope_debug_json",
]

_MAGIC = b"RGCE"
_VERSION = 1
_INT64_MIN, _INT64_MAX = -(2**63), 2**63 - 1


@dataclass(frozen=True)
class KeyPair:
    secret: bytes
    public: bytes


class Signer(ABC):
    """Abstract signing contract: sign with a secret, verify with a public."""

    @abstractmethod
    def generate_keypair(self) -> KeyPair: ...

    @abstractmethod
    def sign(self, secret: bytes, message: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool: ...


class KeyedHashSigner(Signer):
    """Deterministic keyed-hash test signer (HMAC-SHA256).

    Verification works only for keys this instance generated, via an
    internal public->secret registry. Suitable for protocol tests, not for
    real deployments.
    """

    def __init__(self, seed: int | None = None) -> None:
        self._rng = random.Random(seed)
        self._registry: dict[bytes, bytes] = {}

    def generate_keypair(self) -> KeyPair:
        secret = self._rng.randbytes(32)
        public = hashlib.sha256(b"relaygame-public:" + secret).digest()
        self._registry[public] = secret
        return KeyPair(secret=secret, public=public)

    def sign(self, secret: bytes, message: bytes) -> bytes:
        return hmac.new(secret, message, hashlib.sha256).digest()

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        secret = self._registry.get(public)
        if secret is None:
            return False
        return hmac.compare_digest(self.sign(secret, message), signature)

    def export_registry(self) -> dict[str, str]:
        """Dump public -> secret hex pairs so another instance can verify.

        Only acceptable because this signer is a test stand-in."""
        return {pk.hex(): sk.hex() for pk, sk in self._registry.items()}

    def import_registry(self, registry: dict[str, str]) -> None:
        for pk, sk in registry.items():
            self._registry[bytes.fromhex(pk)] = bytes.fromhex(sk)


# --- canonical primitives ---------------------------------------------------


def _u32(value: int) -> bytes:
    return struct.pack(">I", value)


def _u64(value: int) -> bytes:
    if not 0 <= value < 2**64:
        raise InvalidParameterError(f"value {value} out of u64 range")
    return struct.pack(">Q", value)


def _i64(value: int) -> bytes:
    if not _INT64_MIN <= value <= _INT64_MAX:
        raise InvalidParameterError(f"value {value} out of int64 range")
    return struct.pack(">q", value)


def _blob(data: bytes) -> bytes:
    return _u32(len(data)) + data


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated stream")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")


# --- record -----------------------------------------------------------------


@dataclass(frozen=True)
class TransactionRecord:
    tx_id: bytes
    payer_public: bytes
    payee_public: bytes
    amount: int
    fee: int
    beta: Fraction
    height: int
    seeds: tuple[bytes, ...]
    signature: bytes


def _record_body(
    payer_public: bytes,
    payee_public: bytes,
    amount: int,
    fee: int,
    beta: Fraction,
    height: int,
    seeds: tuple[bytes, ...],
) -> bytes:
    parts = [
        _blob(payer_public),
        _blob(payee_public),
        _u64(amount),
        _u64(fee),
        _i64(beta.numerator),
        _i64(beta.denominator),
        _u32(height),
        _u32(len(seeds)),
    ]
    parts.extend(_blob(seed) for seed in seeds)
    return b"".join(parts)


def _tx_id(body: bytes) -> bytes:
    return hashlib.sha256(b"relaygame-tx:" + body).digest()


def init_transaction(
    payer: KeyPair,
    payee_public: bytes,
    amount: int,
    fee: int,
    beta: Fraction | int,
    height: int,
    seeds: list[bytes] | tuple[bytes, ...],
    signer: Signer,
) -> TransactionRecord:
    """Create the payer-signed record carrying (f, beta, height) and the
    seed keys the transaction is initially sent to."""
    beta = Fraction(beta)
    if amount < 0 or fee < 0:
        raise InvalidParameterError("amount and fee must be non-negative")
    if beta <= 0:
        raise InvalidParameterError(f"beta={beta} must be positive")
    if height < 1:
        raise InvalidParameterError(f"height={height} must be >= 1")
    if not seeds:
        raise InvalidParameterError("need at least one seed key")
    seeds = tuple(seeds)
    body = _record_body(payer.public, payee_public, amount, fee, beta, height, seeds)
    return TransactionRecord(
        tx_id=_tx_id(body),
        payer_public=payer.public,
        payee_public=payee_public,
        amount=amount,
        fee=fee,
        beta=beta,
        height=height,
        seeds=seeds,
        signature=signer.sign(payer.secret, body),
    )


# --- envelope ---------------------------------------------------------------


@dataclass(frozen=True)
class Hop:
    sender_public: bytes
    receiver_public: bytes
    signature: bytes


@dataclass(frozen=True)
class CustodyEnvelope:
    record: TransactionRecord
    origin_seed: bytes
    hops: tuple[Hop, ...] = ()
    auth_claim: bytes = b""

    @property
    def custody_head(self) -> bytes:
        return self.hops[-1].receiver_public if self.hops else self.origin_seed

    @property
    def chain_length(self) -> int:
        return len(self.hops) + 1


def open_envelope(record: TransactionRecord, seed_public: bytes) -> CustodyEnvelope:
    if seed_public not in record.seeds:
        raise UnknownSeedError("envelope must start at one of the record's seeds")
    return CustodyEnvelope(record=record, origin_seed=seed_public)


def _encode_hop(hop: Hop) -> bytes:
    return _blob(hop.sender_public) + _blob(hop.receiver_public) + _blob(hop.signature)


def _hop_message(
    record: TransactionRecord, prior: tuple[Hop, ...], receiver_public: bytes
) -> bytes:
    parts = [record.tx_id]
    parts.extend(_encode_hop(h) for h in prior)
    parts.append(_blob(receiver_public))
    return b"".join(parts)


def forward(
    envelope: CustodyEnvelope,
    sender: KeyPair,
    receiver_public: bytes,
    signer: Signer,
    fake_identities: int = 0,
) -> CustodyEnvelope:
    """Hand custody to receiver_public, optionally padding the chain first
    with fake self-hops through fresh keys held by the sender."""
    if fake_identities < 0:
        raise InvalidParameterError("fake_identities must be >= 0")
    if sender.public != envelope.custody_head:
        raise NotCustodyHeadError("forwarding key is not the custody head")
    hops = list(envelope.hops)
    current = sender
    for _ in range(fake_identities):
        fake = signer.generate_keypair()
        message = _hop_message(envelope.record, tuple(hops), fake.public)
        hops.append(
            Hop(current.public, fake.public, signer.sign(current.secret, message))
        )
        current = fake
    message = _hop_message(envelope.record, tuple(hops), receiver_public)
    hops.append(
        Hop(current.public, receiver_public, signer.sign(current.secret, message))
    )
    return replace(envelope, hops=tuple(hops))


def verify_chain(envelope: CustodyEnvelope, signer: Signer) -> int:
    """Full validation: record integrity and signature, seed membership,
    hop linkage, and every hop signature. Returns the identity-chain
    length h = hops + 1."""
    record = envelope.record
    body = _record_body(
        record.payer_public,
        record.payee_public,
        record.amount,
        record.fee,
        record.beta,
        record.height,
        record.seeds,
    )
    if _tx_id(body) != record.tx_id:
        raise BadSignatureError("tx_id does not commit to the record body")
    if not signer.verify(record.payer_public, body, record.signature):
        raise BadSignatureError("payer signature does not verify")
    if envelope.origin_seed not in record.seeds:
        raise UnknownSeedError("origin is not in the record's seed list")
    if envelope.hops:
        if envelope.hops[0].sender_public not in record.seeds:
            raise UnknownSeedError("first hop sender is not a seed")
        if envelope.hops[0].sender_public != envelope.origin_seed:
            raise BrokenLinkError("first hop sender differs from the origin seed")
    for i, hop in enumerate(envelope.hops):
        if i > 0 and hop.sender_public != envelope.hops[i - 1].receiver_public:
            raise BrokenLinkError(f"hop {i} sender is not the previous receiver")
        message = _hop_message(record, envelope.hops[:i], hop.receiver_public)
        if not signer.verify(hop.sender_public, message, hop.signature):
            raise BadSignatureError(f"hop {i} signature does not verify")
    return envelope.chain_length


def settle(
    envelope: CustodyEnvelope, signer: Signer, table: RewardTable | None = None
) -> dict[bytes, int]:
    """Fee units per public key for a verified envelope whose head
    authorized: position j from the authorizer earns floor(f * r(j, h)).

    Default table is the almost-uniform one announced by the record, so
    the authorizer nets f * (1 + beta*(height - h + 1)) and every other
    identity f * beta; fractional residues are unallocated.
    """
    h = verify_chain(envelope, signer)
    record = envelope.record
    if table is None:
        table = make_almost_uniform(record.beta, record.height)
    if h > table.height:
        raise ChainTooLongError(f"chain length {h} exceeds horizon {table.height}")
    identities = [envelope.origin_seed] + [hop.receiver_public for hop in envelope.hops]
    identities.reverse()  # authorizer first
    payout: dict[bytes, int] = {}
    for j, key in enumerate(identities, start=1):
        units = math.floor(record.fee * table.reward(j, h))
        payout[key] = payout.get(key, 0) + units
    return payout


# --- canonical envelope encoding ---------------------------------------------


def encode_envelope(envelope: CustodyEnvelope) -> bytes:
    record = envelope.record
    parts = [
        _MAGIC,
        bytes([_VERSION]),
        _record_body(
            record.payer_public,
            record.payee_public,
            record.amount,
            record.fee,
            record.beta,
            record.height,
            record.seeds,
        ),
        record.tx_id,
        _blob(record.signature),
        _u32(len(envelope.hops)),
    ]
    parts.extend(_encode_hop(hop) for hop in envelope.hops)
    parts.append(_blob(envelope.origin_seed))
    parts.append(_blob(envelope.auth_claim))
    return b"".join(parts)


def decode_envelope(data: bytes) -> CustodyEnvelope:
    reader = _Reader(data)
    if reader.take(4) != _MAGIC:
        raise DecodeError("bad magic")
    if reader.take(1) != bytes([_VERSION]):
        raise DecodeError("unsupported version")
    payer = reader.blob()
    payee = reader.blob()
    amount = reader.u64()
    fee = reader.u64()
    beta_num = reader.i64()
    beta_den = reader.i64()
    if beta_den <= 0 or beta_num <= 0:
        raise DecodeError("beta must be a positive rational")
    height = reader.u32()
    if height < 1:
        raise DecodeError("height must be >= 1")
    n_seeds = reader.u32()
    seeds = tuple(reader.blob() for _ in range(n_seeds))
    tx_id = reader.take(32)
    signature = reader.blob()
    # Fraction normalizes; reject non-canonical encodings to keep the
    # byte round-trip exact.
    beta = Fraction(beta_num, beta_den)
    if (beta.numerator, beta.denominator) != (beta_num, beta_den):
        raise DecodeError("beta is not in lowest terms")
    record = TransactionRecord(
        tx_id=tx_id,
        payer_public=payer,
        payee_public=payee,
        amount=amount,
        fee=fee,
        beta=beta,
        height=height,
        seeds=seeds,
        signature=signature,
    )
    n_hops = reader.u32()
    hops = tuple(
        Hop(reader.blob(), reader.blob(), reader.blob()) for _ in range(n_hops)
    )
    origin = reader.blob()
    auth_claim = reader.blob()
    reader.done()
    return CustodyEnvelope(
        record=record, origin_seed=origin, hops=hops, auth_claim=auth_claim
    )


def signed_region_length(envelope: CustodyEnvelope) -> int:
    """Length of the tamper-evident prefix of the encoding: everything but
    the trailing authorization-claim field, whose validation is out of
    scope for this package."""
    return len(encode_envelope(envelope)) - (4 + len(envelope.auth_claim))


def envelope_debug_json(envelope: CustodyEnvelope) -> str:
    """Human-readable rendering; not the canonical format."""
    record = envelope.record
    doc = {
        "record": {
            "tx_id": record.tx_id.hex(),
            "payer": record.payer_public.hex(),
            "payee": record.payee_public.hex(),
            "amount": record.amount,
            "fee": record.fee,
            "beta": f"{record.beta.numerator}/{record.beta.denominator}",
            "height": record.height,
            "seeds": [seed.hex() for seed in record.seeds],
            "signature": record.signature.hex(),
        },
        "origin_seed": envelope.origin_seed.hex(),
        "hops": [
            {
                "sender": hop.sender_public.hex(),
                "receiver": hop.receiver_public.hex(),
                "signature": hop.signature.hex(),
            }
            for hop in envelope.hops
        ],
        "auth_claim": envelope.auth_claim.hex(),
        "chain_length": envelope.chain_length,
    }
    return json.dumps(doc, indent=2, sort_keys=True)
