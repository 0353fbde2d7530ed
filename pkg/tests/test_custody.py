import random
from fractions import Fraction

import pytest

from relaygame.custody import (
    CustodyEnvelope,
    KeyedHashSigner,
    decode_envelope,
    encode_envelope,
    envelope_debug_json,
    forward,
    init_transaction,
    open_envelope,
    settle,
    signed_region_length,
    verify_chain,
)
from relaygame.errors import (
    BadSignatureError,
    BrokenLinkError,
    ChainTooLongError,
    CustodyError,
    DecodeError,
    InvalidParameterError,
    NotCustodyHeadError,
    UnknownSeedError,
)
from relaygame.game import WinningChain, allocate_rewards
from relaygame.schemes import make_almost_uniform

F = Fraction


def make_chain(signer, hops=2, fakes=0, fee=12, beta=F(1, 3), height=3, seeds=1):
    payer = signer.generate_keypair()
    payee = signer.generate_keypair()
    seed_keys = [signer.generate_keypair() for _ in range(seeds)]
    record = init_transaction(
        payer, payee.public, amount=30, fee=fee, beta=beta, height=height,
        seeds=[k.public for k in seed_keys], signer=signer,
    )
    envelope = open_envelope(record, seed_keys[0].public)
    current = seed_keys[0]
    for i in range(hops):
        receiver = signer.generate_keypair()
        envelope = forward(
            envelope, current, receiver.public, signer,
            fake_identities=fakes if i == 0 else 0,
        )
        current = receiver
    return envelope, current


class TestRecord:
    def test_round_trip_verifies(self):
        signer = KeyedHashSigner(seed=1)
        envelope, _ = make_chain(signer, hops=0)
        assert verify_chain(envelope, signer) == 1

    def test_beta_zero_rejected(self):
        signer = KeyedHashSigner(seed=1)
        payer = signer.generate_keypair()
        with pytest.raises(InvalidParameterError):
            init_transaction(
                payer, b"x", amount=1, fee=1, beta=0, height=3,
                seeds=[b"s"], signer=signer,
            )

    def test_tampered_amount_fails(self):
        from dataclasses import replace

        signer = KeyedHashSigner(seed=1)
        envelope, _ = make_chain(signer, hops=0)
        tampered = CustodyEnvelope(
            record=replace(envelope.record, amount=31),
            origin_seed=envelope.origin_seed,
        )
        with pytest.raises(BadSignatureError):
            verify_chain(tampered, signer)


class TestForward:
    def test_honest_forward_adds_one_hop(self):
        signer = KeyedHashSigner(seed=2)
        envelope, head = make_chain(signer, hops=1)
        assert len(envelope.hops) == 1
        receiver = signer.generate_keypair()
        longer = forward(envelope, head, receiver.public, signer)
        assert len(longer.hops) == 2

    def test_fakes_add_extra_hops(self):
        signer = KeyedHashSigner(seed=2)
        envelope, _ = make_chain(signer, hops=1, fakes=2)
        assert len(envelope.hops) == 3
        assert verify_chain(envelope, signer) == 4

    def test_non_head_rejected(self):
        signer = KeyedHashSigner(seed=2)
        envelope, _ = make_chain(signer, hops=1)
        stranger = signer.generate_keypair()
        with pytest.raises(NotCustodyHeadError):
            forward(envelope, stranger, signer.generate_keypair().public, signer)


class TestVerifyChain:
    def test_two_hop_honest_chain(self):
        signer = KeyedHashSigner(seed=3)
        envelope, _ = make_chain(signer, hops=2)
        assert verify_chain(envelope, signer) == 3

    def test_altered_middle_receiver_breaks_link(self):
        signer = KeyedHashSigner(seed=3)
        envelope, _ = make_chain(signer, hops=2)
        other = signer.generate_keypair().public
        hops = list(envelope.hops)
        hops[0] = hops[0].__class__(hops[0].sender_public, other, hops[0].signature)
        bad = CustodyEnvelope(
            record=envelope.record, origin_seed=envelope.origin_seed, hops=tuple(hops)
        )
        with pytest.raises((BrokenLinkError, BadSignatureError)):
            verify_chain(bad, signer)

    def test_non_seed_origin_rejected(self):
        signer = KeyedHashSigner(seed=3)
        envelope, _ = make_chain(signer, hops=1)
        imposter = signer.generate_keypair()
        bad = CustodyEnvelope(
            record=envelope.record, origin_seed=imposter.public, hops=envelope.hops
        )
        with pytest.raises((UnknownSeedError, BrokenLinkError)):
            verify_chain(bad, signer)

    def test_open_envelope_requires_listed_seed(self):
        signer = KeyedHashSigner(seed=3)
        envelope, _ = make_chain(signer, hops=0)
        with pytest.raises(UnknownSeedError):
            open_envelope(envelope.record, signer.generate_keypair().public)


class TestSettle:
    def test_worked_example(self):
        # f=12, beta=1/3, height=3, h=2: authorizer 20, seed 4, total 24
        signer = KeyedHashSigner(seed=4)
        envelope, head = make_chain(signer, hops=1, fee=12, beta=F(1, 3), height=3)
        payout = settle(envelope, signer)
        assert payout[head.public] == 20
        assert payout[envelope.origin_seed] == 4
        assert sum(payout.values()) == 24  # f * (1 + beta*height)

    def test_seed_alone(self):
        signer = KeyedHashSigner(seed=4)
        envelope, _ = make_chain(signer, hops=0, fee=12, beta=F(1, 3), height=3)
        payout = settle(envelope, signer)
        assert payout == {envelope.origin_seed: 24}

    def test_chain_too_long(self):
        signer = KeyedHashSigner(seed=4)
        envelope, _ = make_chain(signer, hops=3, height=3)
        with pytest.raises(ChainTooLongError):
            settle(envelope, signer)

    def test_conservation_with_integral_shares(self):
        signer = KeyedHashSigner(seed=5)
        envelope, _ = make_chain(signer, hops=2, fee=12, beta=F(1, 3), height=3)
        payout = settle(envelope, signer)
        assert sum(payout.values()) == 12 * (1 + 1)

    def test_floor_rounding_deficit_bounded(self):
        signer = KeyedHashSigner(seed=5)
        envelope, _ = make_chain(signer, hops=2, fee=10, beta=F(1, 3), height=3)
        payout = settle(envelope, signer)
        h = envelope.chain_length
        exact_total = 10 * (1 + F(1, 3) * 3)
        assert sum(payout.values()) <= exact_total
        assert exact_total - sum(payout.values()) < h

    def test_agrees_with_game_allocation(self):
        rng = random.Random(99)
        signer = KeyedHashSigner(seed=6)
        for trial in range(50):
            height = rng.randint(1, 6)
            h = rng.randint(1, height)
            beta_choices = [F(1, 3), F(1, 2), F(2), F(1)]
            beta = rng.choice(beta_choices)
            fee = rng.choice([6, 12, 30])
            envelope, _ = make_chain(
                signer, hops=h - 1, fee=fee, beta=beta, height=height
            )
            table = make_almost_uniform(beta, height)
            payout = settle(envelope, signer)
            # same positions through the game-side allocator, scaled by fee
            chain = WinningChain(seed=0, identities=tuple(range(h)))
            game_amounts = allocate_rewards(chain, table)
            identities = [envelope.origin_seed] + [
                hop.receiver_public for hop in envelope.hops
            ]
            identities.reverse()
            for position, key in enumerate(identities):
                expected = fee * game_amounts[position]
                assert payout[key] == int(expected)  # divisible by construction

    def test_custom_table(self):
        signer = KeyedHashSigner(seed=6)
        envelope, head = make_chain(signer, hops=1, fee=8, beta=F(1, 2), height=4)
        table = make_almost_uniform(F(1, 4), 2)
        payout = settle(envelope, signer, table=table)
        assert payout[head.public] == int(8 * table.reward(1, 2))


class TestEncoding:
    def test_round_trip_bit_exact(self):
        signer = KeyedHashSigner(seed=7)
        envelope, _ = make_chain(signer, hops=2, fakes=1)
        blob = encode_envelope(envelope)
        decoded = decode_envelope(blob)
        assert decoded == envelope
        assert encode_envelope(decoded) == blob

    def test_randomized_round_trips(self):
        rng = random.Random(2024)
        signer = KeyedHashSigner(seed=8)
        for _ in range(100):
            envelope, _ = make_chain(
                signer,
                hops=rng.randint(0, 4),
                fakes=rng.randint(0, 2),
                fee=rng.randint(0, 1000),
                beta=F(rng.randint(1, 9), rng.randint(1, 9)),
                height=rng.randint(1, 9),
                seeds=rng.randint(1, 3),
            )
            blob = encode_envelope(envelope)
            assert encode_envelope(decode_envelope(blob)) == blob

    def test_truncation_rejected(self):
        signer = KeyedHashSigner(seed=8)
        envelope, _ = make_chain(signer)
        blob = encode_envelope(envelope)
        with pytest.raises(DecodeError):
            decode_envelope(blob[:-1])
        with pytest.raises(DecodeError):
            decode_envelope(blob + b"\x00")

    def test_single_byte_mutations_rejected(self):
        rng = random.Random(55)
        signer = KeyedHashSigner(seed=9)
        envelope, _ = make_chain(signer, hops=2, fakes=1)
        blob = encode_envelope(envelope)
        region = signed_region_length(envelope)
        for _ in range(300):
            pos = rng.randrange(region)
            bit = 1 << rng.randrange(8)
            mutated = bytearray(blob)
            mutated[pos] ^= bit
            with pytest.raises(CustodyError):
                verify_chain(decode_envelope(bytes(mutated)), signer)

    def test_auth_claim_round_trips(self):
        signer = KeyedHashSigner(seed=9)
        envelope, _ = make_chain(signer, hops=1)
        claimed = CustodyEnvelope(
            record=envelope.record,
            origin_seed=envelope.origin_seed,
            hops=envelope.hops,
            auth_claim=b"opaque-proof",
        )
        blob = encode_envelope(claimed)
        assert decode_envelope(blob).auth_claim == b"opaque-proof"
        # the claim is a placeholder: chain verification ignores it
        assert verify_chain(decode_envelope(blob), signer) == 2

    def test_debug_json_renders(self):
        signer = KeyedHashSigner(seed=9)
        envelope, _ = make_chain(signer, hops=1)
        text = envelope_debug_json(envelope)
        assert envelope.record.tx_id.hex() in text


class TestSigner:
    def test_sign_verify_round_trip(self):
        signer = KeyedHashSigner(seed=10)
        pair = signer.generate_keypair()
        sig = signer.sign(pair.secret, b"msg")
        assert signer.verify(pair.public, b"msg", sig)
        assert not signer.verify(pair.public, b"msG", sig)
        assert not signer.verify(pair.public, b"msg", sig[:-1] + b"\x00")

    def test_unknown_key_fails(self):
        signer = KeyedHashSigner(seed=10)
        assert not signer.verify(b"nobody", b"msg", b"sig")

    def test_registry_export_import(self):
        a = KeyedHashSigner(seed=11)
        envelope, _ = make_chain(a, hops=1)
        b = KeyedHashSigner()
        b.import_registry(a.export_registry())
        assert verify_chain(envelope, b) == 2

    def test_deterministic_keygen(self):
        assert (
            KeyedHashSigner(seed=1).generate_keypair()
            == KeyedHashSigner(seed=1).generate_keypair()
        )
