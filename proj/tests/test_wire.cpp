#include "doctest.h"
#include "gen.hpp"

#include "qudit_qkd/wire.hpp"

using namespace qkd;
using namespace qkd::wire;

namespace {

const MsgType kTypes[] = {MsgType::Qudit,       MsgType::PairAnnounce, MsgType::OutcomeAnnounce, MsgType::SiftAccept,
                          MsgType::SampleReveal, MsgType::ParityRound, MsgType::BlockParity,     MsgType::Verdict,
                          MsgType::Hello,        MsgType::Abort};

Frame raw(MsgType t, std::vector<std::uint8_t> payload) { return Frame{t, std::move(payload)}; }

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("frame layout") {
    const auto bytes = encode(text(MsgType::Abort, "x"));
    CHECK(bytes == std::vector<std::uint8_t>{0, 0, 0, 1, 0x0F, 'x'});
    const auto q = encode(qudit(SparseKet::from_pair(PairState::make(1, 2, 1))));
    CHECK(q == std::vector<std::uint8_t>{0, 0, 0, 6, 0x01, 0, 1, 0, 0, 2, 1});
    const auto p = encode(pair_announce(PairState::make(3, 1, 0)));
    CHECK(p == std::vector<std::uint8_t>{0, 0, 0, 4, 0x02, 0, 1, 0, 3});
}

TEST_CASE("fuzz: random frames survive arbitrary chunking") {
    Stream s = gen::stream(81);
    for (int it = 0; it < 300; ++it) {
        std::vector<Frame> frames;
        std::vector<std::uint8_t> stream;
        const int count = 1 + static_cast<int>(uniform_below(s, 20));
        for (int i = 0; i < count; ++i) {
            Frame f{kTypes[uniform_below(s, 10)], gen::bytes(s, 64)};
            const auto e = encode(f);
            stream.insert(stream.end(), e.begin(), e.end());
            frames.push_back(std::move(f));
        }
        FrameDecoder d;
        std::vector<Frame> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            const std::size_t n = std::min<std::size_t>(stream.size() - pos, uniform_below(s, 17));
            d.feed(std::span(stream).subspan(pos, n));
            pos += n;
            while (auto f = d.next())
                got.push_back(std::move(*f));
        }
        CHECK(got == frames);
        CHECK(d.buffered() == 0);
    }
}

TEST_CASE("decoder rejects unknown types and oversize lengths") {
    FrameDecoder d;
    const std::vector<std::uint8_t> unknown = {0, 0, 0, 0, 0x0A};
    d.feed(unknown);
    CHECK_THROWS_AS(d.next(), ProtocolError);
    FrameDecoder big;
    const std::vector<std::uint8_t> huge = {0x04, 0x00, 0x00, 0x01, 0x01};
    big.feed(huge);
    CHECK_THROWS_AS(big.next(), ProtocolError);
    FrameDecoder partial;
    const std::vector<std::uint8_t> head = {0, 0, 0, 3, 0x01, 0};
    partial.feed(head);
    CHECK_FALSE(partial.next().has_value());
    for (int t = 0; t < 256; ++t)
        CHECK(known_type(static_cast<std::uint8_t>(t)) == ((t >= 1 && t <= 9) || t == 15));
}

TEST_CASE("typed payload round trips") {
    Stream s = gen::stream(82);
    for (int it = 0; it < 2000; ++it) {
        const unsigned N = 1u << gen::degree(s);
        const SparseKet k = gen::ket(s, N);
        CHECK(parse_qudit(qudit(k), N) == k);
        const PairState p = gen::pair(s, N);
        const PairMsg pm = parse_pair(pair_announce(p), N);
        CHECK((pm.i == p.first && pm.j == p.second));
        const Outcome o = static_cast<Outcome>(uniform_below(s, 3));
        const OutcomeMsg om = parse_outcome(outcome_announce(p, o), N);
        CHECK((om.i == p.first && om.j == p.second && om.outcome == o));

        std::vector<std::uint32_t> rounds;
        std::uint32_t r = 0;
        std::vector<std::uint8_t> bits;
        for (std::size_t n = uniform_below(s, 40); n > 0; --n) {
            r += 1 + static_cast<std::uint32_t>(uniform_below(s, 1000));
            rounds.push_back(r);
            bits.push_back(static_cast<std::uint8_t>(uniform_below(s, 2)));
        }
        CHECK(parse_sift(sift_accept(rounds)) == rounds);
        const auto [pos, got_bits] = parse_sample(sample_reveal(rounds, bits));
        CHECK(pos == rounds);
        CHECK(got_bits == bits);

        ParityMsg par{s(), gen::bits(s, uniform_below(s, 70))};
        const ParityMsg back = parse_parity(parity_round(par));
        CHECK(back.seed == par.seed);
        CHECK(back.parities == par.parities);

        const BlockMsg b{static_cast<std::uint32_t>(2 * uniform_below(s, 5000) + 1), s()};
        const BlockMsg bb = parse_block(block_parity(b));
        CHECK((bb.r == b.r && bb.seed == b.seed));
        CHECK(parse_text(text(MsgType::Verdict, "{\"a\":1}")) == "{\"a\":1}");
    }
}

TEST_CASE("typed parsers reject malformed payloads") {
    CHECK_THROWS_AS(parse_qudit(raw(MsgType::Qudit, {0, 2, 0, 0, 1, 0}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_qudit(raw(MsgType::Qudit, {0, 9, 0}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_qudit(raw(MsgType::PairAnnounce, {0, 1, 0}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_pair(raw(MsgType::PairAnnounce, {0, 2, 0, 1}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_pair(raw(MsgType::PairAnnounce, {0, 1, 0, 4}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_pair(raw(MsgType::PairAnnounce, {0, 1, 0, 2, 0}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_pair(raw(MsgType::PairAnnounce, {0, 1, 0}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_outcome(raw(MsgType::OutcomeAnnounce, {0, 1, 0, 2, 3}), 4), ProtocolError);
    CHECK_THROWS_AS(parse_sift(raw(MsgType::SiftAccept, {0, 0, 0, 5, 0, 0, 0, 5})), ProtocolError);
    CHECK_THROWS_AS(parse_sift(raw(MsgType::SiftAccept, {0, 0, 0, 5, 0})), ProtocolError);
    CHECK_THROWS_AS(parse_sample(raw(MsgType::SampleReveal, {0, 0, 0, 1, 2})), ProtocolError);
    CHECK_THROWS_AS(parse_sample(raw(MsgType::SampleReveal, {0, 0, 0, 3, 0, 0, 0, 0, 2, 1})), ProtocolError);
    // 9 pairs need two bitmap bytes
    CHECK_THROWS_AS(parse_parity(raw(MsgType::ParityRound, {0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 9, 0xFF})),
                    ProtocolError);
    // unused high bits must be clear
    CHECK_THROWS_AS(parse_parity(raw(MsgType::ParityRound, {0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 3, 0xFF})),
                    ProtocolError);
    CHECK_THROWS_AS(parse_block(raw(MsgType::BlockParity, {0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0})), ProtocolError);
    CHECK_THROWS_AS(parse_block(raw(MsgType::BlockParity, {0, 0, 0, 3})), ProtocolError);
    CHECK_THROWS_AS(parse_text(raw(MsgType::Qudit, {'a'})), ProtocolError);
}

TEST_CASE("fuzz: typed parsers never fail with anything but ProtocolError") {
    Stream s = gen::stream(83);
    for (int it = 0; it < 20000; ++it) {
        const Frame f{kTypes[uniform_below(s, 10)], gen::bytes(s, 24)};
        const unsigned N = 1u << gen::degree(s);
        try {
            switch (f.type) {
            case MsgType::Qudit: (void)parse_qudit(f, N); break;
            case MsgType::PairAnnounce: (void)parse_pair(f, N); break;
            case MsgType::OutcomeAnnounce: (void)parse_outcome(f, N); break;
            case MsgType::SiftAccept: (void)parse_sift(f); break;
            case MsgType::SampleReveal: (void)parse_sample(f); break;
            case MsgType::ParityRound: (void)parse_parity(f); break;
            case MsgType::BlockParity: (void)parse_block(f); break;
            default: (void)parse_text(f); break;
            }
        } catch (const ProtocolError&) {
        }
    }
}

}
