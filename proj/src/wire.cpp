#include "qudit_qkd/wire.hpp"

namespace qkd::wire {

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Reader {
public:
    explicit Reader(const Frame& f) : data_(f.payload), type_(f.type) {}

    std::uint64_t take(int bytes) {
        if (pos_ + bytes > data_.size())
            throw ProtocolError(std::string("truncated ") + type_name(type_) + " payload");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v = (v << 8) | data_[pos_++];
        return v;
    }
    std::size_t remaining() const { return data_.size() - pos_; }
    void finish() const {
        if (pos_ != data_.size())
            throw ProtocolError(std::string("trailing bytes in ") + type_name(type_) + " payload");
    }

private:
    const std::vector<std::uint8_t>& data_;
    MsgType type_;
    std::size_t pos_ = 0;
};

void expect(const Frame& f, MsgType t) {
    if (f.type != t)
        throw ProtocolError(std::string("expected ") + type_name(t) + ", got " + type_name(f.type));
}

PairMsg read_pair(Reader& r, unsigned order) {
    PairMsg m;
    m.i = static_cast<Elem>(r.take(2));
    m.j = static_cast<Elem>(r.take(2));
    if (m.i >= order || m.j >= order || m.i >= m.j)
        throw ProtocolError("pair indices out of range or not canonical");
    return m;
}

}  // namespace

const char* type_name(MsgType t) {
    switch (t) {
    case MsgType::Qudit: return "QUDIT";
    case MsgType::PairAnnounce: return "PAIR_ANNOUNCE";
    case MsgType::OutcomeAnnounce: return "OUTCOME_ANNOUNCE";
    case MsgType::SiftAccept: return "SIFT_ACCEPT";
    case MsgType::SampleReveal: return "SAMPLE_REVEAL";
    case MsgType::ParityRound: return "PARITY_ROUND";
    case MsgType::BlockParity: return "BLOCK_PARITY";
    case MsgType::Verdict: return "VERDICT";
    case MsgType::Hello: return "HELLO";
    case MsgType::Abort: return "ABORT";
    }
    return "UNKNOWN";
}

bool known_type(std::uint8_t t) { return (t >= 0x01 && t <= 0x09) || t == 0x0F; }

std::vector<std::uint8_t> encode(const Frame& f) {
    if (f.payload.size() > kMaxPayload)
        throw ProtocolError("payload too large");
    std::vector<std::uint8_t> out;
    out.reserve(5 + f.payload.size());
    put32(out, static_cast<std::uint32_t>(f.payload.size()));
    out.push_back(static_cast<std::uint8_t>(f.type));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

std::optional<Frame> FrameDecoder::next() {
    if (buf_.size() < 5)
        return std::nullopt;
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
        len = (len << 8) | buf_[i];
    const std::uint8_t type = buf_[4];
    if (!known_type(type))
        throw ProtocolError("unknown frame type " + std::to_string(type));
    if (len > kMaxPayload)
        throw ProtocolError("frame length " + std::to_string(len) + " exceeds limit");
    if (buf_.size() < 5 + static_cast<std::size_t>(len))
        return std::nullopt;
    Frame f;
    f.type = static_cast<MsgType>(type);
    f.payload.assign(buf_.begin() + 5, buf_.begin() + 5 + len);
    buf_.erase(buf_.begin(), buf_.begin() + 5 + len);
    return f;
}

Frame qudit(const SparseKet& ket) { return {MsgType::Qudit, ket.serialize()}; }

Frame pair_announce(const PairState& p) {
    Frame f{MsgType::PairAnnounce, {}};
    put16(f.payload, p.first);
    put16(f.payload, p.second);
    return f;
}

Frame outcome_announce(const PairState& p, Outcome o) {
    Frame f{MsgType::OutcomeAnnounce, {}};
    put16(f.payload, p.first);
    put16(f.payload, p.second);
    f.payload.push_back(static_cast<std::uint8_t>(o));
    return f;
}

Frame sift_accept(std::span<const std::uint32_t> rounds) {
    Frame f{MsgType::SiftAccept, {}};
    f.payload.reserve(4 * rounds.size());
    for (auto r : rounds)
        put32(f.payload, r);
    return f;
}

Frame sample_reveal(std::span<const std::uint32_t> positions, std::span<const std::uint8_t> bits) {
    if (positions.size() != bits.size())
        throw ProtocolError("sample positions and bits differ in length");
    Frame f{MsgType::SampleReveal, {}};
    f.payload.reserve(5 * positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        put32(f.payload, positions[i]);
        f.payload.push_back(bits[i]);
    }
    return f;
}

Frame parity_round(const ParityMsg& m) {
    Frame f{MsgType::ParityRound, {}};
    put64(f.payload, m.seed);
    put32(f.payload, static_cast<std::uint32_t>(m.parities.size()));
    std::vector<std::uint8_t> bitmap((m.parities.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < m.parities.size(); ++i) {
        if (m.parities[i])
            bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    f.payload.insert(f.payload.end(), bitmap.begin(), bitmap.end());
    return f;
}

Frame block_parity(const BlockMsg& m) {
    Frame f{MsgType::BlockParity, {}};
    put32(f.payload, m.r);
    put64(f.payload, m.seed);
    return f;
}

Frame text(MsgType type, const std::string& body) { return {type, std::vector<std::uint8_t>(body.begin(), body.end())}; }

SparseKet parse_qudit(const Frame& f, unsigned order) {
    expect(f, MsgType::Qudit);
    try {
        return SparseKet::deserialize(f.payload, order);
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("bad QUDIT payload: ") + e.what());
    }
}

PairMsg parse_pair(const Frame& f, unsigned order) {
    expect(f, MsgType::PairAnnounce);
    Reader r(f);
    const auto m = read_pair(r, order);
    r.finish();
    return m;
}

OutcomeMsg parse_outcome(const Frame& f, unsigned order) {
    expect(f, MsgType::OutcomeAnnounce);
    Reader r(f);
    const auto p = read_pair(r, order);
    const auto o = r.take(1);
    if (o > 2)
        throw ProtocolError("outcome byte out of range");
    r.finish();
    return {p.i, p.j, static_cast<Outcome>(o)};
}

std::vector<std::uint32_t> parse_sift(const Frame& f) {
    expect(f, MsgType::SiftAccept);
    if (f.payload.size() % 4)
        throw ProtocolError("SIFT_ACCEPT payload not a multiple of 4");
    Reader r(f);
    std::vector<std::uint32_t> out;
    while (r.remaining()) {
        const auto v = static_cast<std::uint32_t>(r.take(4));
        if (!out.empty() && v <= out.back())
            throw ProtocolError("SIFT_ACCEPT rounds not strictly increasing");
        out.push_back(v);
    }
    return out;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint8_t>> parse_sample(const Frame& f) {
    expect(f, MsgType::SampleReveal);
    if (f.payload.size() % 5)
        throw ProtocolError("SAMPLE_REVEAL payload not a multiple of 5");
    Reader r(f);
    std::vector<std::uint32_t> pos;
    std::vector<std::uint8_t> bits;
    while (r.remaining()) {
        const auto p = static_cast<std::uint32_t>(r.take(4));
        const auto b = static_cast<std::uint8_t>(r.take(1));
        if (b > 1)
            throw ProtocolError("SAMPLE_REVEAL bit must be 0 or 1");
        if (!pos.empty() && p <= pos.back())
            throw ProtocolError("SAMPLE_REVEAL positions not strictly increasing");
        pos.push_back(p);
        bits.push_back(b);
    }
    return {std::move(pos), std::move(bits)};
}

ParityMsg parse_parity(const Frame& f) {
    expect(f, MsgType::ParityRound);
    Reader r(f);
    ParityMsg m;
    m.seed = r.take(8);
    const auto count = static_cast<std::uint32_t>(r.take(4));
    const std::size_t bytes = (static_cast<std::size_t>(count) + 7) / 8;
    if (r.remaining() != bytes)
        throw ProtocolError("PARITY_ROUND bitmap length does not match pair count");
    m.parities.resize(count);
    std::vector<std::uint8_t> bitmap(bytes);
    for (auto& b : bitmap)
        b = static_cast<std::uint8_t>(r.take(1));
    if (count % 8 != 0 && (bitmap.back() >> (count % 8)) != 0)
        throw ProtocolError("PARITY_ROUND bitmap has padding bits set");
    for (std::uint32_t i = 0; i < count; ++i)
        m.parities[i] = (bitmap[i / 8] >> (i % 8)) & 1u;
    return m;
}

BlockMsg parse_block(const Frame& f) {
    expect(f, MsgType::BlockParity);
    Reader r(f);
    BlockMsg m;
    m.r = static_cast<std::uint32_t>(r.take(4));
    m.seed = r.take(8);
    r.finish();
    if (m.r == 0 || m.r % 2 == 0)
        throw ProtocolError("BLOCK_PARITY r must be odd");
    return m;
}

std::string parse_text(const Frame& f) {
    if (f.type != MsgType::Verdict && f.type != MsgType::Hello && f.type != MsgType::Abort)
        throw ProtocolError(std::string(type_name(f.type)) + " is not a text frame");
    return std::string(f.payload.begin(), f.payload.end());
}

}  // namespace qkd::wire
