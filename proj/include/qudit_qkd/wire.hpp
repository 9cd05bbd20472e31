#pragma once

// Length-prefixed frames for the classical announcements and the serialized
// quantum channel.
//
//   frame   = length (u32, big-endian, payload bytes only) | type (u8) | payload
//
// Payloads (all integers big-endian):
//   QUDIT            0x01  ket terms: (u16 index, u8 sign 0=+ 1=-) x 1..2, canonical
//   PAIR_ANNOUNCE    0x02  u16 i | u16 j                     (i < j < N)
//   OUTCOME_ANNOUNCE 0x03  u16 i | u16 j | u8 outcome         (0 plus, 1 minus, 2 outside)
//   SIFT_ACCEPT      0x04  u32 round x count                  (strictly increasing)
//   SAMPLE_REVEAL    0x05  (u32 position | u8 bit) x count    (strictly increasing)
//   PARITY_ROUND     0x06  u64 seed | u32 pairs | bitmap      (LSB-first, ceil(pairs/8) bytes)
//   BLOCK_PARITY     0x07  u32 r | u64 grouping seed
//   VERDICT          0x08  UTF-8 JSON object
//   HELLO            0x09  UTF-8 JSON object (parameter handshake)
//   ABORT            0x0F  UTF-8 reason

#include "qudit_qkd/qstates.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd::wire {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MsgType : std::uint8_t {
    Qudit = 0x01,
    PairAnnounce = 0x02,
    OutcomeAnnounce = 0x03,
    SiftAccept = 0x04,
    SampleReveal = 0x05,
    ParityRound = 0x06,
    BlockParity = 0x07,
    Verdict = 0x08,
    Hello = 0x09,
    Abort = 0x0F,
};

inline constexpr std::uint32_t kMaxPayload = 64u << 20;

const char* type_name(MsgType t);
bool known_type(std::uint8_t t);

struct Frame {
    MsgType type = MsgType::Abort;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode(const Frame& f);

/// Incremental decoder over a byte stream.
class FrameDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    /// Next complete frame; throws ProtocolError on unknown type or oversize
    /// length.
    std::optional<Frame> next();
    std::size_t buffered() const { return buf_.size(); }

private:
    std::deque<std::uint8_t> buf_;
};

// Typed payloads.

struct PairMsg {
    Elem i = 0, j = 1;
};

struct OutcomeMsg {
    Elem i = 0, j = 1;
    Outcome outcome = Outcome::Outside;
};

struct ParityMsg {
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> parities;  // one 0/1 byte per pair
};

struct BlockMsg {
    std::uint32_t r = 1;
    std::uint64_t seed = 0;
};

Frame qudit(const SparseKet& ket);
Frame pair_announce(const PairState& p);
Frame outcome_announce(const PairState& p, Outcome o);
Frame sift_accept(std::span<const std::uint32_t> rounds);
Frame sample_reveal(std::span<const std::uint32_t> positions, std::span<const std::uint8_t> bits);
Frame parity_round(const ParityMsg& m);
Frame block_parity(const BlockMsg& m);
Frame text(MsgType type, const std::string& body);

SparseKet parse_qudit(const Frame& f, unsigned order);
PairMsg parse_pair(const Frame& f, unsigned order);
OutcomeMsg parse_outcome(const Frame& f, unsigned order);
std::vector<std::uint32_t> parse_sift(const Frame& f);
std::pair<std::vector<std::uint32_t>, std::vector<std::uint8_t>> parse_sample(const Frame& f);
ParityMsg parse_parity(const Frame& f);
BlockMsg parse_block(const Frame& f);
std::string parse_text(const Frame& f);

}  // namespace qkd::wire
