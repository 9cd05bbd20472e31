#pragma once

// Monte Carlo engine for the prepare-and-measure rounds: prepare, transmit,
// measure, announce, sift, sample and estimate (e_b, e_c).
//
// Every role draws from its own chunked substream (master seed, role,
// round / kRoundChunk), so the in-process engine, a threaded run and the
// networked roles all see identical randomness for a given seed.

#include "qudit_qkd/channels.hpp"
#include "qudit_qkd/field.hpp"
#include "qudit_qkd/qstates.hpp"
#include "qudit_qkd/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qkd {

inline constexpr std::uint64_t kRoundChunk = 4096;
inline constexpr double kZ99 = 2.5758293035489004;

/// Reseeds at chunk boundaries; rounds must be visited in increasing order
/// within a chunk.
class RoundStream {
public:
    RoundStream(std::uint64_t seed, StreamTag tag) : seed_(seed), tag_(tag) {}
    Stream& at(std::uint64_t round);

private:
    std::uint64_t seed_;
    StreamTag tag_;
    std::uint64_t chunk_ = ~0ull;
    Stream stream_;
};

/// All C = N(N-1)/2 unordered pairs in lexicographic order.
std::vector<PairState> all_pairs(unsigned order);

struct Preparation {
    PairState state;  // pair and Alice's bit
};

struct Measurement {
    PairState basis;  // sign unused
    Outcome outcome = Outcome::Outside;
    std::uint8_t bit = 0;  // Plus -> 0, Minus -> 1, Outside -> uniform
};

Preparation alice_prepare(const std::vector<PairState>& pairs, RoundStream& alice, std::uint64_t round);
SparseKet channel_pass(const ChannelModel& model, RoundStream& channel, std::uint64_t round, const SparseKet& ket);
Measurement bob_measure(const std::vector<PairState>& pairs, RoundStream& bob, std::uint64_t round,
                        const SparseKet& received);

struct RoundRecord {
    std::uint64_t round = 0;
    PairState alice;
    PairState bob;
    Outcome outcome = Outcome::Outside;
    std::uint8_t bob_bit = 0;
    bool sifted = false;
    /// Bob's pair is {i + a(i+j), j + a(i+j)} for some a.
    bool on_line = false;
    /// Offset a of Bob's first index relative to Alice's first index; valid
    /// when on_line. a and a+1 name the same unordered pair.
    Elem offset = 0;
};

RoundRecord reconcile(const GaloisField& field, std::uint64_t round, const PairState& alice, const Measurement& bob);

struct Interval {
    double value = 0;
    double lo = 0;
    double hi = 0;
    double half_width() const { return (hi - lo) / 2; }
};

/// Wilson score interval for k successes of n trials at normal quantile z.
Interval wilson(std::uint64_t k, std::uint64_t n, double z);

enum class EcMode {
    /// Denominator: line-pair rounds with an in-pair outcome.
    AnnouncementAndOutcome,
    /// Denominator: every line-pair round, whatever the outcome.
    AnnouncementOnly,
};

struct EcEstimate {
    bool defined = false;
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 0;
    Interval interval;
};

/// e_c from both accepted and rejected rounds. Each unordered line pair is
/// chosen with the same probability 1/C, so the per-offset reweighting by the
/// basis-choice probability cancels and plain counts are used.
EcEstimate estimate_ec(const std::vector<RoundRecord>& log, EcMode mode = EcMode::AnnouncementAndOutcome);

struct PmVerdict {
    bool pass = false;
    double lhs = 0;
};

/// Values this close below 1/2 count as on the boundary (rounding of exact
/// boundary inputs such as (0.3, 5/6)).
inline constexpr double kConditionGuard = 1e-12;

/// e_b e_c + (N-1)(1-e_c)/(N-2) < 1/2 - kConditionGuard. Throws DomainError for N = 2.
PmVerdict check_pm_condition(double e_b, double e_c, int n);

struct SessionConfig {
    int n = 2;
    std::optional<unsigned> modulus;
    std::uint64_t rounds = 100000;
    std::string channel = "identity";
    double sample_fraction = 0.1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double z = kZ99;
    bool keep_log = true;

    void validate() const;
};

enum class SessionStatus { Ok, InsufficientSift, UndefinedEc };

const char* status_name(SessionStatus s);

struct SessionStats {
    SessionStatus status = SessionStatus::Ok;
    std::uint64_t rounds = 0;
    std::uint64_t sifted = 0;
    std::uint64_t sifted_outside = 0;
    std::uint64_t sample_size = 0;
    std::uint64_t sample_in_pair = 0;
    std::uint64_t sample_errors_in_pair = 0;
    std::uint64_t sample_errors_all = 0;
    std::uint64_t raw_key_length = 0;

    /// Bit error rate over sampled positions with an in-pair outcome.
    Interval e_b;
    bool e_b_defined = false;
    /// Bit error rate over every sampled position (Outside decoded at random).
    Interval e_b_all;
    EcEstimate e_c;
    EcEstimate e_c_alt;

    /// counts[a][outcome] over on-line rounds.
    std::vector<std::array<std::uint64_t, 3>> line_counts;

    PmVerdict verdict_point;
    /// Evaluated at the pessimistic interval ends (e_b upper, e_c lower).
    PmVerdict verdict;
};

struct SessionResult {
    std::vector<std::uint8_t> alice_key;
    std::vector<std::uint8_t> bob_key;
    SessionStats stats;
    std::vector<RoundRecord> log;
};

/// Positions (into the sifted list) consumed for the error estimate, sorted.
std::vector<std::uint64_t> choose_sample(std::uint64_t seed, std::uint64_t sifted, double fraction);

/// Stats from a complete round log, the sample positions and Alice's bits at
/// those positions. Shared with netrun, where Bob holds the log.
SessionStats compute_stats(const std::vector<RoundRecord>& log, const std::vector<std::uint64_t>& sample,
                           const std::vector<std::uint8_t>& sample_alice_bits, int n, double z);

SessionResult run_session(const SessionConfig& config);

std::string round_log_csv(const std::vector<RoundRecord>& log);

}  // namespace qkd
