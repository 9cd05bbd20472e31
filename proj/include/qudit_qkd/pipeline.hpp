#pragma once

// In-process end to end run: rounds, sifting and sampling, the parameter
// gate, post-processing parameter choice and the distillation steps. The
// networked roles call the same decision functions so both paths agree.

#include "qudit_qkd/distill.hpp"
#include "qudit_qkd/protocol.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qkd {

using Json = nlohmann::ordered_json;

struct DistillSettings {
    DistillParams params;
    bool auto_params = false;
    /// Output fraction of the placeholder hash; 0 disables it.
    double hash_fraction = 0;

    void validate() const;
};

/// Error matrix implied by measured (e_b, e_c) with e_11 = 0, the choice that
/// minimizes the tolerance function:
///   e01 = e_b e_c, e00 = 1 - e_b e_c - (N-1)(1-e_c)/(N-2), e10 = e_c - e00 - e01,
/// normalized by e_c and clamped to nonnegative entries.
ErrorMatrix estimated_matrix(double e_b, double e_c, int n);

struct GateDecision {
    bool pass = false;
    /// Empty on pass; otherwise the abort reason announced to the peer.
    std::string reason;
    DistillParams params;
    std::optional<Selection> selection;
    ErrorMatrix matrix;
};

inline constexpr const char* kReasonCondition = "condition-2-failed";

/// Gate on the pessimistic interval ends, then fixes (k, r) (explicit or
/// auto) and checks the raw key is long enough for 2^k r.
GateDecision decide(const SessionStats& stats, int n, const DistillSettings& settings, std::size_t raw_key_length);

struct PipelineResult {
    SessionResult session;
    GateDecision gate;
    std::optional<DistillOutcome> distill;
    std::vector<std::uint8_t> final_alice;
    std::vector<std::uint8_t> final_bob;
    /// 0 complete, 2 aborted by a protocol condition.
    int exit_code = 0;
};

/// Seeds for the post-processing stages, derived from the master seed.
std::uint64_t distill_seed(std::uint64_t master);
std::uint64_t hash_seed(std::uint64_t master);

PipelineResult run_pipeline(const SessionConfig& config, const DistillSettings& settings);

/// Final bits after the optional placeholder hash.
std::vector<std::uint8_t> finish_key(std::vector<std::uint8_t> bits, double hash_fraction, std::uint64_t seed);

Json to_json(const Interval& i);
Json to_json(const SessionStats& s);
Json to_json(const SessionConfig& c);
Json to_json(const DistillParams& p);
Json to_json(const ErrorMatrix& m);
Json to_json(const Selection& s);
std::string bit_string(const std::vector<std::uint8_t>& bits);

}  // namespace qkd
