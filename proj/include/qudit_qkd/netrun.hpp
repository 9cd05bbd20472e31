#pragma once

// Networked protocol roles. Alice and Bob run lockstep state machines over a
// framed link; an optional Eve middlebox sits between them, forwards classical
// frames untouched and applies its channel model to every QUDIT frame.
//
// Message sequence (A = Alice, B = Bob):
//   A->B HELLO, B->A HELLO (or ABORT "config-mismatch")
//   per round: A->B QUDIT, A->B PAIR_ANNOUNCE, B->A PAIR_ANNOUNCE,
//              B->A OUTCOME_ANNOUNCE when Bob's pair is on Alice's line but
//              differs from it
//   B->A SIFT_ACCEPT, A->B SAMPLE_REVEAL, B->A VERDICT (estimate, gate, k, r)
//   on gate failure: B->A ABORT(reason), A->B ABORT(reason)
//   k times: A->B PARITY_ROUND, B->A PARITY_ROUND
//   A->B BLOCK_PARITY, B->A BLOCK_PARITY
//   A->B VERDICT (final), B->A VERDICT (final)

#include "qudit_qkd/pipeline.hpp"
#include "qudit_qkd/transport.hpp"

#include <string>
#include <vector>

namespace qkd::net {

enum class Role { Alice, Bob, Eve };

const char* role_name(Role r);
Role parse_role(const std::string& s);

struct RoleConfig {
    Role role = Role::Alice;
    SessionConfig session;
    DistillSettings distill;
    std::string listen;
    std::string connect_alice;
    std::string connect_bob;
    std::string report_path;
    std::string transcript_path;
    /// Eve only: per-round CSV of the sampled channel term.
    std::string eve_log_path;
    int connect_timeout_ms = 15000;
};

inline constexpr const char* kReasonProtocol = "protocol-error";
inline constexpr const char* kReasonMismatch = "config-mismatch";
inline constexpr const char* kReasonDisconnect = "peer-disconnected";

struct RoleReport {
    Role role = Role::Alice;
    /// "complete", "aborted" (protocol condition) or "error".
    std::string status = "error";
    std::string reason;
    int exit_code = 1;
    /// Final key (Alice/Bob only).
    std::vector<std::uint8_t> final_key;
    std::vector<TranscriptEntry> transcript;
    /// Eve only: channel term sampled for each relayed QUDIT.
    std::vector<std::uint32_t> eve_terms;
    Json detail;

    Json to_json() const;
};

/// Parameters both endpoints must agree on.
Json handshake(const RoleConfig& cfg);

RoleReport run_alice(const RoleConfig& cfg, FramedLink& bob);
RoleReport run_bob(const RoleConfig& cfg, FramedLink& alice);
/// Relays until both sides close; each direction on its own thread.
RoleReport run_eve(const RoleConfig& cfg, FramedLink& alice, FramedLink& bob);

/// Opens the TCP connections named in cfg, runs the role and writes the
/// report and transcript files.
RoleReport run_role(const RoleConfig& cfg);

void write_outputs(const RoleConfig& cfg, const RoleReport& report);

}  // namespace qkd::net
