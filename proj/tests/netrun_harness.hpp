#pragma once

// In-process wiring of the networked roles over loopback streams.

#include "qudit_qkd/netrun.hpp"

#include <optional>
#include <thread>

namespace harness {

using namespace qkd;
using namespace qkd::net;

struct Trio {
    RoleReport alice, bob;
    std::optional<RoleReport> eve;
};

inline RoleConfig role_config(Role role, const SessionConfig& s, const DistillSettings& d) {
    RoleConfig c;
    c.role = role;
    c.session = s;
    c.distill = d;
    return c;
}

/// Alice and Bob, optionally with Eve relaying between them.
inline Trio run_trio(const RoleConfig& a, const RoleConfig& b, const std::optional<RoleConfig>& e = std::nullopt) {
    Trio out;
    if (!e) {
        auto [x, y] = loopback_pair();
        FramedLink to_bob(std::move(x), "bob", true), to_alice(std::move(y), "alice", true);
        std::thread tb([&] { out.bob = run_bob(b, to_alice); });
        out.alice = run_alice(a, to_bob);
        tb.join();
        return out;
    }
    auto [a_side, eve_a] = loopback_pair();
    auto [eve_b, b_side] = loopback_pair();
    FramedLink alice_link(std::move(a_side), "eve", true), bob_link(std::move(b_side), "eve", true);
    FramedLink eve_alice(std::move(eve_a), "alice", false), eve_bob(std::move(eve_b), "bob", false);
    std::thread te([&] { out.eve = run_eve(*e, eve_alice, eve_bob); });
    std::thread tb([&] { out.bob = run_bob(b, bob_link); });
    out.alice = run_alice(a, alice_link);
    tb.join();
    te.join();
    return out;
}

/// Runs one role against a scripted peer that writes `bytes` and then closes.
inline RoleReport run_against(Role role, const RoleConfig& cfg, const std::vector<std::uint8_t>& bytes) {
    auto [mine, theirs] = loopback_pair();
    theirs->write(bytes);
    theirs->shutdown_write();
    FramedLink link(std::move(mine), "peer", true);
    RoleReport rep = role == Role::Alice ? run_alice(cfg, link) : run_bob(cfg, link);
    return rep;
}

/// Eve between two scripted peers.
inline RoleReport run_eve_against(const RoleConfig& cfg, const std::vector<std::uint8_t>& from_alice,
                                  const std::vector<std::uint8_t>& from_bob) {
    auto [eve_a, alice] = loopback_pair();
    auto [eve_b, bob] = loopback_pair();
    alice->write(from_alice);
    alice->shutdown_write();
    bob->write(from_bob);
    bob->shutdown_write();
    FramedLink la(std::move(eve_a), "alice", false), lb(std::move(eve_b), "bob", false);
    return run_eve(cfg, la, lb);
}

/// Encoded bytes of the frames one side received, in order.
inline std::vector<std::uint8_t> received_bytes(const RoleReport& r) {
    std::vector<std::uint8_t> out;
    for (const auto& e : r.transcript)
        if (e.direction == Direction::Received) {
            const auto b = wire::encode(e.frame);
            out.insert(out.end(), b.begin(), b.end());
        }
    return out;
}

}  // namespace harness
