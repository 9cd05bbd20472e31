#include "qudit_qkd/netrun.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace qkd::net {

namespace {

using wire::Frame;
using wire::MsgType;
using wire::ProtocolError;

/// The peer sent ABORT.
struct PeerAbort {
    std::string reason;
};

/// This side decided to stop on a protocol condition.
struct LocalAbort {
    std::string reason;
};

Frame expect(FramedLink& link, MsgType type) {
    Frame f = link.receive();
    if (f.type == MsgType::Abort && type != MsgType::Abort)
        throw PeerAbort{wire::parse_text(f)};
    if (f.type != type)
        throw ProtocolError(std::string("expected ") + wire::type_name(type) + ", got " + wire::type_name(f.type));
    return f;
}

Json parse_json(const Frame& f) {
    Json j = Json::parse(wire::parse_text(f), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ProtocolError(std::string(wire::type_name(f.type)) + " payload is not a JSON object");
    return j;
}

template <class T>
T json_field(const Json& j, const char* key) {
    if (!j.contains(key))
        throw ProtocolError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ProtocolError(std::string("bad field '") + key + "'");
    }
}

/// Gate reasons are expected outcomes (exit 2); anything else is an error.
bool condition_reason(const std::string& reason) {
    return reason == kReasonCondition || reason == "insufficient-sift" || reason == "undefined-e_c" ||
           reason == "insufficient-key" || reason == "no-feasible-parameters";
}

void try_send(FramedLink& link, const Frame& f) {
    try {
        link.send(f);
    } catch (const std::exception&) {
    }
}

/// Best effort: wait for the peer's closing ABORT or end of stream.
void drain(FramedLink& link) {
    try {
        for (;;) {
            if (link.receive().type == MsgType::Abort)
                return;
        }
    } catch (const std::exception&) {
    }
}

void finish_report(RoleReport& rep, const char* status, std::string reason, int code) {
    rep.status = status;
    rep.reason = std::move(reason);
    rep.exit_code = code;
}

/// Shared failure handling for the two endpoints.
template <class Body>
RoleReport run_endpoint(Role role, FramedLink& link, Body&& body) {
    RoleReport rep;
    rep.role = role;
    rep.detail = Json::object();
    try {
        body(rep);
        finish_report(rep, "complete", "", 0);
    } catch (const LocalAbort& a) {
        try_send(link, wire::text(MsgType::Abort, a.reason));
        if (condition_reason(a.reason))
            drain(link);
        finish_report(rep, "aborted", a.reason, condition_reason(a.reason) ? 2 : 1);
    } catch (const PeerAbort& a) {
        if (condition_reason(a.reason))
            try_send(link, wire::text(MsgType::Abort, a.reason));
        finish_report(rep, "aborted", a.reason, condition_reason(a.reason) ? 2 : 1);
        rep.detail["aborted_by_peer"] = true;
    } catch (const ProtocolError& e) {
        try_send(link, wire::text(MsgType::Abort, kReasonProtocol));
        finish_report(rep, "error", kReasonProtocol, 1);
        rep.detail["error"] = e.what();
    } catch (const TransportError& e) {
        finish_report(rep, "error", kReasonDisconnect, 1);
        rep.detail["error"] = e.what();
    } catch (const std::exception& e) {
        try_send(link, wire::text(MsgType::Abort, kReasonProtocol));
        finish_report(rep, "error", "internal-error", 1);
        rep.detail["error"] = e.what();
    }
    link.close_write();
    rep.transcript = link.transcript();
    return rep;
}

void check_rounds(const RoleConfig& cfg) {
    cfg.session.validate();
    cfg.distill.validate();
    if (cfg.session.rounds > std::numeric_limits<std::uint32_t>::max())
        throw UsageError("rounds: netrun supports at most 2^32 - 1 rounds");
}

std::vector<std::uint8_t> drop_sample(const std::vector<std::uint8_t>& sifted_bits,
                                      const std::vector<std::uint64_t>& sample) {
    std::vector<std::uint8_t> key;
    key.reserve(sifted_bits.size() - sample.size());
    std::size_t next = 0;
    for (std::uint64_t p = 0; p < sifted_bits.size(); ++p) {
        if (next < sample.size() && sample[next] == p) {
            ++next;
            continue;
        }
        key.push_back(sifted_bits[p]);
    }
    return key;
}

}  // namespace

const char* role_name(Role r) {
    switch (r) {
    case Role::Alice: return "alice";
    case Role::Bob: return "bob";
    case Role::Eve: return "eve";
    }
    return "?";
}

Role parse_role(const std::string& s) {
    if (s == "alice")
        return Role::Alice;
    if (s == "bob")
        return Role::Bob;
    if (s == "eve")
        return Role::Eve;
    throw UsageError("role: expected alice, bob or eve, got '" + s + "'");
}

Json RoleReport::to_json() const {
    Json j;
    j["role"] = role_name(role);
    j["status"] = status;
    j["reason"] = reason;
    j["exit_code"] = exit_code;
    if (role != Role::Eve) {
        j["final_key_length"] = final_key.size();
        j["final_key"] = bit_string(final_key);
    }
    for (auto it = detail.begin(); it != detail.end(); ++it)
        j[it.key()] = it.value();
    return j;
}

Json handshake(const RoleConfig& cfg) {
    const auto field = make_field(cfg.session.n, cfg.session.modulus);
    const auto& p = cfg.distill.params;
    Json j;
    j["protocol"] = "qudit-qkd/1";
    j["n"] = cfg.session.n;
    j["modulus"] = field->modulus();
    j["rounds"] = cfg.session.rounds;
    j["sample_fraction"] = cfg.session.sample_fraction;
    j["z"] = cfg.session.z;
    j["auto_params"] = cfg.distill.auto_params;
    j["k"] = p.k;
    j["r"] = p.r;
    j["css_target"] = p.css_target;
    j["z_budget"] = p.z_budget;
    j["margin"] = p.margin;
    j["k_max"] = p.k_max;
    j["r_max"] = p.r_max;
    j["hash_fraction"] = cfg.distill.hash_fraction;
    return j;
}

RoleReport run_alice(const RoleConfig& cfg, FramedLink& bob) {
    return run_endpoint(Role::Alice, bob, [&](RoleReport& rep) {
        check_rounds(cfg);
        const auto& sc = cfg.session;
        const FieldPtr field = make_field(sc.n, sc.modulus);
        const unsigned order = field->order();
        const auto pairs = all_pairs(order);
        const Json mine = handshake(cfg);
        rep.detail["config"] = mine;
        rep.detail["seed"] = sc.seed;

        bob.send(wire::text(MsgType::Hello, mine.dump()));
        if (parse_json(expect(bob, MsgType::Hello)) != mine)
            throw LocalAbort{kReasonMismatch};

        RoundStream stream(sc.seed, StreamTag::Alice);
        std::vector<std::uint32_t> sifted_rounds;
        std::vector<std::uint8_t> sifted_bits;
        std::uint64_t rejected_on_line = 0;
        for (std::uint64_t r = 0; r < sc.rounds; ++r) {
            const auto prep = alice_prepare(pairs, stream, r);
            bob.send(wire::qudit(SparseKet::from_pair(prep.state)));
            bob.send(wire::pair_announce(prep.state));
            const auto bp = wire::parse_pair(expect(bob, MsgType::PairAnnounce), order);
            const PairState theirs{bp.i, bp.j, 0};
            const bool sifted = prep.state.same_pair(theirs);
            const bool on_line = field->add(bp.i, bp.j) == field->add(prep.state.first, prep.state.second);
            if (on_line && !sifted) {
                const auto om = wire::parse_outcome(expect(bob, MsgType::OutcomeAnnounce), order);
                if (om.i != bp.i || om.j != bp.j)
                    throw ProtocolError("OUTCOME_ANNOUNCE pair differs from the announced pair");
                ++rejected_on_line;
            }
            if (sifted) {
                sifted_rounds.push_back(static_cast<std::uint32_t>(r));
                sifted_bits.push_back(prep.state.sign);
            }
            rep.detail["rounds_completed"] = r + 1;
        }
        rep.detail["sifted"] = sifted_rounds.size();
        rep.detail["rejected_on_line"] = rejected_on_line;

        if (wire::parse_sift(expect(bob, MsgType::SiftAccept)) != sifted_rounds)
            throw ProtocolError("SIFT_ACCEPT disagrees with the announced pairs");

        const auto sample = choose_sample(sc.seed, sifted_rounds.size(), sc.sample_fraction);
        std::vector<std::uint32_t> positions(sample.begin(), sample.end());
        std::vector<std::uint8_t> revealed;
        for (auto p : sample)
            revealed.push_back(sifted_bits[p]);
        bob.send(wire::sample_reveal(positions, revealed));
        std::vector<std::uint8_t> key = drop_sample(sifted_bits, sample);
        rep.detail["sample_size"] = sample.size();
        rep.detail["raw_key_length"] = key.size();

        const Json verdict = parse_json(expect(bob, MsgType::Verdict));
        rep.detail["verdict"] = verdict;
        if (!json_field<bool>(verdict, "pass")) {
            // Bob follows a failing verdict with ABORT(reason).
            const Frame f = bob.receive();
            if (f.type == MsgType::Abort)
                throw PeerAbort{wire::parse_text(f)};
            throw ProtocolError("expected ABORT after a failing VERDICT");
        }
        DistillParams params = cfg.distill.params;
        params.k = json_field<unsigned>(verdict, "k");
        params.r = json_field<unsigned>(verdict, "r");
        if (params.r % 2 == 0 || params.k > params.k_max ||
            static_cast<double>(key.size()) < std::ldexp(1.0, static_cast<int>(params.k)) * params.r)
            throw ProtocolError("VERDICT parameters unusable for this key");

        const std::uint64_t dseed = distill_seed(sc.seed);
        Json lengths = Json::array({key.size()});
        for (unsigned round = 0; round < params.k; ++round) {
            const std::uint64_t seed = parity_round_seed(dseed, round);
            const auto perm = seeded_permutation(key.size(), seed);
            wire::ParityMsg msg{seed, pair_parities(key, perm)};
            bob.send(wire::parity_round(msg));
            const auto reply = wire::parse_parity(expect(bob, MsgType::ParityRound));
            if (reply.seed != seed || reply.parities.size() != msg.parities.size())
                throw ProtocolError("PARITY_ROUND reply does not match the announced round");
            key = keep_agreeing(key, perm, msg.parities, reply.parities);
            lengths.push_back(key.size());
        }
        rep.detail["length_after_round"] = lengths;

        const wire::BlockMsg block{params.r, block_seed(dseed)};
        bob.send(wire::block_parity(block));
        const auto echo = wire::parse_block(expect(bob, MsgType::BlockParity));
        if (echo.r != block.r || echo.seed != block.seed)
            throw ProtocolError("BLOCK_PARITY echo differs");
        if (params.r > 1)
            key = block_parities(key, seeded_permutation(key.size(), block.seed), params.r);

        const std::uint64_t hseed = hash_seed(sc.seed);
        rep.final_key = finish_key(std::move(key), cfg.distill.hash_fraction, hseed);
        Json fin{{"stage", "final"}, {"length", rep.final_key.size()}, {"hash_seed", hseed}};
        bob.send(wire::text(MsgType::Verdict, fin.dump()));
        const Json theirs = parse_json(expect(bob, MsgType::Verdict));
        if (json_field<std::uint64_t>(theirs, "length") != rep.final_key.size())
            throw ProtocolError("final key lengths differ");
        rep.detail["params"] = to_json(params);
    });
}

RoleReport run_bob(const RoleConfig& cfg, FramedLink& alice) {
    return run_endpoint(Role::Bob, alice, [&](RoleReport& rep) {
        check_rounds(cfg);
        const auto& sc = cfg.session;
        const FieldPtr field = make_field(sc.n, sc.modulus);
        const unsigned order = field->order();
        const auto pairs = all_pairs(order);
        const Json mine = handshake(cfg);
        rep.detail["config"] = mine;
        rep.detail["seed"] = sc.seed;

        if (parse_json(expect(alice, MsgType::Hello)) != mine)
            throw LocalAbort{kReasonMismatch};
        alice.send(wire::text(MsgType::Hello, mine.dump()));

        RoundStream stream(sc.seed, StreamTag::Bob);
        std::vector<RoundRecord> log;
        log.reserve(sc.rounds);
        for (std::uint64_t r = 0; r < sc.rounds; ++r) {
            const auto ket = wire::parse_qudit(expect(alice, MsgType::Qudit), order);
            const auto ap = wire::parse_pair(expect(alice, MsgType::PairAnnounce), order);
            const auto meas = bob_measure(pairs, stream, r, ket);
            alice.send(wire::pair_announce(meas.basis));
            const auto rec = reconcile(*field, r, PairState{ap.i, ap.j, 0}, meas);
            if (rec.on_line && !rec.sifted)
                alice.send(wire::outcome_announce(meas.basis, meas.outcome));
            log.push_back(rec);
            rep.detail["rounds_completed"] = r + 1;
        }

        std::vector<std::uint32_t> sifted_rounds;
        std::vector<std::uint8_t> sifted_bits;
        for (const auto& rec : log) {
            if (rec.sifted) {
                sifted_rounds.push_back(static_cast<std::uint32_t>(rec.round));
                sifted_bits.push_back(rec.bob_bit);
            }
        }
        alice.send(wire::sift_accept(sifted_rounds));

        const auto [positions, bits] = wire::parse_sample(expect(alice, MsgType::SampleReveal));
        if (!positions.empty() && positions.back() >= sifted_rounds.size())
            throw ProtocolError("SAMPLE_REVEAL position beyond the sifted key");
        const std::vector<std::uint64_t> sample(positions.begin(), positions.end());
        const SessionStats stats = compute_stats(log, sample, bits, sc.n, sc.z);
        std::vector<std::uint8_t> key = drop_sample(sifted_bits, sample);
        const GateDecision gate = decide(stats, sc.n, cfg.distill, key.size());
        rep.detail["stats"] = to_json(stats);
        rep.detail["estimated_matrix"] = to_json(gate.matrix);

        Json verdict{{"stage", "estimate"},
                     {"pass", gate.pass},
                     {"reason", gate.reason},
                     {"k", gate.params.k},
                     {"r", gate.params.r},
                     {"e_b", stats.e_b.value},
                     {"e_c", stats.e_c.interval.value},
                     {"stats", to_json(stats)}};
        alice.send(wire::text(MsgType::Verdict, verdict.dump()));
        if (!gate.pass)
            throw LocalAbort{gate.reason};

        const DistillParams& params = gate.params;
        Json lengths = Json::array({key.size()});
        for (unsigned round = 0; round < params.k; ++round) {
            const auto msg = wire::parse_parity(expect(alice, MsgType::ParityRound));
            const auto perm = seeded_permutation(key.size(), msg.seed);
            wire::ParityMsg reply{msg.seed, pair_parities(key, perm)};
            if (reply.parities.size() != msg.parities.size())
                throw ProtocolError("PARITY_ROUND pair count differs from the local key");
            alice.send(wire::parity_round(reply));
            key = keep_agreeing(key, perm, reply.parities, msg.parities);
            lengths.push_back(key.size());
        }
        rep.detail["length_after_round"] = lengths;

        const auto block = wire::parse_block(expect(alice, MsgType::BlockParity));
        if (block.r != params.r)
            throw ProtocolError("BLOCK_PARITY r differs from the agreed r");
        alice.send(wire::block_parity(block));
        if (params.r > 1)
            key = block_parities(key, seeded_permutation(key.size(), block.seed), params.r);

        const Json fin = parse_json(expect(alice, MsgType::Verdict));
        rep.final_key = finish_key(std::move(key), cfg.distill.hash_fraction,
                                   json_field<std::uint64_t>(fin, "hash_seed"));
        if (json_field<std::uint64_t>(fin, "length") != rep.final_key.size())
            throw ProtocolError("final key lengths differ");
        alice.send(wire::text(MsgType::Verdict, Json{{"stage", "final"}, {"length", rep.final_key.size()}}.dump()));
        rep.detail["params"] = to_json(params);
    });
}

RoleReport run_eve(const RoleConfig& cfg, FramedLink& alice, FramedLink& bob) {
    RoleReport rep;
    rep.role = Role::Eve;
    rep.detail = Json::object();

    FieldPtr field;
    std::optional<ChannelModel> model;
    try {
        check_rounds(cfg);
        field = make_field(cfg.session.n, cfg.session.modulus);
        model.emplace(ChannelModel::parse(cfg.session.channel, field));
    } catch (const std::exception& e) {
        alice.close_write();
        bob.close_write();
        finish_report(rep, "error", "internal-error", 1);
        rep.detail["error"] = e.what();
        return rep;
    }

    std::mutex to_alice_mu, to_bob_mu, state_mu;
    std::string failure;
    std::string failure_reason;
    std::atomic<std::uint64_t> relayed_up{0}, relayed_down{0};

    auto fail = [&](const std::string& reason, const std::string& what) {
        std::lock_guard lock(state_mu);
        if (failure_reason.empty()) {
            failure_reason = reason;
            failure = what;
        }
    };
    auto abort_both = [&](const std::string& reason) {
        {
            std::lock_guard lock(to_alice_mu);
            try_send(alice, wire::text(MsgType::Abort, reason));
        }
        std::lock_guard lock(to_bob_mu);
        try_send(bob, wire::text(MsgType::Abort, reason));
    };

    const Json expected_n{{"n", cfg.session.n}, {"modulus", field->modulus()}};
    // Alice -> Bob: inspect HELLO, transform QUDIT, forward the rest.
    std::thread up([&] {
        RoundStream stream(cfg.session.seed, StreamTag::Channel);
        std::uint64_t round = 0;
        try {
            for (;;) {
                Frame f = alice.receive();
                if (f.type == MsgType::Hello) {
                    const Json hello = parse_json(f);
                    if (hello.value("n", -1) != cfg.session.n || hello.value("modulus", 0u) != field->modulus()) {
                        fail(kReasonMismatch, "HELLO field parameters differ from the middlebox channel field");
                        abort_both(kReasonMismatch);
                        break;
                    }
                } else if (f.type == MsgType::Qudit) {
                    const auto ket = wire::parse_qudit(f, field->order());
                    Stream& s = stream.at(round);
                    const std::size_t term = model->sample_term(s);
                    f = wire::qudit(model->apply_term(term, ket, s));
                    rep.eve_terms.push_back(static_cast<std::uint32_t>(term));
                    ++round;
                }
                std::lock_guard lock(to_bob_mu);
                bob.send(f);
                ++relayed_up;
            }
        } catch (const PeerClosed&) {
        } catch (const ProtocolError& e) {
            fail(kReasonProtocol, e.what());
            abort_both(kReasonProtocol);
        } catch (const std::exception& e) {
            fail(kReasonDisconnect, e.what());
        }
        std::lock_guard lock(to_bob_mu);
        bob.close_write();
    });
    // Bob -> Alice: forward unchanged.
    std::thread down([&] {
        try {
            for (;;) {
                Frame f = bob.receive();
                std::lock_guard lock(to_alice_mu);
                alice.send(f);
                ++relayed_down;
            }
        } catch (const PeerClosed&) {
        } catch (const ProtocolError& e) {
            fail(kReasonProtocol, e.what());
            abort_both(kReasonProtocol);
        } catch (const std::exception& e) {
            fail(kReasonDisconnect, e.what());
        }
        std::lock_guard lock(to_alice_mu);
        alice.close_write();
    });
    up.join();
    down.join();

    if (failure_reason.empty())
        finish_report(rep, "complete", "", 0);
    else
        finish_report(rep, "error", failure_reason, 1);
    if (!failure.empty())
        rep.detail["error"] = failure;
    rep.detail["channel"] = cfg.session.channel;
    rep.detail["qudits_relayed"] = rep.eve_terms.size();
    rep.detail["frames_alice_to_bob"] = relayed_up.load();
    rep.detail["frames_bob_to_alice"] = relayed_down.load();
    std::vector<std::uint64_t> counts(model->terms().size(), 0);
    for (auto t : rep.eve_terms)
        ++counts[t];
    rep.detail["term_counts"] = counts;
    return rep;
}

void write_outputs(const RoleConfig& cfg, const RoleReport& report) {
    if (!cfg.report_path.empty()) {
        std::ofstream out(cfg.report_path);
        if (!out)
            throw UsageError("report: cannot write " + cfg.report_path);
        out << report.to_json().dump(2) << '\n';
    }
    if (!cfg.transcript_path.empty() && report.role != Role::Eve) {
        std::ofstream out(cfg.transcript_path);
        if (!out)
            throw UsageError("transcript: cannot write " + cfg.transcript_path);
        out << transcript_text(report.transcript);
    }
    if (!cfg.eve_log_path.empty() && report.role == Role::Eve) {
        std::ofstream out(cfg.eve_log_path);
        if (!out)
            throw UsageError("eve log: cannot write " + cfg.eve_log_path);
        out << "round,term\n";
        for (std::size_t r = 0; r < report.eve_terms.size(); ++r)
            out << r << ',' << report.eve_terms[r] << '\n';
    }
}

RoleReport run_role(const RoleConfig& cfg) {
    RoleReport rep;
    rep.role = cfg.role;
    try {
        const bool record = cfg.role != Role::Eve && !cfg.transcript_path.empty();
        const int accept_timeout = 4 * cfg.connect_timeout_ms;
        std::unique_ptr<TcpListener> listener;
        if (!cfg.listen.empty())
            listener = std::make_unique<TcpListener>(parse_endpoint(cfg.listen));
        auto open = [&](const std::string& connect, const char* peer) -> StreamPtr {
            if (!connect.empty())
                return tcp_connect(parse_endpoint(connect), cfg.connect_timeout_ms);
            if (!listener)
                throw UsageError(std::string("netrun: need --listen or a connect address for ") + peer);
            return listener->accept(accept_timeout);
        };
        switch (cfg.role) {
        case Role::Alice: {
            FramedLink link(open(cfg.connect_bob, "bob"), "bob", record);
            rep = run_alice(cfg, link);
            break;
        }
        case Role::Bob: {
            FramedLink link(open(cfg.connect_alice, "alice"), "alice", record);
            rep = run_bob(cfg, link);
            break;
        }
        case Role::Eve: {
            if (cfg.connect_alice.empty() && cfg.connect_bob.empty())
                throw UsageError("netrun: eve needs --connect-alice or --connect-bob");
            // Connect outward first so an accepting peer is not left waiting.
            StreamPtr to_bob, to_alice;
            if (!cfg.connect_bob.empty())
                to_bob = open(cfg.connect_bob, "bob");
            if (!cfg.connect_alice.empty())
                to_alice = open(cfg.connect_alice, "alice");
            if (!to_bob)
                to_bob = open("", "bob");
            if (!to_alice)
                to_alice = open("", "alice");
            FramedLink a(std::move(to_alice), "alice", false);
            FramedLink b(std::move(to_bob), "bob", false);
            rep = run_eve(cfg, a, b);
            break;
        }
        }
    } catch (const TransportError& e) {
        finish_report(rep, "error", kReasonDisconnect, 1);
        rep.detail = Json{{"error", e.what()}};
    }
    write_outputs(cfg, rep);
    return rep;
}

}  // namespace qkd::net
