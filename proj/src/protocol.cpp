#include "qudit_qkd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace qkd {

Stream& RoundStream::at(std::uint64_t round) {
    const std::uint64_t chunk = round / kRoundChunk;
    if (chunk != chunk_) {
        stream_ = substream(seed_, tag_, chunk);
        chunk_ = chunk;
    }
    return stream_;
}

std::vector<PairState> all_pairs(unsigned order) {
    std::vector<PairState> pairs;
    pairs.reserve(order * (order - 1) / 2);
    for (unsigned i = 0; i < order; ++i)
        for (unsigned j = i + 1; j < order; ++j)
            pairs.push_back({static_cast<Elem>(i), static_cast<Elem>(j), 0});
    return pairs;
}

Preparation alice_prepare(const std::vector<PairState>& pairs, RoundStream& alice, std::uint64_t round) {
    Stream& s = alice.at(round);
    PairState p = pairs[uniform_below(s, pairs.size())];
    p.sign = static_cast<std::uint8_t>(uniform_below(s, 2));
    return {p};
}

SparseKet channel_pass(const ChannelModel& model, RoundStream& channel, std::uint64_t round, const SparseKet& ket) {
    return model.transmit(ket, channel.at(round));
}

Measurement bob_measure(const std::vector<PairState>& pairs, RoundStream& bob, std::uint64_t round,
                        const SparseKet& received) {
    Stream& s = bob.at(round);
    Measurement m;
    m.basis = pairs[uniform_below(s, pairs.size())];
    m.outcome = measure(received, m.basis, s);
    switch (m.outcome) {
    case Outcome::Plus: m.bit = 0; break;
    case Outcome::Minus: m.bit = 1; break;
    case Outcome::Outside: m.bit = static_cast<std::uint8_t>(uniform_below(s, 2)); break;
    }
    return m;
}

RoundRecord reconcile(const GaloisField& field, std::uint64_t round, const PairState& alice, const Measurement& bob) {
    RoundRecord r;
    r.round = round;
    r.alice = alice;
    r.bob = bob.basis;
    r.outcome = bob.outcome;
    r.bob_bit = bob.bit;
    r.sifted = alice.same_pair(bob.basis);
    const Elem line = field.add(alice.first, alice.second);
    r.on_line = field.add(bob.basis.first, bob.basis.second) == line;
    if (r.on_line)
        r.offset = field.mul(field.inv(line), field.add(bob.basis.first, alice.first));
    return r;
}

Interval wilson(std::uint64_t k, std::uint64_t n, double z) {
    if (n == 0)
        return {0, 0, 1};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1 + z2 / nn;
    const double center = (p + z2 / (2 * nn)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
    return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

EcEstimate estimate_ec(const std::vector<RoundRecord>& log, EcMode mode) {
    EcEstimate e;
    for (const auto& r : log) {
        if (!r.on_line)
            continue;
        const bool in_pair = r.outcome != Outcome::Outside;
        if (in_pair || mode == EcMode::AnnouncementOnly)
            ++e.denominator;
        if (in_pair && r.offset <= 1)
            ++e.numerator;
    }
    e.defined = e.denominator > 0;
    e.interval = wilson(e.numerator, e.denominator, kZ99);
    return e;
}

PmVerdict check_pm_condition(double e_b, double e_c, int n) {
    if (n < 2)
        throw DomainError("condition needs N >= 4 (n >= 2)");
    const double order = std::ldexp(1.0, n);
    PmVerdict v;
    v.lhs = e_b * e_c + (order - 1) * (1 - e_c) / (order - 2);
    v.pass = v.lhs < 0.5 - kConditionGuard;
    return v;
}

void SessionConfig::validate() const {
    if (n < kMinDegree || n > kMaxDegree)
        throw UsageError("n: field degree must be in [2, 8]");
    if (rounds < 1)
        throw UsageError("rounds: must be >= 1");
    if (!(sample_fraction > 0 && sample_fraction < 1))
        throw UsageError("sample_fraction: must lie in (0, 1)");
    if (threads < 1)
        throw UsageError("threads: must be >= 1");
}

const char* status_name(SessionStatus s) {
    switch (s) {
    case SessionStatus::Ok: return "ok";
    case SessionStatus::InsufficientSift: return "insufficient-sift";
    case SessionStatus::UndefinedEc: return "undefined-e_c";
    }
    return "?";
}

std::vector<std::uint64_t> choose_sample(std::uint64_t seed, std::uint64_t sifted, double fraction) {
    if (sifted == 0)
        return {};
    auto size = static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(sifted)));
    size = std::clamp<std::uint64_t>(size, 1, sifted);
    Stream s = substream(seed, StreamTag::Sample, 0);
    std::vector<std::uint64_t> idx(sifted);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::uint64_t i = 0; i < size; ++i)
        std::swap(idx[i], idx[i + uniform_below(s, sifted - i)]);
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

SessionStats compute_stats(const std::vector<RoundRecord>& log, const std::vector<std::uint64_t>& sample,
                           const std::vector<std::uint8_t>& sample_alice_bits, int n, double z) {
    if (sample.size() != sample_alice_bits.size())
        throw UsageError("sample positions and revealed bits differ in length");
    SessionStats st;
    const unsigned order = 1u << n;
    st.rounds = log.size();
    st.line_counts.assign(order, {0, 0, 0});

    std::vector<const RoundRecord*> sifted;
    for (const auto& r : log) {
        if (r.sifted) {
            sifted.push_back(&r);
            if (r.outcome == Outcome::Outside)
                ++st.sifted_outside;
        }
        if (r.on_line)
            ++st.line_counts[r.offset][static_cast<int>(r.outcome)];
    }
    st.sifted = sifted.size();
    st.sample_size = sample.size();
    st.raw_key_length = st.sifted - st.sample_size;

    for (std::size_t k = 0; k < sample.size(); ++k) {
        if (sample[k] >= sifted.size())
            throw UsageError("sample position beyond the sifted key");
        const RoundRecord& r = *sifted[sample[k]];
        const bool error = r.bob_bit != sample_alice_bits[k];
        st.sample_errors_all += error;
        if (r.outcome != Outcome::Outside) {
            ++st.sample_in_pair;
            st.sample_errors_in_pair += error;
        }
    }
    st.e_b = wilson(st.sample_errors_in_pair, st.sample_in_pair, z);
    st.e_b_defined = st.sample_in_pair > 0;
    st.e_b_all = wilson(st.sample_errors_all, st.sample_size, z);

    st.e_c = estimate_ec(log);
    st.e_c_alt = estimate_ec(log, EcMode::AnnouncementOnly);
    st.e_c.interval = wilson(st.e_c.numerator, st.e_c.denominator, z);
    st.e_c_alt.interval = wilson(st.e_c_alt.numerator, st.e_c_alt.denominator, z);

    if (st.sifted == 0 || !st.e_b_defined)
        st.status = SessionStatus::InsufficientSift;
    else if (!st.e_c.defined)
        st.status = SessionStatus::UndefinedEc;

    if (st.status == SessionStatus::Ok) {
        st.verdict_point = check_pm_condition(st.e_b.value, st.e_c.interval.value, n);
        st.verdict = check_pm_condition(st.e_b.hi, st.e_c.interval.lo, n);
    }
    return st;
}

SessionResult run_session(const SessionConfig& config) {
    config.validate();
    const FieldPtr field = make_field(config.n, config.modulus);
    const ChannelModel model = ChannelModel::parse(config.channel, field);
    const auto pairs = all_pairs(field->order());

    std::vector<RoundRecord> log(config.rounds);
    const std::uint64_t chunks = (config.rounds + kRoundChunk - 1) / kRoundChunk;
    auto work = [&](std::uint64_t first_chunk, std::uint64_t last_chunk) {
        RoundStream alice(config.seed, StreamTag::Alice);
        RoundStream channel(config.seed, StreamTag::Channel);
        RoundStream bob(config.seed, StreamTag::Bob);
        const std::uint64_t end = std::min(config.rounds, last_chunk * kRoundChunk);
        for (std::uint64_t r = first_chunk * kRoundChunk; r < end; ++r) {
            const auto prep = alice_prepare(pairs, alice, r);
            const auto received = channel_pass(model, channel, r, SparseKet::from_pair(prep.state));
            const auto meas = bob_measure(pairs, bob, r, received);
            log[r] = reconcile(*field, r, prep.state, meas);
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::uint64_t>(config.threads, chunks));
    if (threads <= 1) {
        work(0, chunks);
    } else {
        std::vector<std::jthread> pool;
        const std::uint64_t per = (chunks + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint64_t a = t * per;
            const std::uint64_t b = std::min(chunks, a + per);
            if (a < b)
                pool.emplace_back(work, a, b);
        }
    }

    SessionResult result;
    std::vector<std::uint64_t> sifted_rounds;
    for (const auto& r : log) {
        if (r.sifted)
            sifted_rounds.push_back(r.round);
    }
    const auto sample = choose_sample(config.seed, sifted_rounds.size(), config.sample_fraction);
    std::vector<std::uint8_t> revealed;
    revealed.reserve(sample.size());
    for (auto p : sample)
        revealed.push_back(log[sifted_rounds[p]].alice.sign);

    result.stats = compute_stats(log, sample, revealed, config.n, config.z);

    std::size_t next = 0;
    result.alice_key.reserve(sifted_rounds.size() - sample.size());
    result.bob_key.reserve(sifted_rounds.size() - sample.size());
    for (std::uint64_t p = 0; p < sifted_rounds.size(); ++p) {
        if (next < sample.size() && sample[next] == p) {
            ++next;
            continue;
        }
        const auto& r = log[sifted_rounds[p]];
        result.alice_key.push_back(r.alice.sign);
        result.bob_key.push_back(r.bob_bit);
    }
    if (config.keep_log)
        result.log = std::move(log);
    return result;
}

std::string round_log_csv(const std::vector<RoundRecord>& log) {
    std::ostringstream os;
    os << "round,i,j,s,i_prime,j_prime,outcome,sifted,offset\n";
    for (const auto& r : log) {
        os << r.round << ',' << r.alice.first << ',' << r.alice.second << ',' << int(r.alice.sign) << ','
           << r.bob.first << ',' << r.bob.second << ',' << outcome_name(r.outcome) << ',' << (r.sifted ? 1 : 0) << ',';
        if (r.on_line)
            os << r.offset;
        os << '\n';
    }
    return os.str();
}

}  // namespace qkd
