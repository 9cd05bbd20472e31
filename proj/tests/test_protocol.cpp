#include "doctest.h"
#include "gen.hpp"

#include "qudit_qkd/analysis.hpp"
#include "qudit_qkd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace qkd;

namespace {

SessionConfig config(int n, std::uint64_t rounds, const std::string& channel, std::uint64_t seed) {
    SessionConfig c;
    c.n = n;
    c.rounds = rounds;
    c.channel = channel;
    c.seed = seed;
    return c;
}

bool covers(std::uint64_t k, std::uint64_t n, double p, double z) {
    const Interval i = wilson(k, n, z);
    return i.lo - 1e-12 <= p && p <= i.hi + 1e-12;
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("pairs enumeration") {
    const auto pairs = all_pairs(8);
    CHECK(pairs.size() == 28);
    for (const auto& p : pairs)
        CHECK(p.first < p.second);
    CHECK(std::adjacent_find(pairs.begin(), pairs.end(), [](const PairState& a, const PairState& b) {
              return a.first == b.first && a.second == b.second;
          }) == pairs.end());
}

TEST_CASE("identity channel: keys identical for every seed") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SessionResult r = run_session(config(seed % 2 ? 2 : 3, 20000, "identity", seed));
        CHECK(r.alice_key == r.bob_key);
        CHECK(r.stats.status == SessionStatus::Ok);
        CHECK(r.stats.sample_errors_all == 0);
        CHECK(r.stats.e_b.value == 0);
        CHECK(r.stats.e_c.interval.value == 1);
        CHECK(r.stats.verdict.pass);
        CHECK(r.stats.sifted_outside == 0);
    }
}

TEST_CASE("pm condition examples") {
    CHECK(check_pm_condition(0, 1, 2).pass);
    CHECK(check_pm_condition(0, 1, 2).lhs == 0);
    CHECK_FALSE(check_pm_condition(0.5, 1, 2).pass);
    CHECK_FALSE(check_pm_condition(0.3, 5.0 / 6.0, 2).pass);
    CHECK(check_pm_condition(0.3, 5.0 / 6.0, 2).lhs == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(check_pm_condition(0.3, 0.9, 2).pass);
    CHECK_THROWS_AS(check_pm_condition(0.1, 1, 1), DomainError);
}

TEST_CASE("estimate_ec on hand-built logs") {
    std::vector<RoundRecord> log(3);
    for (auto& r : log) {
        r.on_line = true;
        r.outcome = Outcome::Outside;
    }
    CHECK_FALSE(estimate_ec(log).defined);
    CHECK(estimate_ec(log, EcMode::AnnouncementOnly).defined);
    log[0].outcome = Outcome::Plus;
    log[0].offset = 0;
    log[1].outcome = Outcome::Minus;
    log[1].offset = 2;
    const EcEstimate e = estimate_ec(log);
    REQUIRE(e.defined);
    CHECK(e.numerator == 1);
    CHECK(e.denominator == 2);
}

TEST_CASE("wilson interval sanity") {
    const Interval a = wilson(0, 100, kZ99);
    CHECK(a.lo == 0);
    CHECK(a.hi > 0);
    const Interval b = wilson(50, 100, kZ99);
    CHECK(b.value == 0.5);
    CHECK(b.lo == doctest::Approx(1 - b.hi));
    const Interval c = wilson(100, 100, kZ99);
    CHECK(c.hi == doctest::Approx(1));
    CHECK(wilson(500, 1000, kZ99).half_width() < b.half_width());
}

TEST_CASE("sift rate is 1/C within 4 sigma") {
    for (int n : {2, 3}) {
        const SessionResult r = run_session(config(n, 200000, "identity", 5));
        const double N = 1 << n;
        const double p = 2 / (N * (N - 1));
        const double sd = std::sqrt(200000 * p * (1 - p));
        CHECK(std::abs(static_cast<double>(r.stats.sifted) - 200000 * p) < 4 * sd);
        CHECK(r.stats.raw_key_length + r.stats.sample_size == r.stats.sifted);
    }
}

TEST_CASE("thread count does not change the result") {
    SessionConfig c = config(3, 30000, "z_flip:0.2", 99);
    const SessionResult one = run_session(c);
    c.threads = 3;
    const SessionResult three = run_session(c);
    CHECK(one.alice_key == three.alice_key);
    CHECK(one.bob_key == three.bob_key);
    CHECK(round_log_csv(one.log) == round_log_csv(three.log));
    CHECK(one.stats.sample_errors_in_pair == three.stats.sample_errors_in_pair);
}

TEST_CASE("Monte Carlo agrees with the analytic prediction within 3 sigma") {
    const char* channels[] = {"z_flip:0.1", "shift_noise:1", "shift_noise:0.3", "partial_intercept:0.4",
                              "custom:[(0.8,a=0,f=0x0),(0.2,a=3,f=0x6)]"};
    for (const char* ch : channels) {
        SessionConfig c = config(2, 300000, ch, 1234);
        c.sample_fraction = 0.5;
        const SessionResult r = run_session(c);
        const Observables o = predict_channel(ChannelModel::parse(ch, make_field(2)));
        INFO(ch);
        REQUIRE(r.stats.e_c.defined);
        CHECK(covers(r.stats.e_c.numerator, r.stats.e_c.denominator, to_double(o.e_c), 3));
        if (r.stats.sample_in_pair > 0)
            CHECK(covers(r.stats.sample_errors_in_pair, r.stats.sample_in_pair, to_double(o.e_b), 3));
    }
}

TEST_CASE("e_b estimator is unbiased over seeds") {
    std::vector<double> est;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        SessionConfig c = config(2, 20000, "z_flip:0.3", seed * 7919);
        c.sample_fraction = 0.5;
        est.push_back(run_session(c).stats.e_b.value);
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
    double var = 0;
    for (double x : est)
        var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / (est.size() - 1));
    CHECK(std::abs(mean - 0.15) < 4 * sd / std::sqrt(static_cast<double>(est.size())));
}

TEST_CASE("full dephase fails the gate") {
    const SessionResult r = run_session(config(2, 200000, "full_dephase", 3));
    CHECK_FALSE(r.stats.verdict.pass);
    CHECK(std::abs(r.stats.e_b.value - 0.5) < 0.05);
    CHECK(r.stats.e_c.interval.value == 1);
}

TEST_CASE("tiny sessions report insufficient sift instead of failing") {
    int insufficient = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const SessionResult r = run_session(config(4, 1, "identity", seed));
        CHECK(r.stats.rounds == 1);
        insufficient += r.stats.status == SessionStatus::InsufficientSift;
        CHECK_FALSE(r.stats.verdict.pass);
    }
    CHECK(insufficient > 0);
}

TEST_CASE("choose_sample is sorted, unique and sized") {
    Stream s = gen::stream(41);
    for (int it = 0; it < 200; ++it) {
        const std::uint64_t sifted = uniform_below(s, 5000);
        const double frac = 0.01 + 0.98 * uniform_unit(s);
        const auto sample = choose_sample(it, sifted, frac);
        CHECK(std::is_sorted(sample.begin(), sample.end()));
        CHECK(std::adjacent_find(sample.begin(), sample.end()) == sample.end());
        CHECK(sample.size() <= sifted);
        if (!sample.empty())
            CHECK(sample.back() < sifted);
        CHECK(sample == choose_sample(it, sifted, frac));
    }
}

TEST_CASE("config validation and csv export") {
    SessionConfig c;
    c.sample_fraction = 0;
    CHECK_THROWS(c.validate());
    c = SessionConfig{};
    c.rounds = 0;
    CHECK_THROWS(c.validate());
    const SessionResult r = run_session(config(2, 50, "identity", 1));
    const std::string csv = round_log_csv(r.log);
    CHECK(csv.rfind("round,i,j,s,i_prime,j_prime,outcome,sifted,offset", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
}

}
