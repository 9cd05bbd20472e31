#include "qudit_qkd/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace qkd {

void DistillSettings::validate() const {
    params.validate();
    if (hash_fraction < 0 || hash_fraction > 1)
        throw UsageError("hash_fraction: must lie in [0, 1]");
}

ErrorMatrix estimated_matrix(double e_b, double e_c, int n) {
    const double order = std::ldexp(1.0, n);
    if (!(e_c > 0))
        throw DomainError("error matrix undefined: e_c = 0");
    const double e01 = e_b * e_c;
    const double e00 = 1 - e01 - (order - 1) * (1 - e_c) / (order - 2);
    const double e10 = e_c - e00 - e01;
    ErrorMatrix m{std::max(0.0, e00), std::max(0.0, e10), 0.0, std::max(0.0, e01)};
    const double total = m.sum();
    if (!(total > 0))
        return {0, 0, 0, 1};
    m.p_i /= total;
    m.p_x /= total;
    m.p_z /= total;
    return m;
}

GateDecision decide(const SessionStats& stats, int n, const DistillSettings& settings, std::size_t raw_key_length) {
    GateDecision g;
    g.params = settings.params;
    if (stats.status != SessionStatus::Ok) {
        g.reason = status_name(stats.status);
        return g;
    }
    if (!stats.verdict.pass) {
        g.reason = kReasonCondition;
        return g;
    }
    g.matrix = estimated_matrix(stats.e_b.value, stats.e_c.interval.value, n);
    if (settings.auto_params) {
        g.selection = select_params(g.matrix, settings.params);
        if (!g.selection->feasible) {
            g.reason = "no-feasible-parameters";
            return g;
        }
        g.params = g.selection->params;
    }
    const double needed = std::ldexp(1.0, static_cast<int>(g.params.k)) * g.params.r;
    if (static_cast<double>(raw_key_length) < needed) {
        g.reason = "insufficient-key";
        return g;
    }
    g.pass = true;
    return g;
}

std::uint64_t distill_seed(std::uint64_t master) { return derive_seed(master, StreamTag::Distill, 0xD15); }
std::uint64_t hash_seed(std::uint64_t master) { return derive_seed(master, StreamTag::Hash, 0x4A5); }

std::vector<std::uint8_t> finish_key(std::vector<std::uint8_t> bits, double hash_fraction, std::uint64_t seed) {
    if (hash_fraction <= 0)
        return bits;
    return placeholder_hash(bits, hash_fraction, seed);
}

PipelineResult run_pipeline(const SessionConfig& config, const DistillSettings& settings) {
    settings.validate();
    PipelineResult out;
    out.session = run_session(config);
    out.gate = decide(out.session.stats, config.n, settings, out.session.alice_key.size());
    if (!out.gate.pass) {
        out.exit_code = 2;
        return out;
    }
    const auto key = LabeledKey::from_keys(out.session.alice_key, out.session.bob_key);
    out.distill = simulate_distillation(key, out.gate.params, distill_seed(config.seed));
    out.final_alice = finish_key(out.distill->alice, settings.hash_fraction, hash_seed(config.seed));
    out.final_bob = finish_key(out.distill->bob, settings.hash_fraction, hash_seed(config.seed));
    return out;
}

Json to_json(const Interval& i) { return Json{{"value", i.value}, {"lo", i.lo}, {"hi", i.hi}}; }

Json to_json(const SessionStats& s) {
    Json j;
    j["status"] = status_name(s.status);
    j["rounds"] = s.rounds;
    j["sifted"] = s.sifted;
    j["sifted_outside"] = s.sifted_outside;
    j["sample_size"] = s.sample_size;
    j["sample_in_pair"] = s.sample_in_pair;
    j["sample_errors_in_pair"] = s.sample_errors_in_pair;
    j["raw_key_length"] = s.raw_key_length;
    j["e_b"] = to_json(s.e_b);
    j["e_b"]["defined"] = s.e_b_defined;
    j["e_b_all"] = to_json(s.e_b_all);
    j["e_c"] = to_json(s.e_c.interval);
    j["e_c"]["numerator"] = s.e_c.numerator;
    j["e_c"]["denominator"] = s.e_c.denominator;
    j["e_c"]["defined"] = s.e_c.defined;
    j["e_c_announcement_only"] = to_json(s.e_c_alt.interval);
    Json lines = Json::array();
    for (const auto& c : s.line_counts)
        lines.push_back({c[0], c[1], c[2]});
    j["line_counts_plus_minus_outside"] = lines;
    j["condition"] = {{"pass", s.verdict.pass},
                      {"lhs", s.verdict.lhs},
                      {"point_pass", s.verdict_point.pass},
                      {"point_lhs", s.verdict_point.lhs}};
    return j;
}

Json to_json(const SessionConfig& c) {
    Json j;
    j["n"] = c.n;
    if (c.modulus)
        j["modulus"] = *c.modulus;
    else
        j["modulus"] = nullptr;
    j["rounds"] = c.rounds;
    j["channel"] = c.channel;
    j["sample_fraction"] = c.sample_fraction;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["z"] = c.z;
    return j;
}

Json to_json(const DistillParams& p) {
    return Json{{"k", p.k},           {"r", p.r},           {"css_target", p.css_target}, {"z_budget", p.z_budget},
                {"margin", p.margin}, {"k_max", p.k_max},   {"r_max", p.r_max}};
}

Json to_json(const ErrorMatrix& m) { return Json{{"p_i", m.p_i}, {"p_x", m.p_x}, {"p_y", m.p_y}, {"p_z", m.p_z}}; }

Json to_json(const Selection& s) {
    Json j;
    j["feasible"] = s.feasible;
    j["k"] = s.params.k;
    j["r"] = s.params.r;
    j["after_parity"] = to_json(s.after_parity);
    j["x_fail"] = s.residual.x_fail;
    j["z_fail"] = s.residual.z_fail;
    j["within_budget"] = s.within_budget;
    Json trace = Json::array();
    for (const auto& t : s.trace)
        trace.push_back({{"k", t.k},
                         {"r", t.r},
                         {"matrix", to_json(t.matrix)},
                         {"hoeffding", t.hoeffding},
                         {"css_ratio", std::isfinite(t.css_ratio) ? Json(t.css_ratio) : Json("inf")},
                         {"feasible", t.feasible}});
    j["trace"] = trace;
    return j;
}

std::string bit_string(const std::vector<std::uint8_t>& bits) {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
        s[i] = bits[i] ? '1' : '0';
    return s;
}

}  // namespace qkd
