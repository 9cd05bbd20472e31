// qudit-qkd: command line front end.
//
// Exit codes: 0 success / condition passed, 2 protocol condition failed,
// 1 usage or internal error.

#include "qudit_qkd/analysis.hpp"
#include "qudit_qkd/distill.hpp"
#include "qudit_qkd/kernels.hpp"
#include "qudit_qkd/netrun.hpp"
#include "qudit_qkd/pipeline.hpp"
#include "qudit_qkd/threshold.hpp"
#include "qudit_qkd/verify.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace qkd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCondition = 2;

struct SessionOpts {
    int n = 2;
    std::string modulus;
    std::uint64_t rounds = 100000;
    std::string channel = "identity";
    double sample_fraction = 0.1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct DistillOpts {
    unsigned k = 0;
    unsigned r = 1;
    bool auto_params = false;
    double margin = 10;
    double css_target = 0.01;
    double z_budget = 0.005;
    unsigned k_max = 30;
    unsigned r_max = 99999;
    double hash_fraction = 0;
};

std::optional<unsigned> parse_modulus(const std::string& text) {
    if (text.empty())
        return std::nullopt;
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(text, &used, 0);
        if (used != text.size())
            throw std::invalid_argument(text);
        return static_cast<unsigned>(v);
    } catch (const std::exception&) {
        throw UsageError("modulus: expected an integer mask such as 0x13, got '" + text + "'");
    }
}

void add_field_opts(CLI::App* cmd, SessionOpts& s) {
    cmd->add_option("--n", s.n, "Field degree: N = 2^n, n in [2, 8]")->capture_default_str();
    cmd->add_option("--modulus", s.modulus, "Irreducible polynomial mask (default: smallest of degree n)");
}

void add_session_opts(CLI::App* cmd, SessionOpts& s) {
    add_field_opts(cmd, s);
    cmd->add_option("--rounds", s.rounds, "Protocol rounds")->capture_default_str();
    cmd->add_option("--channel", s.channel, "Channel spec, e.g. z_flip:0.3")->capture_default_str();
    cmd->add_option("--sample-fraction", s.sample_fraction, "Fraction of sifted bits revealed")->capture_default_str();
    cmd->add_option("--seed", s.seed, "Master seed")->capture_default_str();
    cmd->add_option("--threads", s.threads, "Worker threads")->capture_default_str();
}

void add_distill_opts(CLI::App* cmd, DistillOpts& d) {
    cmd->add_option("--k", d.k, "Parity-comparison rounds")->capture_default_str();
    cmd->add_option("--r", d.r, "Odd majority block size")->capture_default_str();
    cmd->add_flag("--auto-params", d.auto_params, "Choose (k, r) from the error matrix");
    cmd->add_option("--margin", d.margin, "Margin for the 'much greater than' tests")->capture_default_str();
    cmd->add_option("--css-target", d.css_target, "Residual error budget of the final stage")->capture_default_str();
    cmd->add_option("--z-budget", d.z_budget, "Share of the budget for Z-type errors")->capture_default_str();
    cmd->add_option("--k-max", d.k_max, "Largest k tried by --auto-params")->capture_default_str();
    cmd->add_option("--r-max", d.r_max, "Largest r allowed")->capture_default_str();
    cmd->add_option("--hash-fraction", d.hash_fraction, "Placeholder hash output fraction (0 = off)")
        ->capture_default_str();
}

SessionConfig to_session(const SessionOpts& s) {
    SessionConfig c;
    c.n = s.n;
    c.modulus = parse_modulus(s.modulus);
    c.rounds = s.rounds;
    c.channel = s.channel;
    c.sample_fraction = s.sample_fraction;
    c.seed = s.seed;
    c.threads = s.threads;
    c.validate();
    return c;
}

DistillSettings to_settings(const DistillOpts& d) {
    DistillSettings s;
    s.params.k = d.k;
    s.params.r = d.r;
    s.params.margin = d.margin;
    s.params.css_target = d.css_target;
    s.params.z_budget = d.z_budget;
    s.params.k_max = d.k_max;
    s.params.r_max = d.r_max;
    s.auto_params = d.auto_params;
    s.hash_fraction = d.hash_fraction;
    s.validate();
    return s;
}

Json exact(const Rational& r) { return Json{{"exact", to_string(r)}, {"value", to_double(r)}}; }

void emit(const Json& j, const std::string& path) {
    const std::string text = j.dump(2);
    std::cout << text << '\n';
    if (!path.empty()) {
        std::ofstream out(path);
        if (!out)
            throw UsageError("out: cannot write " + path);
        out << text << '\n';
    }
}

void write_file(const std::string& path, const std::string& body, const char* what) {
    std::ofstream out(path);
    if (!out)
        throw UsageError(std::string(what) + ": cannot write " + path);
    out << body;
}

Json observables_json(const Observables& o) {
    Json j;
    j["e_b"] = o.e_b_defined ? exact(o.e_b) : Json(nullptr);
    j["e_c"] = exact(o.e_c);
    j["consistent"] = o.consistent;
    return j;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const SessionOpts& so, const DistillOpts& dopt, bool distill, const std::string& log_csv,
                 const std::string& out) {
    const SessionConfig cfg = to_session(so);
    Json j;
    j["command"] = "simulate";
    j["config"] = to_json(cfg);
    {
        const auto field = make_field(cfg.n, cfg.modulus);
        const auto model = ChannelModel::parse(cfg.channel, field);
        j["config"]["modulus"] = field->modulus_hex();
        try {
            j["prediction"] = observables_json(predict_channel(model));
        } catch (const UnsupportedModel&) {
            j["prediction"] = nullptr;
        }
    }

    int code = kExitOk;
    if (!distill) {
        SessionConfig run = cfg;
        run.keep_log = !log_csv.empty();
        const auto res = run_session(run);
        j["stats"] = to_json(res.stats);
        const bool pass = res.stats.status == SessionStatus::Ok && res.stats.verdict.pass;
        j["pass"] = pass;
        if (!log_csv.empty())
            write_file(log_csv, round_log_csv(res.log), "log-csv");
        code = pass ? kExitOk : kExitCondition;
    } else {
        const DistillSettings settings = to_settings(dopt);
        SessionConfig run = cfg;
        run.keep_log = !log_csv.empty();
        const auto res = run_pipeline(run, settings);
        j["distill_config"] = to_json(settings.params);
        j["distill_config"]["auto_params"] = settings.auto_params;
        j["distill_config"]["hash_fraction"] = settings.hash_fraction;
        j["stats"] = to_json(res.session.stats);
        j["pass"] = res.gate.pass;
        j["reason"] = res.gate.reason;
        j["estimated_matrix"] = to_json(res.gate.matrix);
        if (res.gate.selection)
            j["selection"] = to_json(*res.gate.selection);
        if (res.distill) {
            j["params"] = to_json(res.gate.params);
            j["length_after_round"] = res.distill->length_after_round;
            j["final_length"] = res.final_alice.size();
            j["final_disagreements"] = res.distill->disagreements;
            j["final_disagreement_rate"] = res.distill->disagreement_rate;
            j["keys_equal"] = res.final_alice == res.final_bob;
        }
        if (!log_csv.empty())
            write_file(log_csv, round_log_csv(res.session.log), "log-csv");
        code = res.exit_code;
    }
    emit(j, out);
    return code;
}

// ----------------------------------------------------------------- analyze

int cmd_analyze(const SessionOpts& so, const std::string& out) {
    const auto field = make_field(so.n, parse_modulus(so.modulus));
    const auto model = ChannelModel::parse(so.channel, field);
    Json j;
    j["command"] = "analyze";
    j["config"] = {{"n", so.n}, {"modulus", field->modulus_hex()}, {"channel", so.channel}};
    const Observables obs = predict_channel(model);
    j["observables"] = observables_json(obs);

    if (model.unitary_only()) {
        const BellDistribution d = bell_distribution(model);
        Json table = Json::array();
        for (unsigned a = 0; a < d.order(); ++a)
            table.push_back({{"a", a}, {"e_a0", exact(d(static_cast<Elem>(a), 0))},
                             {"e_a1", exact(d(static_cast<Elem>(a), 1))}});
        j["bell_distribution"] = table;
        j["sum_rule_holds"] = d.sum_rule_holds();
        j["pm_identity_holds"] = check_pm_identity(d);
        const auto ed = check_ed_condition(d);
        j["ed_condition"] = {{"pass", ed.pass}, {"lhs", exact(ed.lhs)}, {"e00_greatest", ed.e00_greatest}};
        try {
            const auto m = error_matrix(d);
            j["error_matrix"] = {{"p_i", exact(m.p_i)}, {"p_x", exact(m.p_x)}, {"p_y", exact(m.p_y)},
                                 {"p_z", exact(m.p_z)}};
            j["secure_condition"] = check_secure_condition(m.to_double());
        } catch (const DomainError& e) {
            j["error_matrix"] = nullptr;
            j["error_matrix_note"] = e.what();
        }
    } else {
        j["bell_distribution"] = nullptr;
        j["note"] = "channel contains non-unitary terms; only observables are predicted";
    }

    int code = kExitOk;
    if (obs.e_b_defined) {
        const auto v = check_pm_condition(to_double(obs.e_b), to_double(obs.e_c), so.n);
        j["pm_condition"] = {{"pass", v.pass}, {"lhs", v.lhs}};
        code = v.pass ? kExitOk : kExitCondition;
    } else {
        j["pm_condition"] = nullptr;
        code = kExitCondition;
    }
    emit(j, out);
    return code;
}

// ----------------------------------------------------------------- distill

ErrorMatrix parse_matrix(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        v.push_back(to_double(parse_rational(item)));
    if (v.size() != 4)
        throw UsageError("matrix: expected four comma-separated values pI,px,py,pz");
    ErrorMatrix m{v[0], v[1], v[2], v[3]};
    if (!m.valid(1e-9))
        throw UsageError("matrix: entries must be nonnegative and sum to 1");
    return m;
}

Json tally_json(const LabelTally& t) {
    const double total = static_cast<double>(t[0] + t[1] + t[2] + t[3]);
    Json j = {{"I", t[0]}, {"X", t[1]}, {"Y", t[2]}, {"Z", t[3]}};
    if (total > 0)
        j["frequencies"] = {t[0] / total, t[1] / total, t[2] / total, t[3] / total};
    return j;
}

int cmd_distill(const std::string& matrix_text, const SessionOpts& so, bool channel_given, const DistillOpts& dopt,
                std::uint64_t length, const std::string& out) {
    const DistillSettings settings = to_settings(dopt);
    ErrorMatrix m;
    Json j;
    j["command"] = "distill";
    if (!matrix_text.empty()) {
        m = parse_matrix(matrix_text);
        j["source"] = {{"matrix", matrix_text}};
    } else if (channel_given) {
        const auto field = make_field(so.n, parse_modulus(so.modulus));
        const auto model = ChannelModel::parse(so.channel, field);
        m = error_matrix(bell_distribution(model)).to_double();
        j["source"] = {{"channel", so.channel}, {"n", so.n}};
    } else {
        throw UsageError("distill: give --matrix pI,px,py,pz or --channel");
    }
    j["matrix"] = to_json(m);
    j["secure_condition_input"] = check_secure_condition(m);

    DistillParams params = settings.params;
    int code = kExitOk;
    if (settings.auto_params) {
        const Selection sel = select_params(m, settings.params);
        j["selection"] = to_json(sel);
        if (!sel.feasible) {
            j["feasible"] = false;
            emit(j, out);
            return kExitCondition;
        }
        params = sel.params;
    }
    j["feasible"] = true;
    j["params"] = to_json(params);
    const ErrorMatrix after = ep_recursion(m, params.k);
    const BlockFailure bf = majority_stage(after, params.r);
    j["after_parity"] = to_json(after);
    j["secure_condition_after_parity"] = check_secure_condition(after);
    j["majority_stage"] = {{"x_fail", bf.x_fail}, {"z_fail", bf.z_fail}};

    if (length > 0) {
        Stream rng = substream(so.seed, StreamTag::Labels, 0);
        const auto key = LabeledKey::generate(m, length, rng);
        const auto res = simulate_distillation(key, params, distill_seed(so.seed));
        Json sim;
        sim["seed"] = so.seed;
        sim["input_length"] = length;
        sim["length_after_round"] = res.length_after_round;
        sim["after_parity"] = tally_json(res.after_parity);
        sim["final"] = tally_json(res.final_labels);
        sim["final_length"] = res.alice.size();
        sim["disagreements"] = res.disagreements;
        sim["disagreement_rate"] = res.disagreement_rate;
        sim["disagreement_plus_x_fail"] = res.disagreement_rate + bf.x_fail;
        j["simulation"] = sim;
    }
    emit(j, out);
    return code;
}

// --------------------------------------------------------------- threshold

int cmd_threshold(int n, unsigned grid, unsigned e11_grid, unsigned iff_points, const std::string& csv,
                  const std::string& out) {
    const ScanResult scan = e_max_scan(n, grid, e11_grid);
    Json j;
    j["command"] = "threshold";
    j["config"] = {{"n", n}, {"grid", grid}, {"e11_grid", e11_grid}, {"iff_points", iff_points}};
    j["kernel"] = kernels::isa_name(kernels::active_isa());
    j["e_max"] = scan.e_max;
    j["resolution"] = scan.resolution;
    j["no_counterexample"] = scan.no_counterexample;
    j["points_checked"] = scan.points_checked;
    double min_positive = INFINITY;
    std::uint64_t certified = 0;
    for (const auto& r : scan.rows) {
        if (r.e_b < 0.5 - 1e-12 && r.status == RowStatus::Feasible) {
            ++certified;
            min_positive = std::min(min_positive, r.min_f);
        }
        if (std::abs(r.e_b - 0.5) < 1e-12)
            j["half_row"] = {{"status", row_status_name(r.status)},
                             {"min_f", std::isfinite(r.min_f) ? Json(r.min_f) : Json(nullptr)}};
    }
    j["certified_rows_below_half"] = certified;
    j["smallest_sampled_f_below_half"] = std::isfinite(min_positive) ? Json(min_positive) : Json(nullptr);
    bool ok = scan.no_counterexample;
    if (iff_points > 0) {
        const IffCheck c = verify_iff(n, iff_points);
        j["iff"] = {{"points", c.points},
                    {"positive_below_half", c.positive_below_half},
                    {"nonpositive_at_half", c.nonpositive_at_half},
                    {"violations", c.violations}};
        ok = ok && c.violations == 0;
    }
    if (!csv.empty()) {
        write_file(csv, frontier_csv(scan), "csv");
        j["csv"] = csv;
    }
    emit(j, out);
    return ok ? kExitOk : kExitCondition;
}

// ------------------------------------------------------------------ verify

void print_tally(const std::string& label, const CheckTally& t) {
    std::cout << label << ": " << t.passed << '/' << t.total << (t.ok() ? " ok" : " MISMATCH") << '\n';
    for (const auto& f : t.failures)
        std::cout << "  failed: " << f << '\n';
}

int cmd_verify(int n, const std::string& modulus, std::uint64_t random, std::uint64_t seed) {
    const auto field = make_field(n, parse_modulus(modulus));
    std::cout << "field: GF(" << field->order() << ") modulus " << field->modulus_hex() << '\n';
    bool ok = true;
    const auto axioms = verify_field_axioms(*field);
    print_tally("field-axioms", axioms);
    ok = ok && axioms.ok();
    if (n <= 4) {
        const auto ex = verify_conjugation_exhaustive(*field);
        print_tally("conjugation", ex);
        ok = ok && ex.ok();
    }
    if (random > 0) {
        const auto rnd = verify_conjugation_random(*field, random, seed);
        print_tally("conjugation-random", rnd);
        ok = ok && rnd.ok();
    }
    return ok ? kExitOk : kExitError;
}

// ------------------------------------------------------------------ netrun

int cmd_netrun(net::RoleConfig rc, const std::string& role, const SessionOpts& so, const DistillOpts& d) {
    rc.role = net::parse_role(role);
    rc.session = to_session(so);
    rc.distill = to_settings(d);
    const auto report = net::run_role(rc);
    std::cout << report.to_json().dump(2) << '\n';
    return report.exit_code;
}

// ------------------------------------------------------------ config file

std::string flag_name(const std::string& key) {
    std::string s = key;
    for (auto& c : s)
        if (c == '_')
            c = '-';
    return "--" + s;
}

/// Turns a JSON object of option values into arguments. Keys use the long
/// option names with '_' or '-'; "r": "auto" maps to --auto-params.
std::vector<std::string> config_args(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw UsageError("config: cannot read " + path);
    Json j = Json::parse(in, nullptr, false, true);
    if (j.is_discarded() || !j.is_object())
        throw UsageError("config: " + path + " is not a JSON object");
    std::vector<std::string> args;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string flag = flag_name(it.key());
        const Json& v = it.value();
        if (it.key() == "r" && v.is_string() && v.get<std::string>() == "auto") {
            args.push_back("--auto-params");
        } else if (v.is_boolean()) {
            if (v.get<bool>())
                args.push_back(flag);
        } else if (v.is_string()) {
            args.push_back(flag);
            args.push_back(v.get<std::string>());
        } else if (v.is_number()) {
            args.push_back(flag);
            args.push_back(v.dump());
        } else {
            throw UsageError("config: unsupported value for '" + it.key() + "'");
        }
    }
    return args;
}

/// Splices config-file arguments in front of the command-line flags so the
/// latter override them.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty() || args.empty())
        return args;
    const auto extra = config_args(path);
    args.insert(args.begin() + 1, extra.begin(), extra.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prepare-and-measure QKD over GF(2^n): simulation, analysis, post-processing and networked roles"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;

    SessionOpts so;
    DistillOpts dopt;
    std::string out;

    auto* sim = app.add_subcommand("simulate", "Run the prepare-and-measure rounds and estimate e_b, e_c");
    bool sim_distill = false;
    std::string log_csv;
    add_session_opts(sim, so);
    add_distill_opts(sim, dopt);
    sim->add_flag("--distill", sim_distill, "Continue through the gate and post-processing");
    sim->add_option("--log-csv", log_csv, "Write the per-round log as CSV");

    auto* ana = app.add_subcommand("analyze", "Closed-form statistics of a channel");
    add_field_opts(ana, so);
    ana->add_option("--channel", so.channel, "Channel spec")->capture_default_str();

    auto* dis = app.add_subcommand("distill", "Post-processing recursion, parameter choice and simulation");
    std::string matrix;
    std::uint64_t length = 0;
    add_field_opts(dis, so);
    auto* dis_channel = dis->add_option("--channel", so.channel, "Derive the error matrix from a unitary channel");
    dis->add_option("--matrix", matrix, "Error matrix pI,px,py,pz");
    dis->add_option("--length", length, "Simulate this many i.i.d. labelled positions (0 = formulas only)");
    dis->add_option("--seed", so.seed, "Master seed")->capture_default_str();
    dis->add_option("--threads", so.threads, "Worker threads (unused)");
    add_distill_opts(dis, dopt);

    auto* thr = app.add_subcommand("threshold", "Scan the tolerable bit error rate");
    int thr_n = 2;
    unsigned grid = 2000, e11_grid = 101, iff_points = 10000;
    std::string csv;
    thr->add_option("--n", thr_n, "Field degree")->capture_default_str();
    thr->add_option("--grid", grid, "Grid intervals for e_b and e_c")->capture_default_str();
    thr->add_option("--e11-grid", e11_grid, "Grid points for e_11")->capture_default_str();
    thr->add_option("--iff-points", iff_points, "Exact points for the if-and-only-if check (0 = skip)")
        ->capture_default_str();
    thr->add_option("--csv", csv, "Write the frontier CSV");
    thr->add_option("--threads", so.threads, "Worker threads (unused)");
    thr->add_option("--seed", so.seed, "Unused; accepted for uniformity");

    auto* ver = app.add_subcommand("verify", "Exhaustive field and conjugation checks");
    std::uint64_t random = 10000;
    add_field_opts(ver, so);
    ver->add_option("--random", random, "Random conjugation tuples")->capture_default_str();
    ver->add_option("--seed", so.seed, "Seed for the random tuples")->capture_default_str();
    ver->add_option("--threads", so.threads, "Worker threads (unused)");

    auto* net = app.add_subcommand("netrun", "Run one protocol role over TCP");
    net::RoleConfig rc;
    std::string role;
    net->add_option("--role", role, "alice, bob or eve")->required();
    net->add_option("--listen", rc.listen, "Accept a peer on host:port");
    net->add_option("--connect-alice", rc.connect_alice, "Connect to Alice (or Eve's Alice side) at host:port");
    net->add_option("--connect-bob", rc.connect_bob, "Connect to Bob (or Eve's Bob side) at host:port");
    net->add_option("--report", rc.report_path, "Write the JSON report");
    net->add_option("--transcript", rc.transcript_path, "Write the frame transcript");
    net->add_option("--eve-log", rc.eve_log_path, "Eve: write the per-round channel terms as CSV");
    net->add_option("--connect-timeout-ms", rc.connect_timeout_ms, "Connection timeout")->capture_default_str();
    add_session_opts(net, so);
    add_distill_opts(net, dopt);

    for (auto* cmd : {sim, ana, dis, thr, ver, net}) {
        cmd->add_option("--config", config_path, "JSON file of option values; flags override it");
        if (cmd != ver && cmd != net)
            cmd->add_option("--out", out, "Also write the JSON output to this file");
    }

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }

    try {
        if (*sim)
            return cmd_simulate(so, dopt, sim_distill, log_csv, out);
        if (*ana)
            return cmd_analyze(so, out);
        if (*dis)
            return cmd_distill(matrix, so, dis_channel->count() > 0, dopt, length, out);
        if (*thr)
            return cmd_threshold(thr_n, grid, e11_grid, iff_points, csv, out);
        if (*ver)
            return cmd_verify(so.n, so.modulus, random, so.seed);
        if (*net)
            return cmd_netrun(rc, role, so, dopt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
