// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.
//
//   acceptance --cli path/to/qudit-qkd [--workdir dir] [--only N]

#include "gen.hpp"
#include "netrun_harness.hpp"

#include "qudit_qkd/analysis.hpp"
#include "qudit_qkd/distill.hpp"
#include "qudit_qkd/pipeline.hpp"
#include "qudit_qkd/protocol.hpp"
#include "qudit_qkd/threshold.hpp"
#include "qudit_qkd/transport.hpp"
#include "qudit_qkd/verify.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

extern char** environ;

namespace fs = std::filesystem;
using namespace qkd;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok)
            pass = false;
        notes.push_back((ok ? "" : "FAILED ") + what);
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// --- subprocesses -----------------------------------------------------------

std::string cli_path;
fs::path workdir;

pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
    std::vector<char*> argv;
    for (const auto& a : args)
        argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&fa, 1, 2);
    pid_t pid = -1;
    const int rc = posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    if (rc != 0)
        throw std::runtime_error("cannot start " + args[0]);
    return pid;
}

/// Exit status, or -signal when killed by a signal.
int wait_for(pid_t pid) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status))
        return WEXITSTATUS(status);
    return WIFSIGNALED(status) ? -WTERMSIG(status) : -1000;
}

std::pair<int, std::string> run_capture(const std::vector<std::string>& args) {
    const fs::path out = workdir / "capture.txt";
    const int code = wait_for(spawn(args, out));
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {code, ss.str()};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint16_t free_port() {
    net::TcpListener probe({"127.0.0.1", 0});
    return probe.port();
}

std::vector<std::string> session_flags(const SessionConfig& s, const DistillSettings& d) {
    std::vector<std::string> f = {"--n",    std::to_string(s.n),    "--rounds",  std::to_string(s.rounds),
                                  "--seed", std::to_string(s.seed), "--channel", s.channel,
                                  "--k",    std::to_string(d.params.k), "--r",   std::to_string(d.params.r)};
    if (d.auto_params)
        f.push_back("--auto-params");
    if (d.hash_fraction > 0) {
        f.push_back("--hash-fraction");
        f.push_back(fmt(d.hash_fraction, 17));
    }
    return f;
}

struct ProcessRun {
    int alice = -1, bob = -1, eve = -1;
    nlohmann::json alice_report, bob_report;
    std::string alice_transcript, bob_transcript;
};

/// Alice and Bob as separate processes (Bob listens); Eve in between when
/// `with_eve`, listening for Alice and connecting to Bob.
ProcessRun run_processes(const SessionConfig& s, const DistillSettings& d, bool with_eve, const std::string& tag) {
    const fs::path dir = workdir / tag;
    fs::create_directories(dir);
    const std::string bob_addr = "127.0.0.1:" + std::to_string(free_port());
    const std::string eve_addr = "127.0.0.1:" + std::to_string(free_port());
    auto cmd = [&](const char* role) {
        std::vector<std::string> a = {cli_path, "netrun", "--role", role};
        for (auto& f : session_flags(s, d))
            a.push_back(f);
        a.insert(a.end(), {"--report", (dir / (std::string(role) + ".json")).string()});
        if (std::string(role) != "eve")
            a.insert(a.end(), {"--transcript", (dir / (std::string(role) + ".transcript")).string()});
        return a;
    };
    auto bob = cmd("bob");
    bob.insert(bob.end(), {"--listen", bob_addr});
    const pid_t pb = spawn(bob, dir / "bob.log");
    pid_t pe = -1;
    auto alice = cmd("alice");
    if (with_eve) {
        auto eve = cmd("eve");
        eve.insert(eve.end(), {"--listen", eve_addr, "--connect-bob", bob_addr});
        pe = spawn(eve, dir / "eve.log");
        alice.insert(alice.end(), {"--connect-bob", eve_addr});
    } else {
        alice.insert(alice.end(), {"--connect-bob", bob_addr});
    }
    const pid_t pa = spawn(alice, dir / "alice.log");
    ProcessRun r;
    r.alice = wait_for(pa);
    r.bob = wait_for(pb);
    if (pe > 0)
        r.eve = wait_for(pe);
    if (fs::exists(dir / "alice.json"))
        r.alice_report = read_json(dir / "alice.json");
    if (fs::exists(dir / "bob.json"))
        r.bob_report = read_json(dir / "bob.json");
    r.alice_transcript = read_text(dir / "alice.transcript");
    r.bob_transcript = read_text(dir / "bob.transcript");
    return r;
}

// --- criteria ---------------------------------------------------------------

Check criterion1() {
    Check o;
    for (int n = 2; n <= 4; ++n) {
        const auto t0 = Clock::now();
        const auto [code, out] = run_capture({cli_path, "threshold", "--n", std::to_string(n), "--grid", "2000",
                                              "--iff-points", "0"});
        const double secs = seconds_since(t0);
        const auto j = nlohmann::json::parse(out, nullptr, false);
        if (j.is_discarded()) {
            o.require(false, "n=" + std::to_string(n) + " unparsable output (exit " + std::to_string(code) + ")");
            continue;
        }
        const double e_max = j["e_max"].get<double>();
        const auto certified = j["certified_rows_below_half"].get<std::uint64_t>();
        o.require(code == 0 && e_max >= 0.499 && e_max <= 0.5 && j["no_counterexample"].get<bool>() &&
                      certified == 1000 && secs < 60,
                  "n=" + std::to_string(n) + " e_max=" + fmt(e_max) + " certified rows " + std::to_string(certified) +
                      "/1000 (" + fmt(secs, 3) + " s)");
    }
    return o;
}

Check criterion2() {
    Check o;
    for (int n = 2; n <= 4; ++n) {
        const IffCheck c = verify_iff(n, 10000);
        o.require(c.positive_below_half == 10000 && c.nonpositive_at_half && c.violations == 0,
                  "n=" + std::to_string(n) + " positive " + std::to_string(c.positive_below_half) +
                      "/10000, nonpositive at 1/2: " + (c.nonpositive_at_half ? "yes" : "no"));
    }
    return o;
}

Check criterion3() {
    Check o;
    Stream s = gen::stream(3003);
    std::uint64_t tested = 0, counterexamples = 0, drawn = 0;
    std::uint64_t per_n[4] = {0, 0, 0, 0};
    while (tested < 100000) {
        const int n = 2 + static_cast<int>(drawn % 4);
        ++drawn;
        const unsigned N = 1u << n;
        const BellDistribution d = gen::bell_distribution(s, N, 1000000, 0.5);
        if (!d.valid() || !check_ed_condition(d).pass)
            continue;
        ++tested;
        ++per_n[n - 2];
        const Observables obs = predict_observables(d);
        const Rational lhs = obs.e_b * obs.e_c + Rational(N - 1) * (1 - obs.e_c) / (N - 2);
        const bool exact = lhs < Rational(1, 2);
        const bool numeric = check_pm_condition(to_double(obs.e_b), to_double(obs.e_c), n).pass;
        if (!exact || !numeric)
            ++counterexamples;
    }
    o.require(counterexamples == 0, std::to_string(tested) + " distributions (n=2..5: " + std::to_string(per_n[0]) +
                                        "/" + std::to_string(per_n[1]) + "/" + std::to_string(per_n[2]) + "/" +
                                        std::to_string(per_n[3]) + "), " + std::to_string(counterexamples) +
                                        " counterexamples");
    return o;
}

Check criterion4() {
    Check o;
    const CheckTally ex = verify_conjugation_exhaustive(GaloisField(2));
    o.require(ex.ok() && ex.total == 768, "n=2 exhaustive " + std::to_string(ex.passed) + "/" + std::to_string(ex.total));
    for (int n : {3, 4}) {
        const CheckTally r = verify_conjugation_random(GaloisField(n), 10000, 4000 + n);
        o.require(r.ok() && r.total >= 10000,
                  "n=" + std::to_string(n) + " random " + std::to_string(r.passed) + "/" + std::to_string(r.total));
    }
    return o;
}

Check criterion5() {
    Check o;
    const char* channels[] = {"identity", "z_flip:0.1", "z_flip:0.3", "shift_noise:0.2", "partial_intercept:0.4"};
    std::uint64_t seed = 500;
    for (int n : {2, 3})
        for (const char* ch : channels) {
            SessionConfig c;
            c.n = n;
            c.rounds = 1000000;
            c.channel = ch;
            c.seed = ++seed;
            c.keep_log = false;
            const auto t0 = Clock::now();
            const SessionResult r = run_session(c);
            const double secs = seconds_since(t0);
            const Observables pred = predict_channel(ChannelModel::parse(ch, make_field(n)));
            const double eb = to_double(pred.e_b), ec = to_double(pred.e_c);
            const Interval ib = wilson(r.stats.sample_errors_in_pair, r.stats.sample_in_pair, 3);
            const Interval ic = wilson(r.stats.e_c.numerator, r.stats.e_c.denominator, 3);
            const bool ok_b = ib.lo - 1e-12 <= eb && eb <= ib.hi + 1e-12;
            const bool ok_c = ic.lo - 1e-12 <= ec && ec <= ic.hi + 1e-12;
            o.require(ok_b && ok_c && secs < 120,
                      std::string("n=") + std::to_string(n) + " " + ch + ": e_b " + fmt(r.stats.e_b.value, 4) +
                          " [" + fmt(ib.lo, 4) + ", " + fmt(ib.hi, 4) + "] vs " + fmt(eb, 4) + ", e_c " +
                          fmt(r.stats.e_c.interval.value, 4) + " [" + fmt(ic.lo, 4) + ", " + fmt(ic.hi, 4) +
                          "] vs " + fmt(ec, 4) + " (" + fmt(secs, 3) + " s)");
        }
    return o;
}

Check criterion6() {
    Check o;
    const ErrorMatrix m{0.75, 0.05, 0.05, 0.15};
    const ErrorMatrix one = ep_recursion(m, 1);
    const double want[4] = {0.830882, 0.110294, 0.022059, 0.036765};
    const double got1[4] = {one.p_i, one.p_x, one.p_y, one.p_z};
    bool pinned = true;
    for (int i = 0; i < 4; ++i)
        pinned = pinned && std::abs(got1[i] - want[i]) < 5e-7;
    o.require(pinned, "k=1 matrix (" + fmt(one.p_i) + ", " + fmt(one.p_x) + ", " + fmt(one.p_y) + ", " +
                          fmt(one.p_z) + ")");

    double worst = 0;
    Stream gs = gen::stream(6006);
    for (int it = 0; it < 1000; ++it) {
        const ErrorMatrix x = gen::matrix(gs, uniform_unit(gs) * 3);
        ErrorMatrix iter = x;
        for (unsigned k = 1; k <= 8; ++k) {
            iter = ep_recursion(iter, 1);
            const ErrorMatrix closed = ep_recursion(x, k);
            worst = std::max({worst, std::abs(closed.p_i - iter.p_i), std::abs(closed.p_x - iter.p_x),
                              std::abs(closed.p_y - iter.p_y), std::abs(closed.p_z - iter.p_z)});
        }
    }
    o.require(worst <= 1e-12, "closed form vs iterated, 1000 matrices k<=8: max deviation " + fmt(worst, 3));

    Stream s = gen::stream(6007);
    const LabeledKey key = LabeledKey::generate(m, 1000000, s);
    DistillParams p;
    p.k = 2;
    const DistillOutcome out = simulate_distillation(key, p, 6008);
    const ErrorMatrix two = ep_recursion(m, 2);
    const double expect[4] = {two.p_i, two.p_x, two.p_y, two.p_z};
    const LabelTally& t = out.after_parity;
    const double n = static_cast<double>(t[0] + t[1] + t[2] + t[3]);
    std::string freq;
    bool within = true;
    for (int i = 0; i < 4; ++i) {
        const double ph = static_cast<double>(t[i]) / n;
        const double sd = std::sqrt(expect[i] * (1 - expect[i]) / n);
        within = within && std::abs(ph - expect[i]) <= 3 * sd;
        freq += fmt(ph, 5) + "/" + fmt(expect[i], 5) + (i < 3 ? " " : "");
    }
    o.require(within, "k=2 survivors " + std::to_string(static_cast<std::uint64_t>(n)) +
                          ", observed/predicted I X Y Z: " + freq);
    return o;
}

Check criterion7() {
    Check o;
    const auto t0 = Clock::now();
    const FieldPtr f = make_field(2);
    const ExactErrorMatrix exact = error_matrix(bell_distribution(ChannelModel::z_flip(f, Rational(3, 10))));
    const ErrorMatrix m = exact.to_double();
    const Selection sel = select_params(m, DistillParams{});
    o.require(sel.feasible, "select_params on (" + fmt(m.p_i) + ", " + fmt(m.p_x) + ", " + fmt(m.p_y) + ", " +
                                fmt(m.p_z) + "): k=" + std::to_string(sel.params.k) +
                                " r=" + std::to_string(sel.params.r));
    if (!sel.feasible)
        return o;
    // Seed fixed before the first run; see the ledger for the seed sensitivity.
    Stream s(derive_seed(1, StreamTag::Labels, 7));
    const LabeledKey key = LabeledKey::generate(m, 10000000, s);
    const DistillOutcome out = simulate_distillation(key, sel.params, distill_seed(1));
    const double total = out.disagreement_rate + sel.residual.x_fail;
    std::string lengths;
    for (std::size_t i = 0; i < out.length_after_round.size(); ++i)
        lengths += (i ? "->" : "") + std::to_string(out.length_after_round[i]);
    const double secs = seconds_since(t0);
    o.require(total <= 0.01 && !out.alice.empty() && secs < 300,
              "10^7 bits, lengths " + lengths + ", final " + std::to_string(out.alice.size()) + " bits, " +
                  std::to_string(out.disagreements) + " disagreements: rate " + fmt(out.disagreement_rate, 4) +
                  " + x_fail " + fmt(sel.residual.x_fail, 4) + " = " + fmt(total, 4) + " (" + fmt(secs, 3) + " s)");
    return o;
}

Check criterion8() {
    Check o;
    SessionConfig c;
    c.n = 2;
    c.channel = "full_dephase";
    c.rounds = 6200000;  // ~1.03e6 sifted, ~1.03e5 in the sample
    c.seed = 8008;
    c.keep_log = false;
    const SessionResult r = run_session(c);
    const double eb = r.stats.e_b.value;
    o.require(r.stats.sample_in_pair >= 100000 && std::abs(eb - 0.5) <= 0.01,
              "e_b " + fmt(eb, 5) + " on " + std::to_string(r.stats.sample_in_pair) + " sampled sifted bits");
    o.require(!r.stats.verdict.pass, std::string("condition verdict ") + (r.stats.verdict.pass ? "pass" : "fail") +
                                         " (lhs at interval ends " + fmt(r.stats.verdict.lhs, 5) + ")");

    SessionConfig nc;
    nc.n = 2;
    nc.rounds = 30000;
    nc.seed = 8009;
    nc.channel = "full_dephase";
    DistillSettings d;
    d.params.k = 1;
    d.params.r = 3;
    const ProcessRun pr = run_processes(nc, d, true, "criterion8");
    const bool abort_sent = pr.bob_transcript.find("> ABORT " + [] {
        std::string hex;
        for (unsigned char ch : std::string(kReasonCondition)) {
            char b[3];
            std::snprintf(b, sizeof b, "%02x", ch);
            hex += b;
        }
        return hex;
    }()) != std::string::npos;
    o.require(pr.alice == 2 && pr.bob == 2 && pr.eve == 0 && abort_sent &&
                  pr.alice_report.value("reason", "") == kReasonCondition,
              "netrun via middlebox: exits alice " + std::to_string(pr.alice) + ", bob " + std::to_string(pr.bob) +
                  ", eve " + std::to_string(pr.eve) + "; Bob sent ABORT(" + kReasonCondition + "): " +
                  (abort_sent ? "yes" : "no"));
    return o;
}

Check criterion9() {
    Check o;
    struct Case {
        const char* tag;
        int n;
        const char* channel;
        unsigned k, r;
        bool autop;
        double hash;
    };
    const Case cases[] = {{"identity-n2", 2, "identity", 2, 3, false, 0},
                          {"zflip-n2", 2, "z_flip:0.1", 1, 3, false, 0},
                          {"zflip-n3-auto", 3, "z_flip:0.05", 0, 1, true, 0.5}};
    std::uint64_t seed = 9000;
    for (const Case& cs : cases) {
        SessionConfig s;
        s.n = cs.n;
        s.rounds = 40000;
        s.seed = ++seed;
        s.channel = cs.channel;
        DistillSettings d;
        d.params.k = cs.k;
        d.params.r = cs.r;
        d.auto_params = cs.autop;
        d.hash_fraction = cs.hash;
        const bool eve = std::string(cs.channel) != "identity";
        const PipelineResult p = run_pipeline(s, d);
        const ProcessRun first = run_processes(s, d, eve, std::string("c9-") + cs.tag + "-a");
        const ProcessRun second = run_processes(s, d, eve, std::string("c9-") + cs.tag + "-b");
        const std::string want_a = bit_string(p.final_alice), want_b = bit_string(p.final_bob);
        const bool keys = first.alice == 0 && first.bob == 0 && (!eve || first.eve == 0) &&
                          first.alice_report.value("final_key", "?") == want_a &&
                          first.bob_report.value("final_key", "?") == want_b && !p.final_alice.empty();
        const bool replay = first.alice_transcript == second.alice_transcript &&
                            first.bob_transcript == second.bob_transcript && !first.alice_transcript.empty();
        o.require(keys && replay, std::string(cs.tag) + (eve ? " (3 processes)" : " (2 processes)") +
                                      ": final keys " + std::to_string(p.final_alice.size()) +
                                      " bits match pipeline: " + (keys ? "yes" : "no") +
                                      ", transcripts replay identically: " + (replay ? "yes" : "no"));
    }

    // In-process frame fuzzing of every role.
    using namespace harness;
    SessionConfig s;
    s.n = 2;
    s.rounds = 1500;
    s.seed = 9100;
    s.sample_fraction = 0.3;
    DistillSettings d;
    d.params.k = 1;
    d.params.r = 3;
    const Trio good = run_trio(role_config(net::Role::Alice, s, d), role_config(net::Role::Bob, s, d));
    const auto to_bob = received_bytes(good.bob), to_alice = received_bytes(good.alice);
    Stream rng = gen::stream(9101);
    std::uint64_t runs = 0, bad = 0;
    for (int it = 0; it < 1000; ++it)
        for (net::Role role : {net::Role::Alice, net::Role::Bob, net::Role::Eve}) {
            auto bytes = role == net::Role::Alice ? to_alice : to_bob;
            const auto mode = uniform_below(rng, 3);
            if (mode == 0)
                for (int m = 1 + static_cast<int>(uniform_below(rng, 4)); m > 0; --m)
                    bytes[uniform_below(rng, bytes.size())] ^= static_cast<std::uint8_t>(1 + uniform_below(rng, 255));
            else if (mode == 1)
                bytes.resize(uniform_below(rng, bytes.size()));
            else
                bytes = gen::bytes(rng, 256);
            net::RoleReport r;
            try {
                r = role == net::Role::Eve
                        ? run_eve_against(role_config(role, s, d), bytes, gen::bytes(rng, 64))
                        : run_against(role, role_config(role, s, d), bytes);
            } catch (...) {
                ++bad;
                continue;
            }
            ++runs;
            if (r.reason == "internal-error" || (r.exit_code != 0 && r.exit_code != 1 && r.exit_code != 2))
                ++bad;
        }
    o.require(bad == 0 && good.alice.status == "complete",
              "in-process fuzzing: " + std::to_string(runs) + " role runs, " + std::to_string(bad) + " crashes");

    // Process-level: garbage over TCP to a listening Bob must end in exit 1.
    int clean = 0;
    const int attempts = 20;
    for (int it = 0; it < attempts; ++it) {
        const std::string addr = "127.0.0.1:" + std::to_string(free_port());
        const fs::path dir = workdir / "c9-fuzz";
        fs::create_directories(dir);
        const pid_t pb = spawn({cli_path, "netrun", "--role", "bob", "--listen", addr, "--rounds", "100", "--report",
                                (dir / "bob.json").string()},
                               dir / "bob.log");
        try {
            auto stream = net::tcp_connect(net::parse_endpoint(addr), 10000);
            auto junk = gen::bytes(rng, 512);
            if (it % 2 == 0 && junk.size() >= 5) {  // a plausible header first
                junk[0] = junk[1] = 0;
                junk[4] = static_cast<std::uint8_t>(1 + uniform_below(rng, 9));
            }
            stream->write(junk);
            stream->shutdown_write();
            std::uint8_t buf[4096];
            while (stream->read_some(buf) > 0) {
            }
        } catch (const std::exception&) {
        }
        const int code = wait_for(pb);
        clean += code == 1;
    }
    o.require(clean == attempts, "TCP garbage against a Bob process: " + std::to_string(clean) + "/" +
                                     std::to_string(attempts) + " exited 1 without crashing");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-9"};
    std::string dir = "acceptance_run";
    int only = 0;
    app.add_option("--cli", cli_path, "Path to the qudit-qkd executable")->required()->check(CLI::ExistingFile);
    app.add_option("--workdir", dir, "Scratch directory for reports and transcripts");
    app.add_option("--only", only, "Run a single criterion");
    CLI11_PARSE(app, argc, argv);
    cli_path = fs::absolute(cli_path).string();
    workdir = fs::absolute(dir);
    fs::create_directories(workdir);

    const std::pair<const char*, std::function<Check()>> criteria[] = {
        {"threshold reproduction", criterion1},   {"iff statement", criterion2},
        {"condition implication", criterion3},    {"conjugation identity", criterion4},
        {"Monte Carlo vs analytic", criterion5},  {"recursion fidelity", criterion6},
        {"end-to-end feasibility", criterion7},   {"boundary behaviour", criterion8},
        {"netrun equivalence and fuzzing", criterion9},
    };
    int failed = 0;
    for (int i = 0; i < 9; ++i) {
        if (only != 0 && only != i + 1)
            continue;
        const auto t0 = Clock::now();
        Check out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.notes.push_back(std::string("exception: ") + e.what());
        }
        failed += !out.pass;
        std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " (" << criteria[i].first << ", "
                  << fmt(seconds_since(t0), 3) << " s)\n";
        for (const auto& n : out.notes)
            std::cout << "        " << n << '\n';
        std::cout.flush();
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
