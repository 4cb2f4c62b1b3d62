// SPDX-License-Identifier: Apache-2.0
// Command-line front end: train, eval, calibrate-eps, parse-arr, sinr-check.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "uwacr/bellhop.hpp"
#include "uwacr/bench.hpp"
#include "uwacr/sinr_check.hpp"

namespace fs = std::filesystem;
using namespace uwacr;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitEmpty = 3;

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

AppConfig resolve_config(const GlobalOptions& g) {
    AppConfig c = g.config.empty() ? parse_config(nlohmann::json{{"version", kConfigVersion}}) : load_config(g.config);
    if (g.seed) {
        c.agent.seed = *g.seed;
        c.bench.seed = *g.seed;
    }
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path checkpoint_path(const AppConfig& c, const GlobalOptions& g, const std::string& flag) {
    if (!flag.empty()) return flag;
    const fs::path p = c.bench.checkpoint;
    return p.is_absolute() ? p : fs::path(g.out) / p;
}

int cmd_train(const GlobalOptions& g, const std::string& ckpt) {
    const AppConfig c = resolve_config(g);
    const fs::path out = g.out;
    write_resolved_config(out, c);
    const std::string hash = config_hash(c);
    const TrainResult r = train(c.env, c.agent, [&](const TrainingLogRow& row) {
        if (row.episode % 500 == 0)
            std::cerr << "episode " << row.episode << " reward " << row.reward << " throughput " << row.throughput
                      << " success " << row.success_rate << '\n';
    });
    r.agent.save(checkpoint_path(c, g, ckpt).string());
    {
        auto os = open_output(out / "training_log.csv");
        write_training_log_csv(os, r.log, hash);
    }
    {
        auto os = open_output(out / "training_curves.csv");
        write_curves_csv(os, emit_training_curves(r.log, c.bench.smoothing_window), hash);
    }
    std::cout << "episodes " << r.log.size() << (r.plateaued ? " (plateau)" : "") << ", rejected updates "
              << r.rejected_updates << ", checkpoint " << checkpoint_path(c, g, ckpt).string() << '\n';
    return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& ckpt) {
    const AppConfig c = resolve_config(g);
    const fs::path out = g.out;
    std::optional<Agent> agent;
    if (std::find(c.bench.policies.begin(), c.bench.policies.end(), "agent") != c.bench.policies.end()) {
        const fs::path p = checkpoint_path(c, g, ckpt);
        if (!fs::exists(p)) throw Error("missing checkpoint " + p.string());
        agent.emplace(c.agent);
        agent->load(p.string());
    }
    write_resolved_config(out, c);
    const SweepResult res = run_sweep(c, agent ? &*agent : nullptr);
    const std::string hash = config_hash(c);
    {
        auto os = open_output(out / "metrics.csv");
        write_metrics_csv(os, res.rows, hash);
    }
    for (const auto& [key, trace] : res.traces) {
        auto os = open_output(out / "traces" / (key + ".jsonl"));
        write_trace_jsonl(os, trace);
    }
    if (res.rows.empty()) {
        std::cerr << "no episodes evaluated (bench.episodes = 0)\n";
        return kExitEmpty;
    }
    for (const auto& r : res.rows)
        std::cout << r.policy << " snr " << r.snr_db << " dB: SE " << r.se << " +- " << r.se_half_width
                  << " bps/Hz, success " << r.success_rate << '\n';
    return 0;
}

int cmd_calibrate(const GlobalOptions& g, const std::string& mode, std::size_t k, double target, std::size_t grid) {
    const AppConfig c = resolve_config(g);
    EpsilonPolicyConfig pc;
    if (mode == "cqi")
        pc.mode = HeuristicMode::Cqi;
    else if (mode == "ed")
        pc.mode = HeuristicMode::EnergyDetection;
    else
        throw ConfigError("mode", "expected 'cqi' or 'ed'");
    pc.k = k;
    pc.validate(c.env.ofdm.n_rb);
    const auto samples = collect_calibration_samples(c.env, pc, c.bench.calibration_decisions, c.bench.seed);
    const CalibrationResult r = calibrate_epsilon(samples, target);
    auto os = open_output(fs::path(g.out) / "calibration.csv");
    write_hash_line(os, config_hash(c));
    os << "epsilon,success_rate\n" << std::setprecision(10);
    for (std::size_t i = 0; i < grid; ++i) {
        const double eps = grid > 1 ? 0.95 * static_cast<double>(i) / static_cast<double>(grid - 1) : 0.0;
        os << eps << ',' << success_fraction(samples, eps) << '\n';
    }
    std::cout << "epsilon " << r.epsilon << " success " << r.success << " over " << r.decisions << " decisions\n";
    return 0;
}

int cmd_parse_arr(const GlobalOptions& g, const std::string& input) {
    const auto file = bellhop::parse_arrival_file(read_file(input));
    const auto cirs = bellhop::to_cirs(file);
    const std::string round = bellhop::serialize_arrival_file(file);
    if (bellhop::serialize_arrival_file(bellhop::parse_arrival_file(round)) != round)
        throw Error("arrival file does not round-trip");
    auto os = open_output(fs::path(g.out) / "arrivals.csv");
    os << "receiver,tap,delay_s,gain_re,gain_im\n" << std::setprecision(17);
    for (std::size_t r = 0; r < cirs.size(); ++r)
        for (std::size_t t = 0; t < cirs[r].taps.size(); ++t)
            os << r << ',' << t << ',' << cirs[r].taps[t].delay << ',' << cirs[r].taps[t].gain.real() << ','
               << cirs[r].taps[t].gain.imag() << '\n';
    std::cout << cirs.size() << " receivers parsed from " << input << '\n';
    return 0;
}

int cmd_sinr_check(const GlobalOptions& g, std::size_t trials) {
    SinrCheckConfig cfg;
    cfg.seed = g.seed.value_or(1);
    cfg.trials = trials;
    const SinrCheckReport rep = run_sinr_check(cfg);
    auto os = open_output(fs::path(g.out) / "sinr_check.csv");
    write_sinr_check_csv(os, rep);
    std::cout << "max relative error " << rep.max_relative_error << " over " << rep.rows.size() << " subcarriers\n";
    return rep.max_relative_error <= 0.05 ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint spectrum sensing and resource allocation for asynchronous underwater OFDMA"};
    app.require_subcommand(1);
    GlobalOptions g;
    std::uint64_t seed = 0;
    app.add_option("-c,--config", g.config, "JSON config file");
    auto* seed_opt = app.add_option("-s,--seed", seed, "override agent and bench seeds");
    app.add_option("-o,--out", g.out, "output directory");

    std::string ckpt;
    auto* train = app.add_subcommand("train", "train the actor-critic agent");
    train->add_option("--checkpoint", ckpt, "checkpoint path (default <out>/<bench.checkpoint>)");
    auto* eval = app.add_subcommand("eval", "SNR sweep over the configured policies");
    eval->add_option("--checkpoint", ckpt, "checkpoint path (default <out>/<bench.checkpoint>)");

    std::string mode = "cqi";
    std::size_t k = 1;
    double target = 0.9;
    std::size_t grid = 20;
    auto* cal = app.add_subcommand("calibrate-eps", "calibrate the epsilon rate back-off");
    cal->add_option("--mode", mode, "cqi or ed")->check(CLI::IsMember({"cqi", "ed"}));
    cal->add_option("--k", k, "CQI rank, 0 for a random RB");
    cal->add_option("--target", target, "target success fraction");
    cal->add_option("--grid", grid, "points of the exported success curve");

    std::string input;
    auto* arr = app.add_subcommand("parse-arr", "read a BELLHOP arrival file");
    arr->add_option("input", input, "arrival file")->required();

    std::size_t trials = 10000;
    auto* sinr = app.add_subcommand("sinr-check", "closed-form SINR against Monte Carlo");
    sinr->add_option("--trials", trials, "Monte-Carlo trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*train) return cmd_train(g, ckpt);
        if (*eval) return cmd_eval(g, ckpt);
        if (*cal) return cmd_calibrate(g, mode, k, target, grid);
        if (*arr) return cmd_parse_arr(g, input);
        if (*sinr) return cmd_sinr_check(g, trials);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
