// Command line front end: train agents, evaluate controllers, run the full
// benchmark, dump the action grid, lint policy files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rslaq/env.hpp"
#include "rslaq/harness.hpp"
#include "rslaq/policy.hpp"
#include "rslaq/scenario.hpp"

namespace fs = std::filesystem;
using namespace rslaq;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

Scenario resolve_scenario(const std::string& preset, const std::string& config) {
    if (!preset.empty() && !config.empty())
        throw std::invalid_argument("give either --scenario or --config, not both");
    if (!preset.empty()) return preset_scenario(preset);
    if (!config.empty()) return scenario_from_json(read_file(config));
    throw std::invalid_argument("one of --scenario or --config is required");
}

std::vector<std::pair<std::string, std::vector<double>>> reliability_series(
    const std::vector<RunReport>& reports, std::size_t slice) {
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const RunReport& r : reports) {
        std::vector<double> ys;
        int bad = 0;
        for (std::size_t f = 0; f < r.outage_trace.size(); ++f) {
            bad += r.outage_trace[f][slice];
            ys.push_back(1.0 - double(bad) / double(f + 1));
        }
        series.emplace_back(r.controller, std::move(ys));
    }
    return series;
}

int cmd_train(const std::string& preset, const std::string& config,
              const std::string& controller, int steps, std::int64_t seed,
              const std::string& out_dir, bool plot) {
    Scenario sc = resolve_scenario(preset, config);
    ControllerKind kind = controller_from_name(controller);
    if (kind != ControllerKind::rslaq && kind != ControllerKind::opt)
        throw std::invalid_argument("--controller must be rslaq or opt for training");

    TrainOptions opt;
    opt.steps = steps;
    opt.seed = seed >= 0 ? std::uint64_t(seed) : sc.seed;
    opt.sla_blind = kind == ControllerKind::opt;

    int J = int(sc.load.size());
    int num_actions = ActionSpace(J).size();
    QNetwork online(J, num_actions, opt.seed), target(J, num_actions, opt.seed);
    TrainingRun run = run_training(sc, online, target, opt);

    fs::create_directories(out_dir);
    {
        std::ofstream ck(fs::path(out_dir) / "checkpoint.qnet", std::ios::binary);
        online.save(ck);
        if (!ck) throw std::runtime_error("cannot write checkpoint");
    }
    write_file(fs::path(out_dir) / "train_log.csv", train_log_csv(run.log));
    write_file(fs::path(out_dir) / "alarms.ndjson", alarms_ndjson(run.alarms));
    if (plot) {
        std::vector<double> rewards;
        for (const auto& l : run.log) rewards.push_back(l.reward);
        write_file(fs::path(out_dir) / "reward.svg",
                   svg_line_chart("reward per step (" + sc.name + ")", {{"reward", rewards}}));
    }

    int terminals = 0;
    for (const auto& l : run.log) terminals += l.terminal ? 1 : 0;
    std::cout << "trained " << controller << " on " << sc.name << ": " << run.log.size()
              << " steps, " << terminals << " terminal frames, " << run.alarms.size()
              << " alarms, final epsilon " << run.final_epsilon << ", "
              << run.wall_clock_s << " s\n";
    for (const AlarmEvent& a : run.alarms)
        std::cout << "alarm: insufficient resources for " << a.slice_name << " ("
                  << a.predicate << ") at frame " << a.frame << "\n";
    std::cout << "wrote " << (fs::path(out_dir) / "checkpoint.qnet").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& preset, const std::string& config,
             const std::string& controller, const std::string& checkpoint, int frames,
             std::int64_t seed, const std::string& out_dir, bool plot) {
    Scenario sc = resolve_scenario(preset, config);
    ControllerKind kind = controller_from_name(controller);

    int J = int(sc.load.size());
    QNetwork net(J, ActionSpace(J).size(), 0);
    QNetwork* net_ptr = nullptr;
    if (kind == ControllerKind::rslaq || kind == ControllerKind::opt) {
        if (checkpoint.empty())
            throw std::invalid_argument("--checkpoint is required for learned controllers");
        std::ifstream ck(checkpoint, std::ios::binary);
        if (!ck) throw std::invalid_argument("cannot open '" + checkpoint + "'");
        net.load(ck);
        net_ptr = &net;
    }

    std::uint64_t s = seed >= 0 ? std::uint64_t(seed) : sc.seed;
    RunReport rep = run_eval(sc, kind, net_ptr, frames, s);

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "report.csv", report_csv({rep}));
    write_file(fs::path(out_dir) / "alarms.ndjson", alarms_ndjson(rep.alarms));
    {
        std::ofstream kcsv(fs::path(out_dir) / "kpm.csv", std::ios::binary);
        kcsv << kpm_csv_header() << "\n";
        for (const KpmRecord& rec : rep.kpm) append_kpm_csv(kcsv, rec);
        if (!kcsv) throw std::runtime_error("cannot write kpm.csv");
    }
    if (plot && rep.frames > 0) {
        for (std::size_t j = 0; j < rep.slices.size(); ++j)
            write_file(fs::path(out_dir) / ("reliability_" + rep.slices[j].name + ".svg"),
                       svg_line_chart("running reliability: " + rep.slices[j].name,
                                      reliability_series({rep}, j)));
    }

    std::cout << report_csv({rep});
    std::cout << "mean reward " << rep.mean_reward << ", " << rep.wall_clock_s << " s\n";
    for (const AlarmEvent& a : rep.alarms)
        std::cout << "alarm: insufficient resources for " << a.slice_name << " ("
                  << a.predicate << ") at frame " << a.frame << "\n";
    return 0;
}

int cmd_compare(const std::string& preset, const std::string& config, int steps, int frames,
                std::int64_t seed, const std::string& out_dir, bool plot) {
    Scenario sc = resolve_scenario(preset, config);
    std::uint64_t s = seed >= 0 ? std::uint64_t(seed) : sc.seed;
    auto reports = compare_controllers(sc, steps, frames, s);

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "compare.csv", report_csv(reports));
    if (plot && frames > 0) {
        for (std::size_t j = 0; j < reports[0].slices.size(); ++j)
            write_file(
                fs::path(out_dir) / ("reliability_" + reports[0].slices[j].name + ".svg"),
                svg_line_chart("running reliability: " + reports[0].slices[j].name,
                               reliability_series(reports, j)));
    }

    std::cout << report_csv(reports);
    for (const RunReport& r : reports)
        for (const AlarmEvent& a : r.alarms)
            std::cout << "alarm (" << r.controller << "): insufficient resources for "
                      << a.slice_name << " (" << a.predicate << ") at frame " << a.frame
                      << "\n";
    return 0;
}

int cmd_actions(int slices) {
    ActionSpace space(slices);
    std::cout << "id";
    for (int j = 1; j <= slices; ++j) std::cout << ",t_" << j;
    std::cout << ",scheduler\n";
    for (int id = 0; id < space.size(); ++id) {
        Action a = space.at(id);
        std::cout << id;
        for (int t : a.tenths) std::cout << "," << t;
        std::cout << "," << scheduler_name(a.sched) << "\n";
    }
    return 0;
}

int cmd_validate_policy(const std::string& path) {
    A1Policy p = parse_a1_policy(read_file(path));
    for (const std::string& w : p.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "ok: " << p.slices.size() << " slices\n";
    for (const SlicePolicy& s : p.slices) {
        std::cout << "  " << s.name << ": weight " << s.weight;
        if (s.priority) std::cout << ", priority " << *s.priority;
        if (s.sla)
            std::cout << ", " << s.sla->outage.size() << " outage + " << s.sla->soft.size()
                      << " soft predicates, reliability " << s.sla->reliability;
        else
            std::cout << ", no SLA";
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RAN slice allocator: training, evaluation and benchmark runs"};
    app.require_subcommand(1);

    std::string preset, config, controller = "rslaq", checkpoint, out_dir = "out", policy_file;
    int steps = 1000, frames = 500, slices = 3;
    std::int64_t seed = -1;  // negative means "use the scenario's seed"
    bool plot = false;

    CLI::App* train = app.add_subcommand("train", "train a controller and save a checkpoint");
    train->add_option("--scenario", preset, "preset scenario name");
    train->add_option("--config", config, "scenario JSON file");
    train->add_option("--controller", controller, "rslaq (SLA aware) or opt (SLA blind)");
    train->add_option("--steps", steps, "training steps");
    train->add_option("--seed", seed, "RNG seed override");
    train->add_option("--out", out_dir, "output directory");
    train->add_flag("--plot", plot, "write SVG charts");

    CLI::App* eval = app.add_subcommand("eval", "run one controller and report per-slice KPIs");
    eval->add_option("--scenario", preset, "preset scenario name");
    eval->add_option("--config", config, "scenario JSON file");
    eval->add_option("--controller", controller, "rslaq, opt, rr, pf or bcqi");
    eval->add_option("--checkpoint", checkpoint, "trained network file");
    eval->add_option("--frames", frames, "frames to evaluate");
    eval->add_option("--seed", seed, "RNG seed override");
    eval->add_option("--out", out_dir, "output directory");
    eval->add_flag("--plot", plot, "write SVG charts");

    CLI::App* compare = app.add_subcommand("compare", "benchmark all controllers");
    compare->add_option("--scenario", preset, "preset scenario name");
    compare->add_option("--config", config, "scenario JSON file");
    compare->add_option("--steps", steps, "training steps per learned controller");
    compare->add_option("--frames", frames, "evaluation frames");
    compare->add_option("--seed", seed, "RNG seed override");
    compare->add_option("--out", out_dir, "output directory");
    compare->add_flag("--plot", plot, "write SVG charts");

    CLI::App* actions = app.add_subcommand("actions", "print the action grid as CSV");
    actions->add_option("--slices", slices, "number of slices");

    CLI::App* validate = app.add_subcommand("validate-policy", "parse and summarize a policy file");
    validate->add_option("file", policy_file, "policy JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train->parsed())
            return cmd_train(preset, config, controller, steps, seed, out_dir, plot);
        if (eval->parsed())
            return cmd_eval(preset, config, controller, checkpoint, frames, seed, out_dir,
                            plot);
        if (compare->parsed())
            return cmd_compare(preset, config, steps, frames, seed, out_dir, plot);
        if (actions->parsed()) return cmd_actions(slices);
        if (validate->parsed()) return cmd_validate_policy(policy_file);
    } catch (const PolicyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
