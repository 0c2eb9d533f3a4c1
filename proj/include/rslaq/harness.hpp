#pragma once

// Benchmark plumbing: training/evaluation drivers over SliceEnv, the
// resource-exhaustion alarm, and flat-file report writers (CSV, NDJSON, SVG).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rslaq/agent.hpp"
#include "rslaq/env.hpp"
#include "rslaq/nn.hpp"
#include "rslaq/scenario.hpp"

namespace rslaq {

enum class ControllerKind { rslaq, opt, rr, pf, bcqi };

inline const char* controller_name(ControllerKind k) {
    switch (k) {
        case ControllerKind::rslaq: return "rslaq";
        case ControllerKind::opt: return "opt";
        case ControllerKind::rr: return "rr";
        case ControllerKind::pf: return "pf";
        case ControllerKind::bcqi: return "bcqi";
    }
    throw std::invalid_argument("bad controller kind");
}

inline ControllerKind controller_from_name(const std::string& s) {
    if (s == "rslaq") return ControllerKind::rslaq;
    if (s == "opt") return ControllerKind::opt;
    if (s == "rr") return ControllerKind::rr;
    if (s == "pf") return ControllerKind::pf;
    if (s == "bcqi") return ControllerKind::bcqi;
    throw std::invalid_argument("unknown controller '" + s + "'");
}

inline const char* reward_kind_name(RewardKind k) {
    switch (k) {
        case RewardKind::normal: return "normal";
        case RewardKind::soft_terminal: return "soft_terminal";
        case RewardKind::outage_terminal: return "outage_terminal";
    }
    throw std::invalid_argument("bad reward kind");
}

struct AlarmEvent {
    std::uint64_t frame = 0;
    int slice = -1;
    std::string slice_name;
    std::string predicate;
    double vrsla = 0.0;
};

// One frame's worth of evidence for the offline scan.
struct AllocObservation {
    std::vector<PredicateHit> hits;
    std::vector<double> p_final;
    std::vector<double> p_max;
};

// Raises "not enough spectrum" once per (slice, predicate): the predicate has
// to stay violated for a full window while the slice already holds its
// maximum possible share. During training the agent rarely parks on the
// maximum by itself, so after a window of persistent violation the detector
// probes: it overrides the policy with an all-in split for the worst slice
// and lets the evidence accumulate. If the violation survives the probe, the
// alarm fires; if it clears, the probe ends and the agent resumes.
class AlarmDetector {
public:
    AlarmDetector(const ActionSpace* space, std::vector<int> priorities,
                  std::vector<std::string> slice_names, int window = 50)
        : space_(space),
          priorities_(std::move(priorities)),
          names_(std::move(slice_names)),
          window_(window) {
        if (window_ < 1) throw std::invalid_argument("alarm window must be positive");
    }

    void observe(std::uint64_t frame, const std::vector<PredicateHit>& hits,
                 const std::vector<double>& p_final, const std::vector<double>& p_max) {
        std::set<Key> seen;
        for (const PredicateHit& h : hits) {
            if (!h.outage) continue;
            Key k{h.slice, h.key};
            seen.insert(k);
            Track& tr = tracks_[k];
            tr.violated += 1;
            bool at_max = p_final[std::size_t(h.slice)] >= p_max[std::size_t(h.slice)] - 1e-9;
            tr.at_max = at_max ? tr.at_max + 1 : 0;
            if (!tr.alarmed && tr.at_max >= window_) {
                tr.alarmed = true;
                AlarmEvent ev;
                ev.frame = frame;
                ev.slice = h.slice;
                if (h.slice >= 0 && h.slice < int(names_.size()))
                    ev.slice_name = names_[std::size_t(h.slice)];
                ev.predicate = h.key;
                ev.vrsla = h.vrsla;
                alarms_.push_back(ev);
            }
        }
        for (auto& [k, tr] : tracks_) {
            if (!seen.count(k)) {
                tr.violated = 0;
                tr.at_max = 0;
            }
        }
        if (probing_ && (!seen.count(probe_key_) || tracks_[probe_key_].alarmed))
            probing_ = false;
        if (!probing_ && space_) {
            const Key* best = nullptr;
            for (const auto& [k, tr] : tracks_) {
                if (tr.alarmed || tr.violated < window_) continue;
                if (!best || priority_of(k.first) < priority_of(best->first) ||
                    (priority_of(k.first) == priority_of(best->first) && k < *best))
                    best = &k;
            }
            if (best) {
                probing_ = true;
                probe_key_ = *best;
                std::vector<int> tenths(std::size_t(space_->num_slices()), 0);
                tenths[std::size_t(probe_key_.first)] = 10;
                probe_action_ = space_->id_of(tenths, Scheduler::PF);
            }
        }
    }

    int filter_action(int proposed) const { return probing_ ? probe_action_ : proposed; }
    bool probing() const { return probing_; }
    const std::vector<AlarmEvent>& alarms() const { return alarms_; }

private:
    using Key = std::pair<int, std::string>;
    struct Track {
        int violated = 0;
        int at_max = 0;
        bool alarmed = false;
    };

    int priority_of(int slice) const {
        if (slice >= 0 && slice < int(priorities_.size()))
            return priorities_[std::size_t(slice)];
        return std::numeric_limits<int>::max();
    }

    const ActionSpace* space_;
    std::vector<int> priorities_;
    std::vector<std::string> names_;
    int window_;
    std::map<Key, Track> tracks_;
    std::vector<AlarmEvent> alarms_;
    bool probing_ = false;
    Key probe_key_;
    int probe_action_ = 0;
};

inline std::vector<AlarmEvent> detect_insufficient_resources(
    const std::vector<AllocObservation>& history, int window = 50,
    const std::vector<std::string>& slice_names = {}) {
    AlarmDetector det(nullptr, {}, slice_names, window);
    for (std::size_t f = 0; f < history.size(); ++f)
        det.observe(f, history[f].hits, history[f].p_final, history[f].p_max);
    return det.alarms();
}

struct SliceReport {
    std::string name;
    double mean_thr_bps = 0.0;
    double mean_bfs = 0.0;
    int outage_frames = 0;
    int soft_frames = 0;
    double reliability = 1.0;  // 1 - outage_frames / frames
};

struct RunReport {
    std::string controller;
    std::string scenario;
    int frames = 0;
    bool reliability_defined = false;
    double mean_reward = 0.0;
    std::vector<SliceReport> slices;
    std::vector<double> reward_trace;
    std::vector<RewardKind> kind_trace;
    std::vector<std::vector<char>> outage_trace;  // [frame][slice]
    std::vector<KpmRecord> kpm;
    std::vector<AlarmEvent> alarms;
    double wall_clock_s = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline int greedy_action(const std::vector<double>& q) {
    int best = 0;
    for (int i = 1; i < int(q.size()); ++i)
        if (q[std::size_t(i)] > q[std::size_t(best)]) best = i;
    return best;
}

}  // namespace detail

// Streams `frames` frames under one controller and tallies SLA bookkeeping.
// The static baselines hold the policy-weight split and their scheduler; the
// learned ones act greedily from the previous frame's state.
inline RunReport run_eval(const Scenario& sc, ControllerKind kind, QNetwork* net, int frames,
                          std::uint64_t seed) {
    bool learned = kind == ControllerKind::rslaq || kind == ControllerKind::opt;
    if (learned && !net)
        throw std::invalid_argument("controller needs a trained checkpoint");
    auto t0 = std::chrono::steady_clock::now();

    SliceEnv env(sc, seed);
    NetworkState state = env.reset();
    int J = env.num_slices();

    RunReport rep;
    rep.controller = controller_name(kind);
    rep.scenario = sc.name;
    rep.frames = std::max(frames, 0);
    if (rep.frames == 0) {
        rep.wall_clock_s = detail::seconds_since(t0);
        return rep;
    }
    rep.slices.resize(std::size_t(J));
    for (int j = 0; j < J; ++j) rep.slices[std::size_t(j)].name = sc.policy.slices[std::size_t(j)].name;

    Scheduler fixed = Scheduler::RR;
    if (kind == ControllerKind::pf) fixed = Scheduler::PF;
    if (kind == ControllerKind::bcqi) fixed = Scheduler::BCQI;

    std::vector<std::string> names;
    for (const auto& s : rep.slices) names.push_back(s.name);
    std::vector<AllocObservation> history;
    history.reserve(std::size_t(rep.frames));

    for (int f = 0; f < rep.frames; ++f) {
        std::vector<double> plan;
        Scheduler sched = fixed;
        if (learned) {
            int a = detail::greedy_action(net->predict(state));
            Action act = env.actions().at(a);
            plan = compose_allocation(env.p_sta(), act.tenths).p_final;
            sched = act.sched;
        } else {
            plan = env.weights();
        }
        auto [next, out] = env.step_plan(plan, sched);
        state = next;

        rep.reward_trace.push_back(out.value);
        rep.kind_trace.push_back(out.kind);
        rep.mean_reward += out.value;
        const KpmRecord& rec = env.last_record();
        rep.kpm.push_back(rec);
        std::vector<char> flags(std::size_t(J), 0);
        for (int j = 0; j < J; ++j) {
            auto& sl = rep.slices[std::size_t(j)];
            bool outage = out.outage_flags[std::size_t(j)];
            flags[std::size_t(j)] = outage ? 1 : 0;
            sl.outage_frames += outage ? 1 : 0;
            sl.soft_frames += out.soft_flags[std::size_t(j)] ? 1 : 0;
            sl.mean_thr_bps += rec.slice[std::size_t(j)].thr_bps;
            sl.mean_bfs += rec.slice[std::size_t(j)].bfs;
        }
        rep.outage_trace.push_back(std::move(flags));
        history.push_back({out.hits, plan, env.max_plan()});
    }

    for (auto& sl : rep.slices) {
        sl.mean_thr_bps /= rep.frames;
        sl.mean_bfs /= rep.frames;
        sl.reliability = 1.0 - double(sl.outage_frames) / double(rep.frames);
    }
    rep.mean_reward /= rep.frames;
    rep.reliability_defined = true;
    rep.alarms = detect_insufficient_resources(history, 50, names);
    rep.wall_clock_s = detail::seconds_since(t0);
    return rep;
}

struct TrainOptions {
    int steps = 1000;
    std::uint64_t seed = 1;
    bool sla_blind = false;
    int alarm_window = 50;
    bool probe = true;
    Hyperparams hp;

    TrainOptions() {
        // Training profile: explore hard at first, never truncate episodes
        // (the scored terminals do the resetting).
        hp.epsilon0 = 1.0;
        hp.epsilon_decay = 0.995;
        hp.forced_reset_period = std::numeric_limits<int>::max();
    }
};

struct TrainingRun {
    std::vector<TrainStepLog> log;
    std::vector<AlarmEvent> alarms;
    double final_epsilon = 0.0;
    double wall_clock_s = 0.0;
};

inline TrainingRun run_training(const Scenario& sc, QNetwork& online, QNetwork& target,
                                const TrainOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    SliceEnv env(sc, opt.seed, opt.sla_blind);
    std::vector<int> priorities;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < sc.policy.slices.size(); ++j) {
        priorities.push_back(sc.policy.slices[j].priority.value_or(int(j) + 1));
        names.push_back(sc.policy.slices[j].name);
    }
    AlarmDetector det(opt.probe ? &env.actions() : nullptr, priorities, names,
                      opt.alarm_window);

    Hyperparams hp = opt.hp;
    hp.steps = opt.steps;
    ReplayBuffer<NetworkState> buffer(hp.replay_capacity);
    Rng rng(opt.seed, 5);

    auto override_action = [&det](int, int proposed) { return det.filter_action(proposed); };
    auto on_step = [&det, &env](const TrainStepLog& log) {
        det.observe(std::uint64_t(log.step), env.last_outcome().hits, env.last_plan(),
                    env.max_plan());
    };
    TrainResult res = train_agent(env, online, target, buffer, hp, rng, override_action, on_step);

    TrainingRun run;
    run.log = std::move(res.log);
    run.alarms = det.alarms();
    run.final_epsilon = res.final_epsilon;
    run.wall_clock_s = detail::seconds_since(t0);
    return run;
}

// Full benchmark: train the SLA-aware agent and the SLA-blind optimizer, then
// evaluate both plus the three static baselines on fresh traffic.
inline std::vector<RunReport> compare_controllers(const Scenario& sc, int train_steps,
                                                  int eval_frames, std::uint64_t seed) {
    int J = int(sc.load.size());
    int num_actions = ActionSpace(J).size();

    QNetwork rslaq_net(J, num_actions, seed), rslaq_tgt(J, num_actions, seed);
    TrainOptions topt;
    topt.steps = train_steps;
    topt.seed = seed;
    run_training(sc, rslaq_net, rslaq_tgt, topt);

    QNetwork opt_net(J, num_actions, seed), opt_tgt(J, num_actions, seed);
    TrainOptions oopt = topt;
    oopt.sla_blind = true;
    run_training(sc, opt_net, opt_tgt, oopt);

    std::uint64_t eval_seed = seed + 1000;
    std::vector<RunReport> out;
    out.push_back(run_eval(sc, ControllerKind::rslaq, &rslaq_net, eval_frames, eval_seed));
    out.push_back(run_eval(sc, ControllerKind::opt, &opt_net, eval_frames, eval_seed));
    out.push_back(run_eval(sc, ControllerKind::rr, nullptr, eval_frames, eval_seed));
    out.push_back(run_eval(sc, ControllerKind::pf, nullptr, eval_frames, eval_seed));
    out.push_back(run_eval(sc, ControllerKind::bcqi, nullptr, eval_frames, eval_seed));
    return out;
}

namespace detail {

inline std::string fmt_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::string report_csv_header() {
    return "controller,scenario,slice,mean_thr_bps,mean_bfs,outage_frames,soft_frames,"
           "reliability";
}

inline std::string report_csv(const std::vector<RunReport>& reports) {
    std::string out = report_csv_header() + "\n";
    for (const RunReport& r : reports) {
        for (const SliceReport& s : r.slices) {
            out += r.controller;
            out += ',';
            out += r.scenario;
            out += ',';
            out += s.name;
            out += ',';
            out += detail::fmt_num(s.mean_thr_bps);
            out += ',';
            out += detail::fmt_num(s.mean_bfs);
            out += ',';
            out += std::to_string(s.outage_frames);
            out += ',';
            out += std::to_string(s.soft_frames);
            out += ',';
            out += detail::fmt_num(s.reliability);
            out += '\n';
        }
    }
    return out;
}

inline std::string train_log_csv(const std::vector<TrainStepLog>& log) {
    std::string out = "step,action,reward,kind,epsilon,loss,forced_reset,terminal\n";
    for (const TrainStepLog& l : log) {
        out += std::to_string(l.step);
        out += ',';
        out += std::to_string(l.action);
        out += ',';
        out += detail::fmt_num(l.reward);
        out += ',';
        out += reward_kind_name(l.kind);
        out += ',';
        out += detail::fmt_num(l.epsilon);
        out += ',';
        out += detail::fmt_num(l.loss);
        out += ',';
        out += l.forced_reset ? '1' : '0';
        out += ',';
        out += l.terminal ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline std::string alarms_ndjson(const std::vector<AlarmEvent>& alarms) {
    std::string out;
    for (const AlarmEvent& a : alarms) {
        nlohmann::json doc;
        doc["frame"] = a.frame;
        doc["slice"] = a.slice_name;
        doc["slice_index"] = a.slice;
        doc["predicate"] = a.predicate;
        doc["vrsla"] = a.vrsla;
        out += doc.dump();
        out += '\n';
    }
    return out;
}

// Minimal self-contained chart, enough to eyeball a training curve.
inline std::string svg_line_chart(
    const std::string& title,
    const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const int width = 720, height = 400;
    const int ml = 60, mr = 150, mt = 36, mb = 36;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t n = 0;
    for (const auto& [name, ys] : series) {
        n = std::max(n, ys.size());
        for (double y : ys)
            if (std::isfinite(y)) {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    double span_x = double(std::max<std::size_t>(n, 2) - 1);

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\">\n",
                  width, height, width, height);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">%s"
                  "</text>\n",
                  ml, title.c_str());
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#444\"/>\n", ml,
                  height - mb, width - mr, height - mb);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#444\"/>\n", ml, mt,
                  ml, height - mb);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"6\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">%s"
                  "</text>\n",
                  mt + 10, detail::fmt_num(hi).c_str());
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"6\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">%s"
                  "</text>\n",
                  height - mb, detail::fmt_num(lo).c_str());
    svg += buf;

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& ys = series[k].second;
        const char* color = colors[k % 6];
        if (ys.size() >= 2) {
            svg += "<polyline fill=\"none\" stroke=\"";
            svg += color;
            svg += "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < ys.size(); ++i) {
                double x = ml + double(i) / span_x * (width - ml - mr);
                double yv = std::isfinite(ys[i]) ? ys[i] : lo;
                double y = mt + (hi - yv) / (hi - lo) * (height - mt - mb);
                std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
                svg += buf;
            }
            svg += "\"/>\n";
        }
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%zu\" width=\"12\" height=\"3\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%zu\" font-family=\"sans-serif\" font-size=\"12\">"
                      "%s</text>\n",
                      width - mr + 12, mt + 18 * k + 6, color, width - mr + 30,
                      mt + 18 * k + 11, series[k].first.c_str());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace rslaq
