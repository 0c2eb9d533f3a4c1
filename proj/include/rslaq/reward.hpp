#pragma once

// SLA-aware reward: per-slice utilities weighted by the operator policy, a
// scheduler complexity credit, and terminal classification when outage or
// soft targets are breached.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslaq/action_space.hpp"
#include "rslaq/policy.hpp"
#include "rslaq/telemetry.hpp"

namespace rslaq {

struct SliceRewardSpec {
    std::string name;
    double weight = 0.0;
    std::optional<SlaSpec> sla;
    OptimizationKpi kpi = OptimizationKpi::maximize_mean_throughput;
};

struct RewardSpec {
    std::vector<SliceRewardSpec> slices;
    double max_cell_rate_bps = 0.0;
    int smoothing_window = 10;
};

inline RewardSpec make_reward_spec(const A1Policy& policy, double max_cell_rate_bps,
                                   int smoothing_window = 10) {
    RewardSpec spec;
    spec.max_cell_rate_bps = max_cell_rate_bps;
    spec.smoothing_window = smoothing_window;
    for (const auto& s : policy.slices) {
        SliceRewardSpec r;
        r.name = s.name;
        r.weight = s.weight;
        r.sla = s.sla;
        r.kpi = s.optimization_kpi;
        spec.slices.push_back(std::move(r));
    }
    return spec;
}

inline double scheduler_cost(Scheduler s) { return s == Scheduler::RR ? 1.0 : 2.0; }

// Per-slice KPI view for one frame: instantaneous rates for the utility,
// window-averaged rates for SLA checks.
struct SliceKpis {
    std::vector<double> thr_ue_bps;
    std::vector<double> thr_ue_sm_bps;
    std::vector<double> demand_ue_sm_bps;
    std::vector<double> bfs_ue;
    std::vector<double> tdp_ue_bytes;
    double thr_slice_bps = 0.0;
    double thr_slice_sm_bps = 0.0;
    double demand_slice_sm_bps = 0.0;
    double bfs_slice = 0.0;
    double tdp_slice_bytes = 0.0;
};

struct KpiFrame {
    std::vector<SliceKpis> slices;
};

// Fraction of a slice in violation of one predicate: per-user predicates
// count offending users, slice predicates are all or nothing.
inline double vrsla(const KpiPredicate& pred, const SliceKpis& kpis) {
    MetricSnapshot snap;
    snap.scope = pred.scope;
    if (pred.scope == Scope::per_ue) {
        switch (pred.metric) {
            case Metric::throughput:
                snap.values = kpis.thr_ue_sm_bps;
                snap.demand_bps = kpis.demand_ue_sm_bps;
                break;
            case Metric::buffer_occupancy: snap.values = kpis.bfs_ue; break;
            case Metric::dropped_bytes: snap.values = kpis.tdp_ue_bytes; break;
        }
        if (snap.values.empty()) return 0.0;
        std::size_t violators = evaluate_predicate(pred, snap).size();
        return double(violators) / double(snap.values.size());
    }
    switch (pred.metric) {
        case Metric::throughput:
            snap.values = {kpis.thr_slice_sm_bps};
            snap.demand_bps = {kpis.demand_slice_sm_bps};
            break;
        case Metric::buffer_occupancy: snap.values = {kpis.bfs_slice}; break;
        case Metric::dropped_bytes: snap.values = {kpis.tdp_slice_bytes}; break;
    }
    return evaluate_predicate(pred, snap).empty() ? 0.0 : 1.0;
}

enum class RewardKind { normal, soft_terminal, outage_terminal };

struct PredicateHit {
    int slice = 0;
    std::string key;
    double vrsla = 0.0;
    bool outage = false;
};

struct RewardOutcome {
    double value = 0.0;
    RewardKind kind = RewardKind::normal;
    std::vector<bool> outage_flags;
    std::vector<bool> soft_flags;
    std::vector<PredicateHit> hits;
};

inline RewardOutcome compute_reward(const KpiFrame& frame, const RewardSpec& spec,
                                    Scheduler sched) {
    int J = int(spec.slices.size());
    if (int(frame.slices.size()) != J)
        throw std::invalid_argument("kpi frame arity does not match the reward spec");
    RewardOutcome out;
    out.outage_flags.assign(J, false);
    out.soft_flags.assign(J, false);
    for (int j = 0; j < J; ++j) {
        const auto& slice = spec.slices[j];
        if (!slice.sla) continue;
        double budget = 1.0 - slice.sla->reliability;
        for (const auto& pred : slice.sla->outage) {
            double v = vrsla(pred, frame.slices[j]);
            if (v > budget) {
                out.outage_flags[j] = true;
                out.hits.push_back({j, pred.key, v, true});
            }
        }
        for (const auto& pred : slice.sla->soft) {
            double v = vrsla(pred, frame.slices[j]);
            if (v > budget) {
                out.soft_flags[j] = true;
                out.hits.push_back({j, pred.key, v, false});
            }
        }
    }
    bool any_outage = std::any_of(out.outage_flags.begin(), out.outage_flags.end(),
                                  [](bool b) { return b; });
    if (any_outage) {
        out.kind = RewardKind::outage_terminal;
        double penalty = 0.0;
        for (int j = 0; j < J; ++j)
            if (out.outage_flags[j]) penalty += spec.slices[j].weight;
        out.value = -penalty;
        return out;
    }
    bool any_soft =
        std::any_of(out.soft_flags.begin(), out.soft_flags.end(), [](bool b) { return b; });
    if (any_soft) {
        out.kind = RewardKind::soft_terminal;
        out.value = 0.0;
        return out;
    }
    double value = 0.0;
    for (int j = 0; j < J; ++j) {
        const SliceKpis& k = frame.slices[j];
        double h = 0.0;
        if (!k.thr_ue_bps.empty()) {
            if (spec.slices[j].kpi == OptimizationKpi::minimize_max_buffer) {
                double worst = *std::max_element(k.bfs_ue.begin(), k.bfs_ue.end());
                h = std::exp(-worst);
            } else {
                double mean = 0.0;
                for (double t : k.thr_ue_bps) mean += t;
                mean /= double(k.thr_ue_bps.size());
                h = std::clamp(mean / spec.max_cell_rate_bps, 0.0, 1.0);
            }
        }
        value += spec.slices[j].weight * h;
    }
    out.value = value + 1.0 / scheduler_cost(sched);
    return out;
}

// Maintains the smoothing windows across frames and surfaces the per-frame
// KPI view used for the last evaluation.
class RewardEngine {
  public:
    explicit RewardEngine(RewardSpec spec) : spec_(std::move(spec)) {
        if (spec_.slices.empty()) throw std::invalid_argument("reward spec has no slices");
        if (spec_.smoothing_window < 1)
            throw std::invalid_argument("smoothing window must be positive");
        if (spec_.max_cell_rate_bps <= 0)
            throw std::invalid_argument("max cell rate must be positive");
    }

    const RewardSpec& spec() const { return spec_; }
    const KpiFrame& last() const { return last_; }

    KpiFrame ingest(const KpmRecord& rec) {
        int J = int(spec_.slices.size());
        if (rec.num_slices != J)
            throw std::invalid_argument("record arity does not match the reward spec");
        if (windows_.size() != rec.ue.size()) windows_.assign(rec.ue.size(), {});
        KpiFrame frame;
        frame.slices.resize(J);
        for (std::size_t i = 0; i < rec.ue.size(); ++i) {
            auto& w = windows_[i];
            w.push_back({rec.ue[i].thr_bps, rec.ue[i].demand_bps});
            if (int(w.size()) > spec_.smoothing_window) w.pop_front();
            double thr_sm = 0.0, dem_sm = 0.0;
            for (const auto& e : w) {
                thr_sm += e.thr_bps;
                dem_sm += e.demand_bps;
            }
            thr_sm /= double(w.size());
            dem_sm /= double(w.size());
            SliceKpis& k = frame.slices[rec.ue_slice[i]];
            k.thr_ue_bps.push_back(rec.ue[i].thr_bps);
            k.thr_ue_sm_bps.push_back(thr_sm);
            k.demand_ue_sm_bps.push_back(dem_sm);
            k.bfs_ue.push_back(rec.ue[i].bfs);
            k.tdp_ue_bytes.push_back(rec.ue[i].tdp);
            k.thr_slice_bps += rec.ue[i].thr_bps;
            k.thr_slice_sm_bps += thr_sm;
            k.demand_slice_sm_bps += dem_sm;
            k.tdp_slice_bytes += rec.ue[i].tdp;
        }
        for (auto& k : frame.slices) {
            if (k.bfs_ue.empty()) continue;
            double sum = 0.0;
            for (double b : k.bfs_ue) sum += b;
            k.bfs_slice = sum / double(k.bfs_ue.size());
        }
        return frame;
    }

    RewardOutcome evaluate(const KpmRecord& rec, Scheduler sched) {
        last_ = ingest(rec);
        return compute_reward(last_, spec_, sched);
    }

    void reset() { windows_.clear(); }

  private:
    struct WindowEntry {
        double thr_bps = 0.0;
        double demand_bps = 0.0;
    };

    RewardSpec spec_;
    std::vector<std::deque<WindowEntry>> windows_;
    KpiFrame last_;
};

}  // namespace rslaq
