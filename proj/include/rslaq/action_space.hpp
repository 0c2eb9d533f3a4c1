#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rslaq {

enum class Scheduler { RR, PF, BCQI };

inline const char* scheduler_name(Scheduler s) {
    switch (s) {
        case Scheduler::RR: return "RR";
        case Scheduler::PF: return "PF";
        case Scheduler::BCQI: return "BCQI";
    }
    throw std::logic_error("unknown scheduler");
}

inline Scheduler scheduler_from_name(std::string name) {
    for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (name == "RR") return Scheduler::RR;
    if (name == "PF") return Scheduler::PF;
    if (name == "BCQI") return Scheduler::BCQI;
    throw std::invalid_argument("unknown scheduler name: " + name);
}

// One control: how the dynamic half of the bandwidth is split (in tenths of
// the whole, summing to 10) plus the MAC scheduler for the next frame.
struct Action {
    std::vector<int> tenths;
    Scheduler sched = Scheduler::RR;
};

// Canonical enumeration: compositions of 10 into J parts in ascending
// lexicographic order, schedulers cycling fastest in RR < PF < BCQI order.
class ActionSpace {
public:
    explicit ActionSpace(int num_slices,
                         std::vector<Scheduler> schedulers = {Scheduler::RR, Scheduler::PF,
                                                              Scheduler::BCQI})
        : num_slices_(num_slices) {
        if (num_slices < 1) throw std::invalid_argument("ActionSpace: need at least one slice");
        if (schedulers.empty()) throw std::invalid_argument("ActionSpace: need at least one scheduler");
        std::vector<bool> present(3, false);
        for (Scheduler s : schedulers) present[static_cast<int>(s)] = true;
        for (int i = 0; i < 3; ++i)
            if (present[i]) scheds_.push_back(static_cast<Scheduler>(i));

        std::vector<int> t(num_slices, 0);
        emit(t, 0, 10);
        for (std::size_t c = 0; c < comps_.size(); ++c) comp_index_[comps_[c]] = static_cast<int>(c);
    }

    int num_slices() const { return num_slices_; }
    int size() const { return static_cast<int>(comps_.size() * scheds_.size()); }
    const std::vector<Scheduler>& schedulers() const { return scheds_; }

    Action at(int id) const {
        if (id < 0 || id >= size()) throw std::out_of_range("ActionSpace: id out of range");
        const int per = static_cast<int>(scheds_.size());
        return Action{comps_[id / per], scheds_[id % per]};
    }

    int id_of(const std::vector<int>& tenths, Scheduler sched) const {
        auto it = comp_index_.find(tenths);
        if (it == comp_index_.end())
            throw std::invalid_argument("ActionSpace: tenths vector is not a valid composition");
        int sidx = -1;
        for (std::size_t i = 0; i < scheds_.size(); ++i)
            if (scheds_[i] == sched) sidx = static_cast<int>(i);
        if (sidx < 0) throw std::invalid_argument("ActionSpace: scheduler not in this space");
        return it->second * static_cast<int>(scheds_.size()) + sidx;
    }

private:
    void emit(std::vector<int>& t, int pos, int remaining) {
        if (pos == num_slices_ - 1) {
            t[pos] = remaining;
            comps_.push_back(t);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            t[pos] = v;
            emit(t, pos + 1, remaining - v);
        }
    }

    int num_slices_;
    std::vector<Scheduler> scheds_;
    std::vector<std::vector<int>> comps_;
    std::map<std::vector<int>, int> comp_index_;
};

// Guaranteed halves: p_sta_j = w_j * 0.5. Weights are normalized exactly so
// the final plan sums to one at machine precision.
inline std::vector<double> static_share(const std::vector<double>& weights) {
    if (weights.empty()) throw std::invalid_argument("static_share: empty weights");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0 || w > 1.0) throw std::invalid_argument("static_share: weight outside [0,1]");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("static_share: weights must sum to 1 within 1e-6");
    std::vector<double> p(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) p[j] = weights[j] / sum * 0.5;
    return p;
}

struct AllocationPlan {
    std::vector<double> p_sta;
    std::vector<double> p_opt;
    std::vector<double> p_final;
};

inline AllocationPlan compose_allocation(const std::vector<double>& p_sta,
                                         const std::vector<int>& tenths) {
    if (p_sta.size() != tenths.size())
        throw std::invalid_argument("compose_allocation: size mismatch");
    int sum = 0;
    for (int t : tenths) {
        if (t < 0 || t > 10) throw std::invalid_argument("compose_allocation: tenth outside [0,10]");
        sum += t;
    }
    if (sum != 10) throw std::invalid_argument("compose_allocation: tenths must sum to 10");
    AllocationPlan plan;
    plan.p_sta = p_sta;
    plan.p_opt.resize(tenths.size());
    plan.p_final.resize(tenths.size());
    for (std::size_t j = 0; j < tenths.size(); ++j) {
        plan.p_opt[j] = tenths[j] * 0.05;  // (t/10) * 0.5
        plan.p_final[j] = p_sta[j] + plan.p_opt[j];
    }
    return plan;
}

}  // namespace rslaq
