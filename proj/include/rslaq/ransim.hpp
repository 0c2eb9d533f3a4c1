#pragma once

// Downlink system-level simulator: TDD frame clock, per-slice probabilistic
// resource draws, RR/PF/BCQI user selection, single-retransmission HARQ and
// a bounded random walk on per-user CQI.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslaq/action_space.hpp"
#include "rslaq/rng.hpp"

namespace rslaq {

struct SimConfig {
    int num_prbs = 50;
    double prb_bandwidth_hz = 180e3;
    double slot_duration_s = 1e-3;
    int slots_per_frame = 10;
    std::string tdd_pattern = "DDSUU";       // tiled over the frame
    double special_slot_dl_fraction = 8.0 / 14.0;
    double carrier_hz = 2.59e9;
    int rb_allocation_limit = 50;            // max PRBs per user per slot
    double initial_bler = 0.1;
    double retx_bler = 0.01;
    int harq_processes_per_ue = 16;
    double cqi_walk_step_prob = 0.05;        // per slot; half down, half up
    double pf_ewma_tau_s = 0.1;
};

inline int tdd_slot_dl_budget(const SimConfig& cfg, int slot) {
    if (cfg.tdd_pattern.empty())
        throw std::invalid_argument("tdd pattern must not be empty");
    char c = cfg.tdd_pattern[slot % cfg.tdd_pattern.size()];
    if (c == 'D') return cfg.num_prbs;
    if (c == 'S') return int(std::llround(cfg.num_prbs * cfg.special_slot_dl_fraction));
    return 0;
}

inline int tdd_dl_prbs_per_frame(const SimConfig& cfg) {
    int total = 0;
    for (int s = 0; s < cfg.slots_per_frame; ++s) total += tdd_slot_dl_budget(cfg, s);
    return total;
}

enum class ArrivalModel { cbr, poisson };

struct UeConfig {
    int slice = 0;
    double offered_rate_bps = 0.0;
    ArrivalModel arrival = ArrivalModel::cbr;
    std::uint64_t buffer_capacity_bytes = 200000;
    int initial_cqi = 10;
};

struct UeState {
    int cqi = 10;
    std::uint64_t queued_bytes = 0;    // awaiting first transmission
    std::uint64_t inflight_bytes = 0;  // awaiting retransmission
    double pf_ewma_bps = 1.0;
    std::uint64_t buffer_bytes() const { return queued_bytes + inflight_bytes; }
};

struct UeFrameStats {
    std::uint64_t arrivals = 0;   // offered bytes, including any overflow
    std::uint64_t btx = 0;        // bytes on the air, retransmissions included
    std::uint64_t delivered = 0;  // bytes acknowledged
    std::uint64_t tdp = 0;        // bytes lost to overflow or failed twice
    std::uint64_t buffer_end = 0; // queued + in flight at frame end
    std::uint64_t queued_end = 0;
    int prbs = 0;
};

struct FrameStats {
    std::uint64_t frame = 0;
    int dl_prbs_available = 0;
    std::vector<UeFrameStats> ue;
    std::vector<int> slice_prbs;
};

class Simulator {
  public:
    Simulator(SimConfig cfg, std::vector<UeConfig> ues, std::uint64_t seed)
        : cfg_(std::move(cfg)),
          traffic_rng_(seed, 1),
          channel_rng_(seed, 2),
          sched_rng_(seed, 3),
          bler_rng_(seed, 4) {
        validate(cfg_, ues);
        num_slices_ = 0;
        for (const auto& u : ues) num_slices_ = std::max(num_slices_, u.slice + 1);
        ues_.reserve(ues.size());
        for (const auto& u : ues) {
            Ue ue;
            ue.cfg = u;
            ue.pub.cqi = u.initial_cqi;
            ues_.push_back(std::move(ue));
        }
        members_.resize(num_slices_);
        for (int i = 0; i < int(ues_.size()); ++i)
            members_[ues_[i].cfg.slice].push_back(i);
        rr_ptr_.assign(num_slices_, 0);
        slot_bytes_.assign(ues_.size(), 0);
        budgets_.resize(cfg_.slots_per_frame);
        for (int s = 0; s < cfg_.slots_per_frame; ++s)
            budgets_[s] = tdd_slot_dl_budget(cfg_, s);
        dl_prbs_per_frame_ = 0;
        for (int b : budgets_) dl_prbs_per_frame_ += b;
        if (dl_prbs_per_frame_ == 0)
            throw std::invalid_argument("tdd pattern has no downlink capacity");
    }

    int num_slices() const { return num_slices_; }
    int num_ues() const { return int(ues_.size()); }
    const SimConfig& config() const { return cfg_; }
    const UeState& ue(int id) const { return ues_.at(id).pub; }
    int ue_slice(int id) const { return ues_.at(id).cfg.slice; }
    std::uint64_t ue_capacity(int id) const { return ues_.at(id).cfg.buffer_capacity_bytes; }
    std::uint64_t frame_index() const { return frame_index_; }
    int dl_prb_budget(int slot_in_frame) const { return budgets_.at(slot_in_frame); }
    int dl_prbs_per_frame() const { return dl_prbs_per_frame_; }

    static double spectral_efficiency(int cqi) {
        static const double table[15] = {0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
                                         1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
                                         3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
        if (cqi < 1 || cqi > 15) throw std::out_of_range("cqi out of range");
        return table[cqi - 1];
    }

    // Transport block capacity of n PRBs for one slot at the given CQI.
    std::uint64_t tb_bytes(int cqi, int n_prbs) const {
        if (n_prbs <= 0) return 0;
        double bits = spectral_efficiency(cqi) * n_prbs * cfg_.prb_bandwidth_hz *
                      cfg_.slot_duration_s;
        return std::uint64_t(bits / 8.0);
    }

    // Injects bytes directly into a user's queue; returns what fit.
    std::uint64_t offer_bytes(int id, std::uint64_t bytes) {
        Ue& u = ues_.at(id);
        std::uint64_t free = u.cfg.buffer_capacity_bytes - u.pub.buffer_bytes();
        std::uint64_t accepted = std::min(bytes, free);
        u.pub.queued_bytes += accepted;
        return accepted;
    }

    // Single out-of-band attempt over n PRBs; returns delivered bytes.  A
    // failed attempt parks the block for the regular retransmission stage.
    std::uint64_t transmit(int id, int n_prbs) {
        Ue& u = ues_.at(id);
        std::uint64_t tb = std::min(tb_bytes(u.pub.cqi, n_prbs), u.pub.queued_bytes);
        if (tb == 0) return 0;
        u.pub.queued_bytes -= tb;
        if (!bler_rng_.bernoulli(cfg_.initial_bler)) return tb;
        u.procs.push_back({tb, n_prbs});
        u.pub.inflight_bytes += tb;
        return 0;
    }

    FrameStats step_frame(const std::vector<double>& p_final, Scheduler sched) {
        if (int(p_final.size()) != num_slices_)
            throw std::invalid_argument("allocation plan arity mismatch");
        double sum = 0.0;
        for (double p : p_final) {
            if (p < -1e-9 || p > 1.0 + 1e-9)
                throw std::invalid_argument("allocation share out of range");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("allocation plan must sum to 1");

        for (auto& u : ues_) u.frame = UeFrameStats{};
        slice_prbs_.assign(num_slices_, 0);

        for (int slot = 0; slot < cfg_.slots_per_frame; ++slot) {
            arrive(slot);
            walk_channel();
            if (budgets_[slot] > 0) schedule_slot(budgets_[slot], p_final, sched);
            update_pf();
        }

        FrameStats fs;
        fs.frame = frame_index_++;
        fs.dl_prbs_available = dl_prbs_per_frame_;
        fs.slice_prbs = slice_prbs_;
        fs.ue.reserve(ues_.size());
        for (auto& u : ues_) {
            u.frame.buffer_end = u.pub.buffer_bytes();
            u.frame.queued_end = u.pub.queued_bytes;
            fs.ue.push_back(u.frame);
        }
        return fs;
    }

    // Clears queues, HARQ state and channel quality; RNG streams keep running.
    void reset() {
        for (auto& u : ues_) {
            u.pub = UeState{};
            u.pub.cqi = u.cfg.initial_cqi;
            u.procs.clear();
            u.cbr_carry = 0.0;
            u.frame = UeFrameStats{};
        }
        std::fill(rr_ptr_.begin(), rr_ptr_.end(), 0);
    }

  private:
    struct Harq {
        std::uint64_t tb = 0;
        int prbs = 0;
    };

    struct Ue {
        UeConfig cfg;
        UeState pub;
        std::deque<Harq> procs;
        double cbr_carry = 0.0;
        UeFrameStats frame;
    };

    static void validate(const SimConfig& c, const std::vector<UeConfig>& ues) {
        if (c.num_prbs < 1 || c.prb_bandwidth_hz <= 0 || c.slot_duration_s <= 0 ||
            c.slots_per_frame < 1 || c.rb_allocation_limit < 1 ||
            c.harq_processes_per_ue < 1 || c.pf_ewma_tau_s <= 0)
            throw std::invalid_argument("bad simulator dimensions");
        if (c.initial_bler < 0 || c.initial_bler > 1 || c.retx_bler < 0 || c.retx_bler > 1)
            throw std::invalid_argument("bler must lie in [0, 1]");
        if (c.cqi_walk_step_prob < 0 || c.cqi_walk_step_prob > 1)
            throw std::invalid_argument("cqi walk probability must lie in [0, 1]");
        if (c.special_slot_dl_fraction < 0 || c.special_slot_dl_fraction > 1)
            throw std::invalid_argument("special slot fraction must lie in [0, 1]");
        if (c.tdd_pattern.empty())
            throw std::invalid_argument("tdd pattern must not be empty");
        for (char ch : c.tdd_pattern)
            if (ch != 'D' && ch != 'S' && ch != 'U')
                throw std::invalid_argument("tdd pattern may only contain D, S, U");
        if (ues.empty()) throw std::invalid_argument("at least one user required");
        for (const auto& u : ues) {
            if (u.slice < 0) throw std::invalid_argument("slice index must be >= 0");
            if (u.offered_rate_bps < 0) throw std::invalid_argument("negative rate");
            if (u.buffer_capacity_bytes < 1) throw std::invalid_argument("empty buffer");
            if (u.initial_cqi < 1 || u.initial_cqi > 15)
                throw std::invalid_argument("initial cqi out of range");
        }
    }

    void arrive(int /*slot*/) {
        for (auto& u : ues_) {
            std::uint64_t bytes = 0;
            double mean = u.cfg.offered_rate_bps / 8.0 * cfg_.slot_duration_s;
            if (u.cfg.arrival == ArrivalModel::cbr) {
                u.cbr_carry += mean;
                bytes = std::uint64_t(u.cbr_carry);
                u.cbr_carry -= double(bytes);
            } else if (mean > 0) {
                bytes = traffic_rng_.poisson(mean);
            }
            if (bytes == 0) continue;
            u.frame.arrivals += bytes;
            std::uint64_t free = u.cfg.buffer_capacity_bytes - u.pub.buffer_bytes();
            std::uint64_t accepted = std::min(bytes, free);
            u.pub.queued_bytes += accepted;
            u.frame.tdp += bytes - accepted;
        }
    }

    void walk_channel() {
        double p = cfg_.cqi_walk_step_prob;
        if (p <= 0) return;
        for (auto& u : ues_) {
            double r = channel_rng_.uniform();
            if (r < p / 2)
                u.pub.cqi = std::max(1, u.pub.cqi - 1);
            else if (r < p)
                u.pub.cqi = std::min(15, u.pub.cqi + 1);
        }
    }

    void schedule_slot(int budget, const std::vector<double>& p_final, Scheduler sched) {
        int n = int(ues_.size());
        std::vector<bool> retx_served(n, false);
        std::vector<int> granted(n, 0);

        // Retransmissions first: at most one block per user per slot, oldest
        // block first, and only when its original grant still fits.
        for (int i = 0; i < n && budget > 0; ++i) {
            Ue& u = ues_[i];
            if (u.procs.empty()) continue;
            Harq h = u.procs.front();
            if (h.prbs > budget) continue;
            u.procs.pop_front();
            budget -= h.prbs;
            u.frame.prbs += h.prbs;
            slice_prbs_[u.cfg.slice] += h.prbs;
            retx_served[i] = true;
            u.pub.inflight_bytes -= h.tb;
            u.frame.btx += h.tb;
            slot_bytes_[i] += h.tb;
            if (bler_rng_.bernoulli(cfg_.retx_bler))
                u.frame.tdp += h.tb;
            else
                u.frame.delivered += h.tb;
        }

        auto eligible = [&](int i) {
            const Ue& u = ues_[i];
            if (retx_served[i]) return false;
            if (granted[i] >= cfg_.rb_allocation_limit) return false;
            if (granted[i] == 0 && int(u.procs.size()) >= cfg_.harq_processes_per_ue)
                return false;
            return u.pub.queued_bytes > tb_bytes(u.pub.cqi, granted[i]);
        };

        // One categorical draw per remaining PRB, restricted to slices that
        // can actually take the grant.
        while (budget > 0) {
            double total = 0.0;
            for (int s = 0; s < num_slices_; ++s) {
                if (p_final[s] <= 0) continue;
                for (int i : members_[s])
                    if (eligible(i)) {
                        total += p_final[s];
                        break;
                    }
            }
            if (total <= 0) break;
            double r = sched_rng_.uniform() * total;
            int slice = -1;
            for (int s = 0; s < num_slices_; ++s) {
                if (p_final[s] <= 0) continue;
                bool any = false;
                for (int i : members_[s])
                    if (eligible(i)) {
                        any = true;
                        break;
                    }
                if (!any) continue;
                r -= p_final[s];
                slice = s;
                if (r < 0) break;
            }
            int picked = pick_ue(slice, sched, eligible);
            ++granted[picked];
            --budget;
            ues_[picked].frame.prbs += 1;
            slice_prbs_[slice] += 1;
        }

        // Build and resolve one transport block per newly granted user.
        for (int i = 0; i < n; ++i) {
            if (granted[i] == 0) continue;
            Ue& u = ues_[i];
            std::uint64_t tb = std::min(tb_bytes(u.pub.cqi, granted[i]), u.pub.queued_bytes);
            if (tb == 0) continue;
            u.pub.queued_bytes -= tb;
            u.frame.btx += tb;
            slot_bytes_[i] += tb;
            if (bler_rng_.bernoulli(cfg_.initial_bler)) {
                u.procs.push_back({tb, granted[i]});
                u.pub.inflight_bytes += tb;
            } else {
                u.frame.delivered += tb;
            }
        }
    }

    template <typename Pred>
    int pick_ue(int slice, Scheduler sched, const Pred& eligible) {
        const std::vector<int>& m = members_[slice];
        if (sched == Scheduler::RR) {
            int sz = int(m.size());
            for (int k = 0; k < sz; ++k) {
                int idx = (rr_ptr_[slice] + k) % sz;
                if (eligible(m[idx])) {
                    rr_ptr_[slice] = (idx + 1) % sz;
                    return m[idx];
                }
            }
        } else if (sched == Scheduler::BCQI) {
            int best = -1;
            for (int i : m)
                if (eligible(i) && (best < 0 || ues_[i].pub.cqi > ues_[best].pub.cqi))
                    best = i;
            if (best >= 0) return best;
        } else {
            int best = -1;
            double best_metric = -1.0;
            for (int i : m) {
                if (!eligible(i)) continue;
                double metric = spectral_efficiency(ues_[i].pub.cqi) / ues_[i].pub.pf_ewma_bps;
                if (metric > best_metric) {
                    best_metric = metric;
                    best = i;
                }
            }
            if (best >= 0) return best;
        }
        throw std::logic_error("no eligible user in the drawn slice");
    }

    void update_pf() {
        double alpha = cfg_.slot_duration_s / cfg_.pf_ewma_tau_s;
        for (int i = 0; i < int(ues_.size()); ++i) {
            double rate = slot_bytes_[i] * 8.0 / cfg_.slot_duration_s;
            ues_[i].pub.pf_ewma_bps = (1.0 - alpha) * ues_[i].pub.pf_ewma_bps + alpha * rate;
            slot_bytes_[i] = 0;
        }
    }

    SimConfig cfg_;
    int num_slices_ = 0;
    std::vector<Ue> ues_;
    std::vector<std::vector<int>> members_;
    std::vector<int> rr_ptr_;
    std::vector<int> budgets_;
    int dl_prbs_per_frame_ = 0;
    std::vector<int> slice_prbs_;
    std::vector<std::uint64_t> slot_bytes_;
    std::uint64_t frame_index_ = 0;
    Rng traffic_rng_, channel_rng_, sched_rng_, bler_rng_;
};

}  // namespace rslaq
