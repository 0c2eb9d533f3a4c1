#pragma once

// KPM aggregation: rolls raw frame statistics into per-user, per-slice and
// cell rows, and folds those into the 4x(J+1) observation matrix consumed by
// the learning agent.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rslaq/ransim.hpp"

namespace rslaq {

struct KpmRow {
    double btx = 0.0;         // bytes on the air this frame
    double bfs = 0.0;         // buffer fill, fraction of capacity
    double rsh = 0.0;         // granted share of the frame's downlink PRBs
    double tdp = 0.0;         // bytes dropped this frame
    double thr_bps = 0.0;     // delivered throughput
    double demand_bps = 0.0;  // delivered + dropped + backlog, as a rate
};

struct KpmRecord {
    std::uint64_t frame = 0;
    int num_slices = 0;
    std::vector<int> ue_slice;
    std::vector<KpmRow> ue;
    std::vector<KpmRow> slice;
    KpmRow cell;
};

// Peak cell rate: best spectral efficiency across the whole band, derated by
// the downlink duty cycle of the TDD pattern.
inline double max_cell_rate_bps(const SimConfig& cfg) {
    double duty = double(tdd_dl_prbs_per_frame(cfg)) /
                  (double(cfg.num_prbs) * cfg.slots_per_frame);
    return Simulator::spectral_efficiency(15) * cfg.num_prbs * cfg.prb_bandwidth_hz * duty;
}

inline double max_cell_bytes_per_frame(const SimConfig& cfg) {
    double frame_s = cfg.slots_per_frame * cfg.slot_duration_s;
    return max_cell_rate_bps(cfg) * frame_s / 8.0;
}

inline KpmRecord collect(const Simulator& sim, const FrameStats& fs) {
    KpmRecord rec;
    rec.frame = fs.frame;
    rec.num_slices = sim.num_slices();
    double frame_s = sim.config().slots_per_frame * sim.config().slot_duration_s;
    int n = int(fs.ue.size());
    rec.ue.resize(n);
    rec.ue_slice.resize(n);
    rec.slice.resize(rec.num_slices);
    std::vector<int> members(rec.num_slices, 0);
    for (int i = 0; i < n; ++i) {
        const UeFrameStats& u = fs.ue[i];
        KpmRow& row = rec.ue[i];
        row.btx = double(u.btx);
        row.tdp = double(u.tdp);
        row.bfs = double(u.queued_end) / double(sim.ue_capacity(i));
        row.rsh = fs.dl_prbs_available > 0 ? double(u.prbs) / fs.dl_prbs_available : 0.0;
        row.thr_bps = double(u.delivered) * 8.0 / frame_s;
        row.demand_bps = double(u.delivered + u.tdp + u.buffer_end) * 8.0 / frame_s;
        int s = sim.ue_slice(i);
        rec.ue_slice[i] = s;
        KpmRow& agg = rec.slice[s];
        agg.btx += row.btx;
        agg.tdp += row.tdp;
        agg.bfs += row.bfs;
        agg.rsh += row.rsh;
        agg.thr_bps += row.thr_bps;
        agg.demand_bps += row.demand_bps;
        ++members[s];
    }
    double bfs_sum = 0.0;
    for (int s = 0; s < rec.num_slices; ++s) {
        bfs_sum += rec.slice[s].bfs;
        if (members[s] > 0) rec.slice[s].bfs /= members[s];
        rec.cell.btx += rec.slice[s].btx;
        rec.cell.tdp += rec.slice[s].tdp;
        rec.cell.rsh += rec.slice[s].rsh;
        rec.cell.thr_bps += rec.slice[s].thr_bps;
        rec.cell.demand_bps += rec.slice[s].demand_bps;
    }
    rec.cell.bfs = n > 0 ? bfs_sum / n : 0.0;
    return rec;
}

struct NetworkState {
    int num_slices = 0;
    std::vector<double> m;  // row-major, rows (btx, bfs, rsh, tdp)

    int cols() const { return num_slices + 1; }
    double& at(int row, int col) { return m[row * cols() + col]; }
    double at(int row, int col) const { return m[row * cols() + col]; }
    bool operator==(const NetworkState& o) const {
        return num_slices == o.num_slices && m == o.m;
    }
};

inline NetworkState build_state(const KpmRecord& rec, double max_cell_bytes_frame) {
    NetworkState st;
    st.num_slices = rec.num_slices;
    st.m.assign(std::size_t(4) * (rec.num_slices + 1), 0.0);
    auto clip = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    auto fill = [&](int col, const KpmRow& row) {
        st.at(0, col) = clip(row.btx / max_cell_bytes_frame);
        st.at(1, col) = clip(row.bfs);
        st.at(2, col) = clip(row.rsh);
        st.at(3, col) = clip(row.tdp / max_cell_bytes_frame);
    };
    for (int s = 0; s < rec.num_slices; ++s) fill(s, rec.slice[s]);
    fill(rec.num_slices, rec.cell);
    return st;
}

inline std::string kpm_csv_header() {
    return "frame,scope,id,btx_bytes,bfs,rsh,tdp_bytes,thr_bps,demand_bps";
}

inline void append_kpm_csv(std::ostream& os, const KpmRecord& rec) {
    auto row = [&](const char* scope, int id, const KpmRow& r) {
        os << rec.frame << ',' << scope << ',' << id << ',' << r.btx << ',' << r.bfs
           << ',' << r.rsh << ',' << r.tdp << ',' << r.thr_bps << ',' << r.demand_bps
           << '\n';
    };
    for (std::size_t i = 0; i < rec.ue.size(); ++i) row("ue", int(i), rec.ue[i]);
    for (std::size_t s = 0; s < rec.slice.size(); ++s) row("slice", int(s), rec.slice[s]);
    row("cell", 0, rec.cell);
}

}  // namespace rslaq
