#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rslaq {

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// KPI families the simulator can actually measure. Latency and packet-loss
// strings are recognized but skipped with a warning, since the frame model
// has no delay or loss-rate observable.
struct UnsupportedKpiError : PolicyError {
    using PolicyError::PolicyError;
};

enum class Metric { throughput, buffer_occupancy, dropped_bytes };
enum class Scope { per_ue, per_slice };
enum class Comparator { below_is_violation, above_is_violation };
enum class OptimizationKpi { maximize_mean_throughput, minimize_max_buffer };

struct KpiPredicate {
    std::string key;        // e.g. "k_out_1"
    Metric metric = Metric::throughput;
    Scope scope = Scope::per_ue;
    Comparator cmp = Comparator::below_is_violation;
    double threshold = 0.0;  // bit/s, occupancy fraction, or bytes per frame
};

struct SlaSpec {
    std::vector<KpiPredicate> outage;
    std::vector<KpiPredicate> soft;
    double reliability = 0.99;  // in (0,1)
};

struct SlicePolicy {
    std::string name;
    double weight = 0.0;
    std::optional<int> priority;
    std::optional<SlaSpec> sla;
    OptimizationKpi optimization_kpi = OptimizationKpi::maximize_mean_throughput;
};

struct A1Policy {
    std::vector<SlicePolicy> slices;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Fixed-point rendering with trailing zeros trimmed; stable across
// parse/serialize cycles because the printed precision dwarfs double error.
inline std::string trim_number(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
    }
    return s;
}

}  // namespace detail

// Grammar: "<metric> per <UE|slice> <cmp> <value><unit>".
inline KpiPredicate parse_kpi_predicate(const std::string& key, const std::string& text) {
    auto tok = detail::split_ws(text);
    if (tok.size() < 5 || tok[1] != "per")
        throw PolicyError("KPI '" + key + "': cannot parse '" + text + "'");

    KpiPredicate p;
    p.key = key;

    const std::string& metric = tok[0];
    if (metric == "latency" || metric == "packet_loss_rate")
        throw UnsupportedKpiError("KPI '" + key + "': unsupported metric '" + metric + "'");
    if (metric == "bandwidth_mbps") p.metric = Metric::throughput;
    else if (metric == "buffer_occupancy") p.metric = Metric::buffer_occupancy;
    else if (metric == "dropped_bytes") p.metric = Metric::dropped_bytes;
    else throw PolicyError("KPI '" + key + "': unknown metric '" + metric + "'");

    if (tok[2] == "UE") p.scope = Scope::per_ue;
    else if (tok[2] == "slice") p.scope = Scope::per_slice;
    else throw PolicyError("KPI '" + key + "': unknown scope '" + tok[2] + "'");

    if (tok[3] == "<") p.cmp = Comparator::below_is_violation;
    else if (tok[3] == ">") p.cmp = Comparator::above_is_violation;
    else throw PolicyError("KPI '" + key + "': unknown comparator '" + tok[3] + "'");

    std::string value = tok[4];
    for (std::size_t i = 5; i < tok.size(); ++i) value += tok[i];  // "0.1 %" style splits
    std::size_t pos = 0;
    double num = 0.0;
    try {
        num = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw PolicyError("KPI '" + key + "': bad value '" + value + "'");
    }
    std::string unit = value.substr(pos);
    std::transform(unit.begin(), unit.end(), unit.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    switch (p.metric) {
        case Metric::throughput:
            if (unit == "gbps") p.threshold = num * 1e9;
            else if (unit == "mbps" || unit.empty()) p.threshold = num * 1e6;
            else if (unit == "kbps") p.threshold = num * 1e3;
            else if (unit == "bps") p.threshold = num;
            else throw PolicyError("KPI '" + key + "': bad throughput unit '" + unit + "'");
            break;
        case Metric::buffer_occupancy:
            if (unit == "%") p.threshold = num / 100.0;
            else if (unit.empty()) p.threshold = num;
            else throw PolicyError("KPI '" + key + "': bad occupancy unit '" + unit + "'");
            if (p.threshold > 1.0)
                throw PolicyError("KPI '" + key + "': occupancy threshold above 100%");
            break;
        case Metric::dropped_bytes:
            if (unit == "bytes" || unit.empty()) p.threshold = num;
            else throw PolicyError("KPI '" + key + "': bad byte unit '" + unit + "'");
            break;
    }
    if (!(p.threshold > 0.0))
        throw PolicyError("KPI '" + key + "': threshold must be positive");
    return p;
}

inline std::string serialize_kpi_predicate(const KpiPredicate& p) {
    std::string metric, value;
    switch (p.metric) {
        case Metric::throughput:
            metric = "bandwidth_mbps";
            value = detail::trim_number(p.threshold / 1e6, 9) + "mbps";
            break;
        case Metric::buffer_occupancy:
            metric = "buffer_occupancy";
            value = detail::trim_number(p.threshold * 100.0, 9) + "%";
            break;
        case Metric::dropped_bytes:
            metric = "dropped_bytes";
            value = detail::trim_number(p.threshold, 3);
            break;
    }
    std::string scope = (p.scope == Scope::per_ue) ? "UE" : "slice";
    std::string cmp = (p.cmp == Comparator::below_is_violation) ? "<" : ">";
    return metric + " per " + scope + " " + cmp + " " + value;
}

// w_j = (2J + 1 - prio_j) / sum_k (2J + 1 - prio_k)
inline std::vector<double> weights_from_priorities(const std::vector<int>& priorities) {
    if (priorities.empty()) throw PolicyError("weights_from_priorities: empty priority list");
    const int n = static_cast<int>(priorities.size());
    const int base = 2 * n + 1;
    double sum = 0.0;
    std::vector<double> w(priorities.size());
    for (std::size_t j = 0; j < priorities.size(); ++j) {
        if (priorities[j] < 1)
            throw PolicyError("weights_from_priorities: priorities start at 1");
        double v = static_cast<double>(base - priorities[j]);
        if (!(v > 0.0))
            throw PolicyError("weights_from_priorities: priority too large for slice count");
        w[j] = v;
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

namespace detail {

inline SlaSpec parse_sla(const std::string& slice, const nlohmann::json& node,
                         std::vector<std::string>& warnings) {
    if (!node.is_object())
        throw PolicyError("slice '" + slice + "': target_kpis must be an object");
    SlaSpec sla;
    bool have_reliability = false;
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string& key = it.key();
        if (key == "outage_kpis") {
            if (!it.value().is_object())
                throw PolicyError("slice '" + slice + "': outage_kpis must be an object");
            for (auto ot = it.value().begin(); ot != it.value().end(); ++ot) {
                if (ot.key() == "reliability_percent") {
                    if (!ot.value().is_string())
                        throw PolicyError("slice '" + slice +
                                          "': reliability_percent must be a string");
                    std::string text = ot.value().get<std::string>();
                    if (text.empty() || text.back() != '%')
                        throw PolicyError("slice '" + slice +
                                          "': reliability_percent requires a trailing '%'");
                    double pct = 0.0;
                    try {
                        std::size_t pos = 0;
                        pct = std::stod(text, &pos);
                        while (pos < text.size() &&
                               std::isspace(static_cast<unsigned char>(text[pos])))
                            ++pos;
                        if (text.substr(pos) != "%") throw PolicyError("trailing junk");
                    } catch (const std::exception&) {
                        throw PolicyError("slice '" + slice + "': bad reliability '" + text + "'");
                    }
                    sla.reliability = pct / 100.0;
                    if (!(sla.reliability > 0.0 && sla.reliability < 1.0))
                        throw PolicyError("slice '" + slice + "': reliability must lie in (0,1)");
                    have_reliability = true;
                } else if (ot.key().rfind("k_out_", 0) == 0) {
                    try {
                        sla.outage.push_back(
                            parse_kpi_predicate(ot.key(), ot.value().get<std::string>()));
                    } catch (const UnsupportedKpiError& e) {
                        warnings.push_back(slice + ": skipped " + ot.key() + " (" + e.what() + ")");
                    }
                } else {
                    throw PolicyError("slice '" + slice + "': unexpected outage_kpis key '" +
                                      ot.key() + "'");
                }
            }
        } else if (key == "soft_kpis") {
            if (!it.value().is_object())
                throw PolicyError("slice '" + slice + "': soft_kpis must be an object");
            for (auto st = it.value().begin(); st != it.value().end(); ++st) {
                if (st.key().rfind("k_soft_", 0) != 0)
                    throw PolicyError("slice '" + slice + "': unexpected soft KPI key '" +
                                      st.key() + "'");
                try {
                    sla.soft.push_back(parse_kpi_predicate(st.key(), st.value().get<std::string>()));
                } catch (const UnsupportedKpiError& e) {
                    warnings.push_back(slice + ": skipped " + st.key() + " (" + e.what() + ")");
                }
            }
        } else {
            throw PolicyError("slice '" + slice + "': unexpected target_kpis key '" + key + "'");
        }
    }
    if (!have_reliability)
        throw PolicyError("slice '" + slice +
                          "': outage_kpis requires reliability_percent");
    return sla;
}

}  // namespace detail

inline A1Policy parse_a1_policy(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw PolicyError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("network_slices") || !doc["network_slices"].is_array())
        throw PolicyError("document requires a top-level 'network_slices' array");
    const auto& arr = doc["network_slices"];
    if (arr.empty()) throw PolicyError("'network_slices' must not be empty");

    A1Policy policy;
    bool any_weight = false, all_weights = true, all_priorities = true;
    for (const auto& node : arr) {
        if (!node.is_object()) throw PolicyError("each slice entry must be an object");
        SlicePolicy sp;
        for (auto it = node.begin(); it != node.end(); ++it) {
            const std::string& key = it.key();
            if (key == "slice_name") {
                if (!it.value().is_string() || it.value().get<std::string>().empty())
                    throw PolicyError("slice_name must be a non-empty string");
                sp.name = it.value().get<std::string>();
            } else if (key == "weight") {
                if (!it.value().is_number()) throw PolicyError("weight must be a number");
                sp.weight = it.value().get<double>();
                if (sp.weight < 0.0 || sp.weight > 1.0)
                    throw PolicyError("weight must lie in [0,1]");
                any_weight = true;
            } else if (key == "priority") {
                if (!it.value().is_number_integer())
                    throw PolicyError("priority must be an integer");
                sp.priority = it.value().get<int>();
            } else if (key == "target_kpis") {
                sp.sla.emplace();  // filled below once the name is known
            } else if (key == "optimization_kpi") {
                std::string v = it.value().get<std::string>();
                if (v == "maximize_mean_throughput")
                    sp.optimization_kpi = OptimizationKpi::maximize_mean_throughput;
                else if (v == "minimize_max_buffer")
                    sp.optimization_kpi = OptimizationKpi::minimize_max_buffer;
                else
                    throw PolicyError("unknown optimization_kpi '" + v + "'");
            } else {
                throw PolicyError("unexpected slice key '" + key + "'");
            }
        }
        if (sp.name.empty()) throw PolicyError("every slice requires slice_name");
        if (node.contains("target_kpis"))
            sp.sla = detail::parse_sla(sp.name, node["target_kpis"], policy.warnings);
        if (!node.contains("weight")) all_weights = false;
        if (!node.contains("priority")) all_priorities = false;
        for (const auto& prev : policy.slices)
            if (prev.name == sp.name) throw PolicyError("duplicate slice_name '" + sp.name + "'");
        policy.slices.push_back(std::move(sp));
    }

    if (all_weights) {
        double sum = 0.0;
        for (const auto& s : policy.slices) sum += s.weight;
        if (std::abs(sum - 1.0) > 1e-6)
            throw PolicyError("slice weights must sum to 1 within 1e-6");
    } else if (any_weight) {
        throw PolicyError("either give every slice a weight or none");
    } else if (all_priorities) {
        std::vector<int> prios;
        for (const auto& s : policy.slices) prios.push_back(*s.priority);
        auto w = weights_from_priorities(prios);
        for (std::size_t j = 0; j < w.size(); ++j) policy.slices[j].weight = w[j];
    } else {
        throw PolicyError("slices need explicit weights or a full set of priorities");
    }
    return policy;
}

inline std::string serialize_a1_policy(const A1Policy& policy) {
    nlohmann::json doc;
    auto& arr = doc["network_slices"];
    arr = nlohmann::json::array();
    for (const auto& s : policy.slices) {
        nlohmann::json node;
        node["slice_name"] = s.name;
        node["weight"] = std::stod(detail::trim_number(s.weight, 12));
        if (s.priority) node["priority"] = *s.priority;
        if (s.optimization_kpi == OptimizationKpi::minimize_max_buffer)
            node["optimization_kpi"] = "minimize_max_buffer";
        if (s.sla) {
            nlohmann::json outage;
            for (const auto& p : s.sla->outage)
                outage[p.key] = serialize_kpi_predicate(p);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s%%",
                          detail::trim_number(s.sla->reliability * 100.0, 9).c_str());
            outage["reliability_percent"] = buf;
            nlohmann::json kpis;
            kpis["outage_kpis"] = outage;
            if (!s.sla->soft.empty()) {
                nlohmann::json soft;
                for (const auto& p : s.sla->soft) soft[p.key] = serialize_kpi_predicate(p);
                kpis["soft_kpis"] = soft;
            }
            node["target_kpis"] = kpis;
        }
        arr.push_back(node);
    }
    return doc.dump(2);
}

// Metric values for one predicate scope; `demand_bps` (optional, same arity
// as `values`) carries offered load so throughput floors only bind when the
// traffic could actually have reached them.
struct MetricSnapshot {
    Scope scope = Scope::per_ue;
    std::vector<double> values;
    std::vector<double> demand_bps;
};

inline std::vector<std::size_t> evaluate_predicate(const KpiPredicate& p,
                                                   const MetricSnapshot& snap) {
    if (p.scope != snap.scope)
        throw std::invalid_argument("evaluate_predicate: snapshot scope mismatch");
    if (!snap.demand_bps.empty() && snap.demand_bps.size() != snap.values.size())
        throw std::invalid_argument("evaluate_predicate: demand arity mismatch");
    std::vector<std::size_t> violators;
    for (std::size_t i = 0; i < snap.values.size(); ++i) {
        bool violated = false;
        if (p.cmp == Comparator::below_is_violation) {
            violated = snap.values[i] < p.threshold;
            if (violated && p.metric == Metric::throughput && !snap.demand_bps.empty())
                violated = snap.demand_bps[i] > p.threshold;
        } else {
            violated = snap.values[i] > p.threshold;
        }
        if (violated) violators.push_back(i);
    }
    return violators;
}

}  // namespace rslaq
