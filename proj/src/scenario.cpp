// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "priomap/error.hpp"

namespace priomap {

namespace {

using nlohmann::json;

std::string_view mode_name(ThresholdMode m) { return m == ThresholdMode::absolute ? "abs" : "frac"; }

json priorities_to_json(const PrioritySetting& p) {
    switch (p.mode) {
        case PriorityMode::dynamic: return {{"mode", "dynamic"}};
        case PriorityMode::uniform: return {{"mode", "uniform"}};
        case PriorityMode::static_high: return {{"mode", "static"}, {"slot", p.slot}, {"high", p.high}};
        case PriorityMode::static_weights: return {{"mode", "static"}, {"weights", p.weights}};
    }
    return {};
}

// Throws std::invalid_argument with a message; callers attach the context.
PrioritySetting priorities_from_json(const json& j) {
    PrioritySetting p;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "dynamic") {
        p.mode = PriorityMode::dynamic;
    } else if (mode == "uniform") {
        p.mode = PriorityMode::uniform;
    } else if (mode == "static" && j.contains("weights")) {
        p.mode = PriorityMode::static_weights;
        const auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() > kMaxSlots) throw std::invalid_argument("more weights than DNN slots");
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!(w[i] >= 0.0)) throw std::invalid_argument("priority weights must be >= 0");
            p.weights[i] = w[i];
        }
    } else if (mode == "static") {
        p.mode = PriorityMode::static_high;
        p.slot = j.at("slot").get<int>();
        p.high = j.at("high").get<double>();
        if (p.slot < 0 || p.slot >= kMaxSlots) throw std::invalid_argument("priority slot out of range");
        if (!(p.high > 0.0 && p.high <= 1.0)) throw std::invalid_argument("high priority must be in (0, 1]");
    } else {
        throw std::invalid_argument("unknown priority mode '" + mode + "'");
    }
    return p;
}

ThresholdMode threshold_mode_from(const std::string& s) {
    if (s == "abs") return ThresholdMode::absolute;
    if (s == "frac") return ThresholdMode::fraction;
    throw std::invalid_argument("threshold mode must be abs or frac");
}

ScenarioEvent event_from_json(const json& j) {
    ScenarioEvent e;
    e.time = j.at("time").get<double>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "arrive") {
        e.kind = ScenarioEvent::Kind::arrive;
        e.dnn = j.at("dnn").get<std::string>();
        e.slot = j.at("slot").get<int>();
    } else if (kind == "depart") {
        e.kind = ScenarioEvent::Kind::depart;
        e.slot = j.at("slot").get<int>();
    } else if (kind == "set_priorities") {
        e.kind = ScenarioEvent::Kind::set_priorities;
        e.priorities = priorities_from_json(j);
    } else if (kind == "set_threshold") {
        e.kind = ScenarioEvent::Kind::set_threshold;
        e.threshold_mode = threshold_mode_from(j.at("mode").get<std::string>());
        e.threshold = j.at("value").get<double>();
        if (!(e.threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
    } else {
        throw std::invalid_argument("unknown event kind '" + kind + "'");
    }
    if ((e.kind == ScenarioEvent::Kind::arrive || e.kind == ScenarioEvent::Kind::depart) &&
        (e.slot < 0 || e.slot >= kMaxSlots)) {
        throw std::invalid_argument("slot " + std::to_string(e.slot) + " out of range");
    }
    return e;
}

json event_to_json(const ScenarioEvent& e) {
    json j{{"time", e.time}};
    switch (e.kind) {
        case ScenarioEvent::Kind::arrive:
            j["kind"] = "arrive";
            j["dnn"] = e.dnn;
            j["slot"] = e.slot;
            break;
        case ScenarioEvent::Kind::depart:
            j["kind"] = "depart";
            j["slot"] = e.slot;
            break;
        case ScenarioEvent::Kind::set_priorities:
            j.update(priorities_to_json(e.priorities));
            j["kind"] = "set_priorities";
            break;
        case ScenarioEvent::Kind::set_threshold:
            j["kind"] = "set_threshold";
            j["mode"] = mode_name(e.threshold_mode);
            j["value"] = e.threshold;
            break;
    }
    return j;
}

PriorityVector interval_priorities(const PrioritySetting& setting, const Workload& w, const SlotMask& active,
                                   std::size_t event_index) {
    const int n = static_cast<int>(w.size());
    switch (setting.mode) {
        case PriorityMode::dynamic: return dynamic_priorities(w);
        case PriorityMode::uniform: return PriorityVector(w.size(), 1.0 / n);
        case PriorityMode::static_high: {
            if (!active[static_cast<std::size_t>(setting.slot)]) {
                throw ScriptError(event_index, "high-priority slot " + std::to_string(setting.slot) + " is empty");
            }
            if (n == 1) return {1.0};
            const int k = static_cast<int>(std::count(active.begin(), active.begin() + setting.slot, true));
            if (setting.high < 1.0 / n || setting.high >= 1.0) {
                throw ScriptError(event_index, "high priority " + std::to_string(setting.high) +
                                                   " outside [1/n, 1) for " + std::to_string(n) + " DNNs");
            }
            return static_priorities(k, setting.high, n);
        }
        case PriorityMode::static_weights: {
            std::vector<double> weights;
            for (std::size_t i = 0; i < kMaxSlots; ++i) {
                if (active[i]) weights.push_back(setting.weights[i]);
            }
            try {
                return normalize_priorities(weights);
            } catch (const Error& e) {
                throw ScriptError(event_index, std::string("priority weights: ") + e.what());
            }
        }
    }
    return {};
}

// One digit per unit; ids of 10 or more switch to ';'-separated numbers.
std::string assignment_digits(const std::vector<int>& a) {
    const bool wide = std::any_of(a.begin(), a.end(), [](int c) { return c >= 10; });
    std::string s;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (wide && i > 0) s += ';';
        s += std::to_string(a[i]);
    }
    return s;
}

template <class T>
json slot_array(const std::array<T, kMaxSlots>& a) {
    json j = json::array();
    for (const auto& v : a) j.push_back(v);
    return j;
}

template <class T>
std::array<T, kMaxSlots> slot_array_from(const json& j) {
    const auto v = j.get<std::vector<T>>();
    if (v.size() != kMaxSlots) throw ConfigError("trace slot array must have " + std::to_string(kMaxSlots) + " entries");
    std::array<T, kMaxSlots> a{};
    std::copy(v.begin(), v.end(), a.begin());
    return a;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("failed writing report '" + path.string() + "'");
}

}  // namespace

ScenarioScript parse_scenario(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    ScenarioScript s;
    try {
        s.name = j.value("name", "scenario");
        if (j.contains("priorities")) s.initial_priorities = priorities_from_json(j.at("priorities"));
        if (j.contains("end")) s.end = j.at("end").get<double>();
        if (!j.at("events").is_array()) throw ConfigError("scenario 'events' must be an array");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scenario priorities: ") + e.what());
    }
    const auto& events = j.at("events");
    for (std::size_t i = 0; i < events.size(); ++i) {
        try {
            s.events.push_back(event_from_json(events[i]));
        } catch (const json::exception& e) {
            throw ScriptError(i, std::string("malformed event: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw ScriptError(i, e.what());
        }
        if (i > 0 && s.events[i].time < s.events[i - 1].time) throw ScriptError(i, "event times must be non-decreasing");
    }
    if (s.end && !s.events.empty() && *s.end < s.events.back().time) {
        throw ConfigError("scenario end precedes its last event");
    }
    return s;
}

ScenarioScript load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

json to_json(const ScenarioScript& script) {
    json j{{"name", script.name}, {"priorities", priorities_to_json(script.initial_priorities)}};
    if (script.end) j["end"] = *script.end;
    json events = json::array();
    for (const auto& e : script.events) events.push_back(event_to_json(e));
    j["events"] = std::move(events);
    return j;
}

ScenarioScript with_uniform_priorities(const ScenarioScript& script) {
    ScenarioScript s = script;
    s.initial_priorities = PrioritySetting{PriorityMode::uniform};
    for (auto& e : s.events) {
        if (e.kind == ScenarioEvent::Kind::set_priorities) e.priorities = PrioritySetting{PriorityMode::uniform};
    }
    return s;
}

int IntervalRecord::active_count() const {
    return static_cast<int>(std::count(active.begin(), active.end(), true));
}

Workload IntervalRecord::workload(std::span<const DnnDescriptor> zoo) const {
    Workload w;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (active[i]) w.push_back(find_dnn(zoo, dnn[i]));
    }
    return w;
}

Mapping IntervalRecord::mapping() const {
    Mapping m;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (active[i]) m.assignments.push_back(assignment[i]);
    }
    return m;
}

bool IntervalRecord::same_outcome(const IntervalRecord& other) const {
    IntervalRecord a = *this, b = other;
    a.search_seconds = b.search_seconds = 0.0;
    return a == b;
}

bool ScenarioTrace::same_outcome(const ScenarioTrace& other) const {
    if (name != other.name || intervals.size() != other.intervals.size()) return false;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (!intervals[i].same_outcome(other.intervals[i])) return false;
    }
    return true;
}

ScenarioTrace run_scenario(const ScenarioScript& script, std::span<const DnnDescriptor> zoo,
                           const ThroughputEstimator& estimator, const ManagerConfig& config) {
    config.search.validate();
    const Platform& platform = estimator.platform();
    ScenarioTrace trace;
    trace.name = script.name;

    std::array<std::string, kMaxSlots> resident;
    PrioritySetting priorities = script.initial_priorities;
    std::optional<std::size_t> priority_event;
    SearchConfig search = config.search;

    const auto& events = script.events;
    std::size_t i = 0;
    while (i < events.size()) {
        const std::size_t group_start = i;
        const double t = events[i].time;
        for (; i < events.size() && events[i].time == t; ++i) {
            const auto& e = events[i];
            const auto slot = static_cast<std::size_t>(e.slot);
            switch (e.kind) {
                case ScenarioEvent::Kind::arrive: {
                    if (!resident[slot].empty()) {
                        throw ScriptError(i, "slot " + std::to_string(e.slot) + " is already occupied by '" +
                                                 resident[slot] + "'");
                    }
                    const bool known = std::any_of(zoo.begin(), zoo.end(),
                                                   [&](const DnnDescriptor& d) { return d.name() == e.dnn; });
                    if (!known) throw ScriptError(i, "unknown DNN '" + e.dnn + "'");
                    resident[slot] = e.dnn;
                    break;
                }
                case ScenarioEvent::Kind::depart:
                    if (resident[slot].empty()) throw ScriptError(i, "slot " + std::to_string(e.slot) + " is empty");
                    resident[slot].clear();
                    break;
                case ScenarioEvent::Kind::set_priorities:
                    priorities = e.priorities;
                    priority_event = i;
                    break;
                case ScenarioEvent::Kind::set_threshold:
                    search.threshold_mode = e.threshold_mode;
                    search.threshold = e.threshold;
                    break;
            }
        }

        IntervalRecord rec;
        rec.start = t;
        rec.end = i < events.size() ? events[i].time : script.end.value_or(t);
        rec.dnn = resident;
        for (std::size_t s = 0; s < kMaxSlots; ++s) rec.active[s] = !resident[s].empty();
        const Workload w = rec.workload(zoo);
        if (!w.empty()) {
            const auto p = interval_priorities(priorities, w, rec.active, priority_event.value_or(group_start));
            SearchConfig cfg = search;
            cfg.seed = search.seed + trace.intervals.size();
            const auto t0 = std::chrono::steady_clock::now();
            const auto result = mcts_search(w, estimator, p, cfg);
            rec.search_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            const auto report = simulate_throughput(w, result.mapping, platform);
            const auto ideals = ideal_throughputs(w, platform);
            const auto potential = potential_throughput(report, ideals);
            const auto starved = starvation_count(potential, config.starvation_eps);
            rec.reward = result.reward;
            rec.qualified = result.qualified;
            rec.fallback = result.fallback;
            rec.evaluations = result.evaluations;
            std::size_t k = 0;
            for (std::size_t s = 0; s < kMaxSlots; ++s) {
                if (!rec.active[s]) continue;
                rec.assignment[s] = result.mapping.assignments[k];
                rec.priority[s] = p[k];
                rec.throughput[s] = report.throughput[k];
                rec.potential[s] = potential[k];
                rec.starved[s] = starved.flags[k];
                ++k;
            }
        }
        trace.intervals.push_back(std::move(rec));
    }
    return trace;
}

void write_trace_csv(std::ostream& out, const ScenarioTrace& trace) {
    out << "interval,start,end,active,reward,qualified,fallback,evaluations,search_seconds";
    for (const char* col : {"dnn", "prio", "tput", "pot", "starved", "map"}) {
        for (int s = 0; s < kMaxSlots; ++s) out << ',' << col << s;
    }
    out << '\n';
    const auto old_precision = out.precision(17);
    for (std::size_t i = 0; i < trace.intervals.size(); ++i) {
        const auto& r = trace.intervals[i];
        out << i << ',' << r.start << ',' << r.end << ',' << r.active_count() << ',' << r.reward << ','
            << (r.qualified ? 1 : 0) << ',' << (r.fallback ? 1 : 0) << ',' << r.evaluations << ','
            << r.search_seconds;
        for (std::size_t s = 0; s < kMaxSlots; ++s) out << ',' << r.dnn[s];
        auto slot_values = [&](const SlotValues& v) {
            for (std::size_t s = 0; s < kMaxSlots; ++s) {
                out << ',';
                if (r.active[s]) out << v[s];
            }
        };
        slot_values(r.priority);
        slot_values(r.throughput);
        slot_values(r.potential);
        for (std::size_t s = 0; s < kMaxSlots; ++s) {
            out << ',';
            if (r.active[s]) out << (r.starved[s] ? 1 : 0);
        }
        for (std::size_t s = 0; s < kMaxSlots; ++s) out << ',' << assignment_digits(r.assignment[s]);
        out << '\n';
    }
    out.precision(old_precision);
}

json to_json(const ScenarioTrace& trace) {
    json intervals = json::array();
    for (const auto& r : trace.intervals) {
        intervals.push_back({{"start", r.start},
                             {"end", r.end},
                             {"dnn", slot_array(r.dnn)},
                             {"active", slot_array(r.active)},
                             {"assignment", slot_array(r.assignment)},
                             {"priority", slot_array(r.priority)},
                             {"throughput", slot_array(r.throughput)},
                             {"potential", slot_array(r.potential)},
                             {"starved", slot_array(r.starved)},
                             {"reward", r.reward},
                             {"qualified", r.qualified},
                             {"fallback", r.fallback},
                             {"evaluations", r.evaluations},
                             {"search_seconds", r.search_seconds}});
    }
    return {{"format", "priomap-trace"}, {"version", 1}, {"name", trace.name}, {"intervals", std::move(intervals)}};
}

ScenarioTrace scenario_trace_from_json(const json& j) {
    try {
        if (j.value("format", "") != "priomap-trace") throw ConfigError("not a priomap scenario trace");
        ScenarioTrace t;
        t.name = j.at("name").get<std::string>();
        for (const auto& r : j.at("intervals")) {
            IntervalRecord rec;
            rec.start = r.at("start").get<double>();
            rec.end = r.at("end").get<double>();
            rec.dnn = slot_array_from<std::string>(r.at("dnn"));
            rec.active = slot_array_from<bool>(r.at("active"));
            rec.assignment = slot_array_from<std::vector<int>>(r.at("assignment"));
            rec.priority = slot_array_from<double>(r.at("priority"));
            rec.throughput = slot_array_from<double>(r.at("throughput"));
            rec.potential = slot_array_from<double>(r.at("potential"));
            rec.starved = slot_array_from<bool>(r.at("starved"));
            rec.reward = r.at("reward").get<double>();
            rec.qualified = r.at("qualified").get<bool>();
            rec.fallback = r.at("fallback").get<bool>();
            rec.evaluations = r.at("evaluations").get<std::int64_t>();
            rec.search_seconds = r.at("search_seconds").get<double>();
            t.intervals.push_back(std::move(rec));
        }
        return t;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario trace: ") + e.what());
    }
}

json to_json(const MetricsRow& row) {
    const auto& m = row.metrics;
    json j{{"mix", row.mix},
           {"manager", row.manager},
           {"t_raw", m.t_raw},
           {"t_norm", m.t_norm},
           {"potential", m.potential},
           {"starved", m.starved}};
    j["pearson_r"] = m.pearson_r ? json(*m.pearson_r) : json(nullptr);
    return j;
}

std::filesystem::path emit_report(const ScenarioTrace& trace, ReportFormat format, const std::filesystem::path& path) {
    if (format == ReportFormat::json) {
        write_file(path, to_json(trace).dump(2) + "\n");
    } else {
        std::ostringstream out;
        write_trace_csv(out, trace);
        write_file(path, out.str());
    }
    return path;
}

std::filesystem::path emit_report(std::span<const MetricsRow> rows, ReportFormat format,
                                  const std::filesystem::path& path) {
    if (format == ReportFormat::json) {
        json j = json::array();
        for (const auto& r : rows) j.push_back(to_json(r));
        write_file(path, j.dump(2) + "\n");
    } else {
        std::ostringstream out;
        write_metrics_csv(out, rows);
        write_file(path, out.str());
    }
    return path;
}

}  // namespace priomap
