// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "priomap/dataset.hpp"
#include "priomap/embedding.hpp"
#include "priomap/error.hpp"
#include "priomap/estimator.hpp"
#include "priomap/mapper.hpp"
#include "priomap/metrics.hpp"
#include "priomap/platform.hpp"
#include "priomap/scenario.hpp"
#include "priomap/surrogate.hpp"
#include "priomap/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace priomap;

namespace {

struct Globals {
    std::string platform = std::string(PRIOMAP_DATA_DIR) + "/platform.json";
    std::string zoo = std::string(PRIOMAP_DATA_DIR) + "/zoo.json";
    std::uint64_t seed = 0;
    std::string out = ".";
};

struct SearchOptions {
    std::string mode = "dynamic";
    int slot = 0;
    double high = 0.7;
    int budget = 2000;
    std::string th_mode = "frac";
    double th = 0.05;
    std::string estimator = "oracle";
    std::string checkpoint;
    std::string order = "dnn-major";
    double stickiness = 0.98;
};

void add_search_options(CLI::App* cmd, SearchOptions& o) {
    cmd->add_option("--mode", o.mode, "Priority mode")->check(CLI::IsMember({"static", "dynamic", "uniform"}));
    cmd->add_option("--slot", o.slot, "High-priority slot (static mode)");
    cmd->add_option("--high", o.high, "High-priority weight (static mode)");
    cmd->add_option("--budget", o.budget, "Search iterations");
    cmd->add_option("--th-mode", o.th_mode, "Threshold mode")->check(CLI::IsMember({"abs", "frac"}));
    cmd->add_option("--th", o.th, "Threshold (inferences/s or fraction of t_ideal)");
    cmd->add_option("--estimator", o.estimator, "Throughput estimator")->check(CLI::IsMember({"oracle", "surrogate"}));
    cmd->add_option("--checkpoint", o.checkpoint, "Surrogate checkpoint (estimator=surrogate)");
    cmd->add_option("--order", o.order, "Decision order")->check(CLI::IsMember({"dnn-major", "interleaved"}));
    cmd->add_option("--stickiness", o.stickiness, "Rollout stickiness in [0, 1)");
}

SearchConfig search_config(const SearchOptions& o, std::uint64_t seed) {
    SearchConfig c;
    c.threshold_mode = o.th_mode == "abs" ? ThresholdMode::absolute : ThresholdMode::fraction;
    c.threshold = o.th;
    c.budget = o.budget;
    c.seed = seed;
    c.order = o.order == "interleaved" ? DecisionOrder::interleaved : DecisionOrder::dnn_major;
    c.rollout_stickiness = o.stickiness;
    c.validate();
    return c;
}

PriorityVector priorities_for(const SearchOptions& o, const Workload& w) {
    const int n = static_cast<int>(w.size());
    if (o.mode == "dynamic") return dynamic_priorities(w);
    if (o.mode == "uniform" || n == 1) return PriorityVector(w.size(), 1.0 / n);
    return static_priorities(o.slot, o.high, n);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

std::unique_ptr<ThroughputEstimator> make_estimator(const SearchOptions& o, const Platform& platform) {
    if (o.estimator == "oracle") return std::make_unique<OracleEstimator>(platform);
    if (o.checkpoint.empty()) throw InvalidArgument("--estimator surrogate needs --checkpoint");
    json j;
    try {
        j = json::parse(read_text(o.checkpoint));
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint '" + o.checkpoint + "' is not valid JSON: " + e.what());
    }
    return std::make_unique<SurrogateEstimator>(surrogate_bundle_from_json(j), platform);
}

Workload named_workload(const std::vector<DnnDescriptor>& zoo, const std::vector<std::string>& names) {
    if (names.empty()) throw InvalidArgument("give at least one --dnn");
    if (names.size() > static_cast<std::size_t>(kMaxSlots)) {
        throw InvalidArgument("at most " + std::to_string(kMaxSlots) + " DNNs");
    }
    Workload w;
    for (const auto& n : names) w.push_back(find_dnn(zoo, n));
    return w;
}

json mapping_json(const Mapping& m) { return {{"assignments", m.assignments}}; }

Mapping mapping_from_json(const json& j) {
    try {
        return Mapping{j.at("assignments").get<std::vector<std::vector<int>>>()};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed mapping: ") + e.what());
    }
}

json report_json(const Workload& w, const ThroughputReport& r, const Platform& platform) {
    const auto ideals = ideal_throughputs(w, platform);
    json slots = json::array();
    for (std::size_t i = 0; i < w.size(); ++i) {
        slots.push_back({{"dnn", w[i].name()},
                         {"throughput", r.throughput[i]},
                         {"ideal", ideals[i]},
                         {"potential", r.throughput[i] / ideals[i]}});
    }
    json stages = json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"slot", s.slot},
                          {"stage", s.stage},
                          {"component", platform.component(s.component).name},
                          {"work", s.work},
                          {"share", s.share},
                          {"rate", s.rate}});
    }
    return {{"slots", slots}, {"stages", stages}, {"residents", r.residents}, {"fallback", r.fallback}};
}

int cmd_zoo_list(const Globals& g) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    json out = json::array();
    for (const auto& d : zoo) {
        out.push_back({{"name", d.name()},
                       {"layers", d.layer_count()},
                       {"units", d.partition_units()},
                       {"macs", d.total_macs()},
                       {"t_ideal", ideal_throughput(d, platform)}});
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_simulate(const Globals& g, const std::vector<std::string>& dnns, const std::string& mapping_path,
                 const std::string& all_on) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    const auto w = named_workload(zoo, dnns);
    Mapping m;
    if (!mapping_path.empty()) {
        try {
            m = mapping_from_json(json::parse(read_text(mapping_path)));
        } catch (const json::exception& e) {
            throw ConfigError("mapping '" + mapping_path + "' is not valid JSON: " + e.what());
        }
    } else {
        m = uniform_mapping(w, all_on.empty() ? platform.reference_component() : platform.component_index(all_on));
    }
    const auto report = simulate_throughput(w, m, platform);
    std::cout << json{{"mapping", mapping_json(m)}, {"report", report_json(w, report, platform)}}.dump(2) << '\n';
    return 0;
}

int cmd_search(const Globals& g, const std::vector<std::string>& dnns, const SearchOptions& o) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    const auto w = named_workload(zoo, dnns);
    const auto estimator = make_estimator(o, platform);
    const auto cfg = search_config(o, g.seed);
    const auto p = priorities_for(o, w);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = mcts_search(w, *estimator, p, cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto simulated = simulate_throughput(w, result.mapping, platform);

    fs::create_directories(g.out);
    write_text(fs::path(g.out) / "mapping.json", mapping_json(result.mapping).dump(2) + "\n");
    write_text(fs::path(g.out) / "report.json", report_json(w, simulated, platform).dump(2) + "\n");
    std::ostringstream trace;
    trace << "iteration,best_reward\n";
    trace.precision(17);
    for (std::size_t i = 0; i < result.trace.size(); ++i) trace << i + 1 << ',' << result.trace[i] << '\n';
    write_text(fs::path(g.out) / "trace.csv", trace.str());

    const auto ideals = ideal_throughputs(w, platform);
    const auto metrics = compute_metrics(simulated, baseline_all_gpu(w, platform).report, ideals, p);
    std::cout << json{{"reward", result.reward},
                      {"qualified", result.qualified},
                      {"fallback", result.fallback},
                      {"evaluations", result.evaluations},
                      {"search_seconds", seconds},
                      {"priorities", p},
                      {"metrics", to_json(MetricsRow{"cli", "priomap", metrics})}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_dataset(const Globals& g, int count, const std::string& out_path) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    if (count < 1) throw InvalidArgument("--count must be >= 1");
    const auto samples = generate_dataset(zoo, platform, count, g.seed);
    const fs::path path = out_path.empty() ? fs::path(g.out) / "dataset.jsonl" : fs::path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_dataset(path, {platform.name(), platform.components(), g.seed, count}, samples);
    std::cout << json{{"path", path.string()}, {"count", samples.size()}}.dump() << '\n';
    return 0;
}

struct TrainOptions {
    std::string dataset;
    int epochs = 50;
    std::string mode = "raw";
    int augment = 1;
    double lr = 1e-3;
    double momentum = 0.9;
    int batch = 32;
    int hidden = 32;
    std::string checkpoint;
};

int cmd_train(const Globals& g, const TrainOptions& o) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    DatasetHeader header;
    const auto samples = read_dataset(o.dataset, &header);
    if (samples.empty()) throw InvalidArgument("dataset '" + o.dataset + "' is empty");
    if (header.components != platform.components()) {
        throw ConfigError("dataset was generated for " + std::to_string(header.components) + " components");
    }

    SurrogateBundle bundle;
    bundle.mode = parse_embedding_mode(o.mode);
    bundle.standardizer = LayerStandardizer::fit(zoo);
    if (bundle.mode == EmbeddingMode::vq) {
        VqModel vq(64, 0.25, 0.99, g.seed);
        VqTrainConfig vcfg;
        vcfg.seed = g.seed;
        train_vq(vq, bundle.standardizer.apply_all(zoo), vcfg);
        bundle.vq = std::move(vq);
    }
    const auto embedding = bundle.make_embedding();
    bundle.model = SurrogateModel(SurrogateShape{platform.components(), embedding->width(), o.hidden}, g.seed);

    const auto split = split_dataset(samples, 0.9, g.seed);
    const auto train_samples = augment_with_shuffles(split.train, o.augment, g.seed + 1);
    const EmbeddingCache cache(zoo, *embedding);
    const auto train = training_examples(train_samples, cache);
    const auto validation = training_examples(split.validation, cache);

    SurrogateTrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.momentum = o.momentum;
    cfg.seed = g.seed;
    const auto history = train_surrogate(bundle.model, train, validation, cfg);

    fs::create_directories(g.out);
    const fs::path ckpt = o.checkpoint.empty() ? fs::path(g.out) / "surrogate.json" : fs::path(o.checkpoint);
    write_text(ckpt, to_json(bundle).dump() + "\n");
    std::ostringstream hist;
    hist.precision(17);
    hist << "epoch,train_l2,validation_l2\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        hist << e + 1 << ',' << history.train_loss[e] << ',' << history.validation_loss[e] << '\n';
    }
    write_text(fs::path(g.out) / "train_history.csv", hist.str());
    std::cout << json{{"checkpoint", ckpt.string()},
                      {"train_samples", train.size()},
                      {"validation_samples", validation.size()},
                      {"final_train_l2", history.train_loss.empty() ? 0.0 : history.train_loss.back()},
                      {"final_validation_l2", history.validation_loss.empty() ? 0.0 : history.validation_loss.back()}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_eval(const Globals& g, int mixes, int size, const SearchOptions& o) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    if (mixes < 1) throw InvalidArgument("--mixes must be >= 1");
    if (size < 1 || size > kMaxSlots) throw InvalidArgument("--size must be in [1, " + std::to_string(kMaxSlots) + "]");
    const auto estimator = make_estimator(o, platform);
    std::mt19937_64 rng(g.seed);
    std::uniform_int_distribution<std::size_t> pick(0, zoo.size() - 1);
    std::vector<MetricsRow> rows;
    for (int k = 0; k < mixes; ++k) {
        Workload w;
        for (int i = 0; i < size; ++i) w.push_back(zoo[pick(rng)]);
        const auto p = priorities_for(o, w);
        const auto cfg = search_config(o, g.seed + static_cast<std::uint64_t>(k));
        const auto ideals = ideal_throughputs(w, platform);
        const auto base = baseline_all_gpu(w, platform);
        const std::string mix = "mix" + std::to_string(k);
        auto add = [&](const std::string& manager, const Mapping& m) {
            const auto report = simulate_throughput(w, m, platform);
            rows.push_back({mix, manager, compute_metrics(report, base.report, ideals, p)});
        };
        add("priomap", mcts_search(w, *estimator, p, cfg).mapping);
        add("all-gpu", base.mapping);
        add("random", uniform_random_mapping(w, platform.components(), cfg.seed));
        add("greedy", greedy_throughput_search(w, *estimator, p, cfg).mapping);
    }
    fs::create_directories(g.out);
    emit_report(rows, ReportFormat::csv, fs::path(g.out) / "eval.csv");
    emit_report(rows, ReportFormat::json, fs::path(g.out) / "eval.json");
    std::cout << json{{"rows", rows.size()}, {"csv", (fs::path(g.out) / "eval.csv").string()}}.dump() << '\n';
    return 0;
}

int cmd_scenario(const Globals& g, const std::string& script_path, bool uniform, const SearchOptions& o) {
    const auto platform = load_platform(g.platform);
    const auto zoo = load_model_zoo(g.zoo);
    auto script = load_scenario(script_path);
    if (uniform) script = with_uniform_priorities(script);
    const auto estimator = make_estimator(o, platform);
    ManagerConfig cfg;
    cfg.search = search_config(o, g.seed);
    const auto trace = run_scenario(script, zoo, *estimator, cfg);
    fs::create_directories(g.out);
    const auto csv = emit_report(trace, ReportFormat::csv, fs::path(g.out) / (script.name + "_trace.csv"));
    const auto js = emit_report(trace, ReportFormat::json, fs::path(g.out) / (script.name + "_trace.json"));
    int starved = 0, fallbacks = 0;
    for (const auto& r : trace.intervals) {
        starved += static_cast<int>(std::count(r.starved.begin(), r.starved.end(), true));
        fallbacks += r.fallback ? 1 : 0;
    }
    std::cout << json{{"intervals", trace.intervals.size()},
                      {"starved_slots", starved},
                      {"fallback_intervals", fallbacks},
                      {"csv", csv.string()},
                      {"json", js.string()}}
                     .dump(2)
              << '\n';
    return 0;
}

void print_error(const std::string& kind, const std::string& message, const json& extra = json::object()) {
    json e{{"kind", kind}, {"message", message}};
    e.update(extra);
    std::cerr << json{{"error", e}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Priority-aware multi-DNN mapping on heterogeneous SoCs"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--platform", g.platform, "Platform JSON");
    app.add_option("--zoo", g.zoo, "Model zoo JSON");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--out", g.out, "Output directory");

    auto* zoo_cmd = app.add_subcommand("zoo", "Model zoo utilities");
    zoo_cmd->require_subcommand(1);
    auto* zoo_list = zoo_cmd->add_subcommand("list", "List bundled DNNs with t_ideal");

    std::vector<std::string> dnns;
    std::string mapping_path, all_on;
    auto* simulate = app.add_subcommand("simulate", "Simulate one mapping");
    simulate->add_option("--dnn", dnns, "DNN name, once per slot")->required();
    auto* mapping_opt = simulate->add_option("--mapping", mapping_path, "Mapping JSON {\"assignments\": [[...]]}");
    simulate->add_option("--all-on", all_on, "Map every unit to this component")->excludes(mapping_opt);

    SearchOptions so;
    auto* search = app.add_subcommand("search", "Search a mapping");
    search->add_option("--dnn", dnns, "DNN name, once per slot")->required();
    add_search_options(search, so);

    int count = 9000;
    std::string dataset_out;
    auto* dataset = app.add_subcommand("dataset", "Generate a training dataset");
    dataset->add_option("--count", count, "Number of samples");
    dataset->add_option("--out", dataset_out, "Output JSONL path");

    TrainOptions to;
    auto* train = app.add_subcommand("train", "Train the throughput surrogate");
    train->add_option("--dataset", to.dataset, "Dataset JSONL")->required();
    train->add_option("--epochs", to.epochs, "Epochs");
    train->add_option("--mode", to.mode, "Layer embedding")->check(CLI::IsMember({"raw", "vq"}));
    train->add_option("--augment", to.augment, "Slot-shuffled copies per training sample");
    train->add_option("--lr", to.lr, "Learning rate");
    train->add_option("--momentum", to.momentum, "Momentum");
    train->add_option("--batch", to.batch, "Batch size");
    train->add_option("--hidden", to.hidden, "Hidden width");
    train->add_option("--checkpoint", to.checkpoint, "Checkpoint path (default OUT/surrogate.json)");

    int mixes = 50, size = 4;
    auto* eval = app.add_subcommand("eval", "Compare managers on random mixes");
    eval->add_option("--mixes", mixes, "Number of mixes");
    eval->add_option("--size", size, "DNNs per mix");
    add_search_options(eval, so);

    std::string script;
    bool uniform = false;
    auto* scenario = app.add_subcommand("scenario", "Replay a scenario script");
    scenario->add_option("--script", script, "Scenario JSON")->required();
    scenario->add_flag("--uniform", uniform, "Replace every priority setting by uniform");
    add_search_options(scenario, so);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (zoo_list->parsed()) return cmd_zoo_list(g);
        if (simulate->parsed()) return cmd_simulate(g, dnns, mapping_path, all_on);
        if (search->parsed()) return cmd_search(g, dnns, so);
        if (dataset->parsed()) return cmd_dataset(g, count, dataset_out);
        if (train->parsed()) return cmd_train(g, to);
        if (eval->parsed()) return cmd_eval(g, mixes, size, so);
        if (scenario->parsed()) return cmd_scenario(g, script, uniform, so);
    } catch (const ScriptError& e) {
        print_error(e.kind(), e.what(), {{"event_index", e.event_index()}});
        return 1;
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
