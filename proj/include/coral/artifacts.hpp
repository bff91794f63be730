#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coral/analytics.hpp"
#include "coral/trainer.hpp"

#include "json.hpp"

namespace coral {

// The fully resolved knob set for one run: defaults, overlaid by --config,
// overlaid by explicit flags. Echoed into every artifact header.
struct RunConfig {
    ModelConfig model;
    TrainerConfig trainer;
    LossWeights weights;
    int min_count = 2;       // vocabulary inclusion threshold
    double val_ratio = 0.1;  // held-out cell fraction when training without a val set

    void validate() const {
        model.validate();
        trainer.validate();
        weights.validate();
        if (min_count < 1) throw ConfigError("min_count must be at least 1");
        if (!(val_ratio >= 0.0 && val_ratio < 1.0)) {
            throw ConfigError("val_ratio must lie in [0, 1)");
        }
    }
};

inline nlohmann::json run_config_to_json(const RunConfig& rc) {
    nlohmann::json j;
    model_config_to_json(rc.model, j["model"]);
    nlohmann::json& t = j["trainer"];
    t["batch_size"] = rc.trainer.batch_size;
    t["max_epochs"] = rc.trainer.max_epochs;
    t["patience"] = rc.trainer.patience;
    t["lr"] = rc.trainer.lr;
    t["momentum"] = rc.trainer.momentum;
    t["negatives"] = rc.trainer.negatives;
    t["seed"] = rc.trainer.seed;
    t["disable_early_stop"] = rc.trainer.disable_early_stop;
    t["normalized_reconstruction"] = rc.trainer.normalized_reconstruction;
    nlohmann::json& w = j["weights"];
    w["weak"] = rc.weights.weak;
    w["unique_stage"] = rc.weights.unique_stage;
    w["reconstruction"] = rc.weights.reconstruction;
    w["unique_topic"] = rc.weights.unique_topic;
    j["min_count"] = rc.min_count;
    j["val_ratio"] = rc.val_ratio;
    return j;
}

// Overlay keys present in `j` onto `rc`; absent keys keep their values.
inline void run_config_from_json(const nlohmann::json& j, RunConfig& rc) {
    if (!j.is_object()) throw SchemaError("run config must be a JSON object");
    if (j.contains("model")) model_config_from_json(j["model"], rc.model);
    if (j.contains("trainer")) {
        const nlohmann::json& t = j["trainer"];
        rc.trainer.batch_size = t.value("batch_size", rc.trainer.batch_size);
        rc.trainer.max_epochs = t.value("max_epochs", rc.trainer.max_epochs);
        rc.trainer.patience = t.value("patience", rc.trainer.patience);
        rc.trainer.lr = t.value("lr", rc.trainer.lr);
        rc.trainer.momentum = t.value("momentum", rc.trainer.momentum);
        rc.trainer.negatives = t.value("negatives", rc.trainer.negatives);
        rc.trainer.seed = t.value("seed", rc.trainer.seed);
        rc.trainer.disable_early_stop =
            t.value("disable_early_stop", rc.trainer.disable_early_stop);
        rc.trainer.normalized_reconstruction =
            t.value("normalized_reconstruction", rc.trainer.normalized_reconstruction);
    }
    if (j.contains("weights")) {
        const nlohmann::json& w = j["weights"];
        rc.weights.weak = w.value("weak", rc.weights.weak);
        rc.weights.unique_stage = w.value("unique_stage", rc.weights.unique_stage);
        rc.weights.reconstruction = w.value("reconstruction", rc.weights.reconstruction);
        rc.weights.unique_topic = w.value("unique_topic", rc.weights.unique_topic);
    }
    rc.min_count = j.value("min_count", rc.min_count);
    rc.val_ratio = j.value("val_ratio", rc.val_ratio);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    std::ostringstream out;
    out << f.rdbuf();
    if (f.bad()) throw IoError("read failed: " + path);
    return out.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write file: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw IoError("short write: " + path);
}

// Header stamped into every artifact: tool version, a hash of the resolved
// configuration (and the configuration itself), and the hash of each input.
inline nlohmann::json meta_json(const RunConfig& rc,
                                const std::vector<std::pair<std::string, uint64_t>>& inputs) {
    nlohmann::json config_echo = run_config_to_json(rc);
    nlohmann::json in = nlohmann::json::object();
    for (const auto& [name, hash] : inputs) in[name] = hex64(hash);
    nlohmann::json meta;
    meta["tool_version"] = kToolVersion;
    meta["config_hash"] = hex64(fnv1a64(config_echo.dump()));
    meta["config"] = config_echo;
    meta["inputs"] = in;
    return meta;
}

inline std::string meta_jsonl_line(const nlohmann::json& meta) {
    nlohmann::json j;
    j["coral_meta"] = meta;
    return j.dump() + "\n";
}

inline std::string meta_csv_comment(const nlohmann::json& meta) {
    return "# coral_meta " + meta.dump() + "\n";
}

namespace detail {

// Iterate data lines of a JSONL artifact, skipping header/blank lines.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
    std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ParseError("malformed JSONL in " + path + " at line " +
                             std::to_string(line_no));
        }
        if (j.is_object() && j.contains("coral_meta")) continue;
        fn(j, line_no);
    }
}

}  // namespace detail

inline std::vector<CellRecord> read_cells_jsonl(const std::string& path) {
    std::vector<CellRecord> out;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, size_t) {
        out.push_back(record_from_json(j));
    });
    return out;
}

inline std::vector<WeakLabel> read_labels_jsonl(const std::string& path) {
    std::vector<WeakLabel> out;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, size_t) {
        out.push_back(weak_label_from_json(j));
    });
    return out;
}

inline std::vector<PredictedLabel> read_predictions_jsonl(const std::string& path) {
    std::vector<PredictedLabel> out;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, size_t line_no) {
        if (!j.is_object() || !j.contains("cell_id") || !j.contains("predicted")) {
            throw SchemaError("prediction line " + std::to_string(line_no) + " in " + path +
                              " missing cell_id or predicted");
        }
        out.push_back({j["cell_id"].get<std::string>(),
                       stage_from_name(j["predicted"].get<std::string>())});
    });
    return out;
}

inline nlohmann::json prediction_to_json(const StagePrediction& p) {
    nlohmann::json j;
    j["cell_id"] = p.cell_id;
    j["p_stage"] = p.p_stage;
    j["predicted"] = stage_name(p.predicted);
    return j;
}

}  // namespace coral
