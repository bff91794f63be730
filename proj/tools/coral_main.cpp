// coral command line: ingest / weak-label / train / predict / eval / analyze.
// Subcommand wiring lives here; all real logic is in the headers.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "coral/artifacts.hpp"
#include "coral/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace coral;

namespace {

int float_width() {
    const char* env = std::getenv("CORAL_FLOAT_WIDTH");
    if (!env || !*env) return 64;
    std::string v = env;
    if (v == "32") return 32;
    if (v == "64") return 64;
    throw ConfigError("CORAL_FLOAT_WIDTH must be 32 or 64, got '" + v + "'");
}

RunConfig resolve_config(const std::string& config_path) {
    RunConfig rc;
    if (!config_path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("malformed config JSON in " + config_path + " at byte " +
                             std::to_string(e.byte));
        }
        run_config_from_json(j, rc);
    }
    return rc;
}

struct IngestOpts {
    std::string input, output, config;
};

int run_ingest(const IngestOpts& o) {
    RunConfig rc = resolve_config(o.config);
    if (!fs::is_directory(o.input)) throw IoError("input directory not found: " + o.input);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(o.input)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ipynb") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) {
                  return a.generic_string() < b.generic_string();
              });

    uint64_t input_hash = fnv1a64("coral-ingest");
    std::vector<CellRecord> records;
    size_t notebooks = 0, malformed = 0;
    for (const fs::path& p : files) {
        std::string rel = fs::relative(p, o.input).generic_string();
        if (rel.size() > 6 && rel.ends_with(".ipynb")) rel.resize(rel.size() - 6);
        std::string bytes = read_file(p.string());
        input_hash = fnv1a64(rel, input_hash);
        input_hash = fnv1a64(bytes, input_hash);
        try {
            NotebookDocument doc = parse_notebook(bytes, rel);
            std::vector<CellRecord> recs = associate_markdown(doc);
            records.insert(records.end(), recs.begin(), recs.end());
            ++notebooks;
        } catch (const ParseError&) {
            ++malformed;
        } catch (const SchemaError&) {
            ++malformed;
        }
    }

    std::string out = meta_jsonl_line(meta_json(rc, {{"input_dir", input_hash}}));
    for (const CellRecord& rec : records) out += record_to_json(rec).dump() + "\n";
    write_file(o.output, out);
    std::cout << "ingested " << records.size() << " code cells from " << notebooks
              << " notebooks";
    if (malformed) std::cout << " (skipped " << malformed << " malformed)";
    std::cout << "\n";
    return 0;
}

struct WeakLabelOpts {
    std::string cells, output, seed_table, config;
    double keep = 1.0;
    std::optional<uint64_t> seed;
};

int run_weak_label(const WeakLabelOpts& o) {
    RunConfig rc = resolve_config(o.config);
    if (o.seed) rc.trainer.seed = *o.seed;

    std::vector<CellRecord> records = read_cells_jsonl(o.cells);
    SeedTable seeds = o.seed_table.empty() ? default_seed_table() : load_seed_table(o.seed_table);
    auto [labels, coverage] = label_corpus(records, seeds);
    if (o.keep < 1.0) {
        labels = subsample_supervision(std::move(labels), o.keep, rc.trainer.seed);
        size_t covered = 0;
        for (const auto& l : labels)
            if (l.stage != Stage::UNLABELED) ++covered;
        coverage = labels.empty() ? 0.0
                                  : static_cast<double>(covered) /
                                        static_cast<double>(labels.size());
    }

    std::vector<std::pair<std::string, uint64_t>> inputs = {
        {"cells", fnv1a64(read_file(o.cells))}};
    if (!o.seed_table.empty()) inputs.push_back({"seed_table", fnv1a64(read_file(o.seed_table))});
    nlohmann::json meta = meta_json(rc, inputs);
    meta["coverage"] = coverage;

    std::string out = meta_jsonl_line(meta);
    for (const WeakLabel& l : labels) out += weak_label_to_json(l).dump() + "\n";
    write_file(o.output, out);
    std::cout << "labeled " << labels.size() << " cells, coverage " << fmt_double(coverage)
              << "\n";
    return 0;
}

struct TrainOpts {
    std::string cells, labels, output, log, config;
    std::optional<uint64_t> seed;
    std::optional<double> val_ratio, lr, momentum;
    std::optional<size_t> batch_size, max_epochs, patience, negatives;
    std::optional<int> min_count;
    bool disable_early_stop = false;
    bool unnormalized_reconstruction = false;
};

// Deterministic hash-ranked holdout of whole cells.
template <typename T>
void split_validation(const std::vector<T>& all, double ratio, uint64_t seed,
                      std::vector<T>* train_out, std::vector<T>* val_out,
                      const std::vector<std::string>& ids) {
    uint64_t stream = seed_stream(seed, "val-split");
    std::vector<size_t> order(all.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        uint64_t ha = mix64(fnv1a64(ids[a]) ^ stream);
        uint64_t hb = mix64(fnv1a64(ids[b]) ^ stream);
        if (ha != hb) return ha < hb;
        return ids[a] < ids[b];
    });
    // nudge before flooring so ratio 0.1 of 20 cells holds out 2, not 1
    size_t n_val = static_cast<size_t>(ratio * static_cast<double>(all.size()) + 1e-9);
    std::vector<char> is_val(all.size(), 0);
    for (size_t r = 0; r < n_val; ++r) is_val[order[r]] = 1;
    for (size_t i = 0; i < all.size(); ++i) {
        (is_val[i] ? *val_out : *train_out).push_back(all[i]);
    }
}

template <typename S>
int run_train(const TrainOpts& o) {
    RunConfig rc = resolve_config(o.config);
    if (o.seed) rc.trainer.seed = *o.seed;
    if (o.val_ratio) rc.val_ratio = *o.val_ratio;
    if (o.lr) rc.trainer.lr = *o.lr;
    if (o.momentum) rc.trainer.momentum = *o.momentum;
    if (o.batch_size) rc.trainer.batch_size = *o.batch_size;
    if (o.max_epochs) rc.trainer.max_epochs = *o.max_epochs;
    if (o.patience) rc.trainer.patience = *o.patience;
    if (o.negatives) rc.trainer.negatives = *o.negatives;
    if (o.min_count) rc.min_count = *o.min_count;
    if (o.disable_early_stop) rc.trainer.disable_early_stop = true;
    if (o.unnormalized_reconstruction) rc.trainer.normalized_reconstruction = false;
    rc.validate();

    std::vector<CellRecord> records = read_cells_jsonl(o.cells);
    std::vector<WeakLabel> labels = read_labels_jsonl(o.labels);

    std::vector<CellRecord> train_records, val_records;
    if (rc.val_ratio > 0.0) {
        std::vector<std::string> ids;
        ids.reserve(records.size());
        for (const auto& r : records) ids.push_back(r.cell_id());
        split_validation(records, rc.val_ratio, rc.trainer.seed, &train_records, &val_records,
                         ids);
    } else {
        train_records = records;
    }

    // The vocabulary sees only the training split.
    std::vector<CellGraph> graphs;
    for (const CellRecord& rec : train_records) {
        try {
            py::AstTree tree = py::parse_cell_ast(rec.source);
            std::string_view md = rec.markdown_context ? std::string_view(*rec.markdown_context)
                                                       : std::string_view();
            graphs.push_back(build_cell_graph(tree, md, rc.model.max_nodes, rec.cell_id()));
        } catch (const ParseError&) {
            // unparseable cells are skipped again (and counted) by the trainer
        }
    }
    Vocabulary vocab = build_vocabulary(graphs, rc.min_count);

    std::ostringstream log_stream;
    TrainOutcome<S> outcome = train<S>(train_records, labels, val_records, labels, vocab,
                                       rc.model, rc.trainer, rc.weights, &log_stream);

    nlohmann::json meta = meta_json(rc, {{"cells", fnv1a64(read_file(o.cells))},
                                         {"labels", fnv1a64(read_file(o.labels))}});
    save_checkpoint(o.output, outcome.best_params, vocab.content_hash(), outcome.steps);

    nlohmann::json sidecar;
    sidecar["coral_meta"] = meta;
    nlohmann::json tokens = nlohmann::json::array();
    for (size_t i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token(static_cast<int>(i)));
    sidecar["tokens"] = tokens;
    sidecar["min_count"] = vocab.min_count();
    write_file(o.output + ".vocab.json", sidecar.dump(2) + "\n");

    if (!o.log.empty()) {
        write_file(o.log, meta_jsonl_line(meta) + log_stream.str());
    }
    std::cout << "trained " << outcome.steps << " steps over " << outcome.val_losses.size()
              << " epochs, best epoch " << outcome.best_epoch << ", val loss "
              << fmt_double(outcome.best_val_loss) << "\n";
    if (outcome.skipped_train + outcome.skipped_val > 0) {
        std::cout << "skipped " << (outcome.skipped_train + outcome.skipped_val)
                  << " unparseable cells\n";
    }
    return 0;
}

struct PredictOpts {
    std::string cells, model, vocab, output, config;
};

template <typename S>
int run_predict(const PredictOpts& o) {
    RunConfig rc = resolve_config(o.config);
    std::string vocab_path = o.vocab.empty() ? o.model + ".vocab.json" : o.vocab;

    LoadedCheckpoint<S> ckpt = load_checkpoint<S>(o.model);
    Vocabulary vocab = Vocabulary::load(vocab_path);
    verify_vocab_hash(ckpt, vocab.content_hash());
    rc.model = ckpt.params.config;

    std::vector<CellRecord> records = read_cells_jsonl(o.cells);
    size_t skipped = 0;
    std::vector<StagePrediction> preds = predict_records(records, vocab, ckpt.params, &skipped);

    nlohmann::json meta = meta_json(rc, {{"cells", fnv1a64(read_file(o.cells))},
                                         {"model", fnv1a64(read_file(o.model))},
                                         {"vocab", fnv1a64(read_file(vocab_path))}});
    meta["skipped"] = skipped;
    std::string out = meta_jsonl_line(meta);
    for (const StagePrediction& p : preds) out += prediction_to_json(p).dump() + "\n";
    write_file(o.output, out);
    std::cout << "predicted " << preds.size() << " cells";
    if (skipped) std::cout << " (skipped " << skipped << " unparseable)";
    std::cout << "\n";
    return 0;
}

struct EvalOpts {
    std::string predictions, gold, output, config;
};

int run_eval(const EvalOpts& o) {
    RunConfig rc = resolve_config(o.config);
    std::vector<PredictedLabel> preds = read_predictions_jsonl(o.predictions);
    std::string gold_bytes = read_file(o.gold);
    std::istringstream gold_in(gold_bytes);
    std::vector<GoldLabel> gold = read_gold_csv(gold_in, o.gold);

    EvalResult result = evaluate_against_gold(preds, gold);
    nlohmann::json doc = confusion_json(result);
    doc["coral_meta"] = meta_json(rc, {{"predictions", fnv1a64(read_file(o.predictions))},
                                       {"gold", fnv1a64(gold_bytes)}});
    write_file(o.output, doc.dump(2) + "\n");
    std::cout << "accuracy " << fmt_double(result.accuracy) << " over " << result.total
              << " cells\n";
    return 0;
}

struct AnalyzeOpts {
    std::string predictions, profiles, transitions, cells, function, function_out, config;
    bool break_on_unlabeled = false;
};

int run_analyze(const AnalyzeOpts& o) {
    RunConfig rc = resolve_config(o.config);
    std::vector<PredictedLabel> preds = read_predictions_jsonl(o.predictions);

    // Group by notebook, ordered by cell index.
    std::map<std::string, std::vector<std::pair<int, Stage>>> groups;
    for (const PredictedLabel& p : preds) {
        auto [nb, idx] = split_cell_id(p.cell_id);
        groups[nb].push_back({idx, p.stage});
    }
    std::vector<StageProfile> profiles;
    std::vector<std::vector<Stage>> sequences;
    for (auto& [nb, cells] : groups) {
        std::sort(cells.begin(), cells.end());
        std::vector<Stage> stages;
        stages.reserve(cells.size());
        for (const auto& [idx, s] : cells) stages.push_back(s);
        profiles.push_back(stage_profile(nb, stages));
        sequences.push_back(std::move(stages));
    }

    nlohmann::json meta = meta_json(rc, {{"predictions", fnv1a64(read_file(o.predictions))}});
    write_file(o.profiles, meta_csv_comment(meta) + profiles_csv(profiles));

    TransitionStats stats = transition_stats(sequences, o.break_on_unlabeled);
    nlohmann::json tj = transitions_json(stats);
    tj["coral_meta"] = meta;
    write_file(o.transitions, tj.dump(2) + "\n");

    if (!o.function.empty()) {
        std::vector<CellRecord> records = read_cells_jsonl(o.cells);
        auto dist = function_stage_distribution(preds, records, o.function);
        nlohmann::json fj;
        fj["coral_meta"] = meta_json(rc, {{"predictions", fnv1a64(read_file(o.predictions))},
                                          {"cells", fnv1a64(read_file(o.cells))}});
        fj["function"] = o.function;
        fj["defined"] = dist.has_value();
        if (dist) {
            nlohmann::json d;
            for (int k = 0; k < kNumRealStages; ++k) {
                d[kStageNames[static_cast<size_t>(k)]] = (*dist)[static_cast<size_t>(k)];
            }
            fj["distribution"] = d;
        } else {
            fj["distribution"] = nullptr;
        }
        write_file(o.function_out, fj.dump(2) + "\n");
    }

    std::cout << "analyzed " << groups.size() << " notebooks, " << stats.total_transitions
              << " transitions\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"notebook stage labeling toolkit"};
    app.require_subcommand(1);

    IngestOpts ingest;
    CLI::App* ingest_cmd = app.add_subcommand("ingest", "read .ipynb files into a cells JSONL");
    ingest_cmd->add_option("--input", ingest.input, "directory of notebook files")->required();
    ingest_cmd->add_option("--output", ingest.output, "cells JSONL path")->required();
    ingest_cmd->add_option("--config", ingest.config, "run config JSON");

    WeakLabelOpts weak;
    CLI::App* weak_cmd = app.add_subcommand("weak-label", "apply the labeling heuristics");
    weak_cmd->add_option("--cells", weak.cells, "cells JSONL from ingest")->required();
    weak_cmd->add_option("--output", weak.output, "labels JSONL path")->required();
    weak_cmd->add_option("--seed-table", weak.seed_table, "seed function table JSON");
    weak_cmd->add_option("--keep", weak.keep, "fraction of covered labels to keep");
    weak_cmd->add_option("--seed", weak.seed, "seed for label subsampling");
    weak_cmd->add_option("--config", weak.config, "run config JSON");

    TrainOpts train_opts;
    std::string train_gold;
    CLI::App* train_cmd = app.add_subcommand("train", "fit the stage model on weak labels");
    train_cmd->add_option("--cells", train_opts.cells, "cells JSONL")->required();
    train_cmd->add_option("--labels", train_opts.labels, "weak labels JSONL")->required();
    train_cmd->add_option("--output", train_opts.output, "checkpoint path")->required();
    train_cmd->add_option("--log", train_opts.log, "step log JSONL path");
    train_cmd->add_option("--config", train_opts.config, "run config JSON");
    train_cmd->add_option("--seed", train_opts.seed, "seed for init, shuffles, and negatives");
    train_cmd->add_option("--val-ratio", train_opts.val_ratio, "held-out cell fraction");
    train_cmd->add_option("--lr", train_opts.lr, "learning rate");
    train_cmd->add_option("--momentum", train_opts.momentum, "momentum coefficient");
    train_cmd->add_option("--batch-size", train_opts.batch_size, "cells per step");
    train_cmd->add_option("--max-epochs", train_opts.max_epochs, "epoch cap");
    train_cmd->add_option("--patience", train_opts.patience, "early stop patience");
    train_cmd->add_option("--negatives", train_opts.negatives, "negatives per cell");
    train_cmd->add_option("--min-count", train_opts.min_count, "vocabulary threshold");
    train_cmd->add_flag("--disable-early-stop", train_opts.disable_early_stop,
                        "always run every epoch");
    train_cmd->add_flag("--unnormalized-reconstruction", train_opts.unnormalized_reconstruction,
                        "skip L2 normalization in the reconstruction loss");
    train_cmd->add_option("--gold", train_gold, "expert annotations (rejected: eval-only)");

    PredictOpts predict_opts;
    CLI::App* predict_cmd = app.add_subcommand("predict", "label cells with a trained model");
    predict_cmd->add_option("--cells", predict_opts.cells, "cells JSONL")->required();
    predict_cmd->add_option("--model", predict_opts.model, "checkpoint path")->required();
    predict_cmd->add_option("--vocab", predict_opts.vocab,
                            "vocabulary JSON (default: <model>.vocab.json)");
    predict_cmd->add_option("--output", predict_opts.output, "predictions JSONL path")
        ->required();
    predict_cmd->add_option("--config", predict_opts.config, "run config JSON");

    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against expert labels");
    eval_cmd->add_option("--predictions", eval_opts.predictions, "predictions JSONL")->required();
    eval_cmd->add_option("--gold", eval_opts.gold, "gold CSV (cell_id,stage)")->required();
    eval_cmd->add_option("--output", eval_opts.output, "evaluation report JSON")->required();
    eval_cmd->add_option("--config", eval_opts.config, "run config JSON");

    AnalyzeOpts analyze_opts;
    CLI::App* analyze_cmd = app.add_subcommand("analyze", "corpus statistics from predictions");
    analyze_cmd->add_option("--predictions", analyze_opts.predictions, "predictions JSONL")
        ->required();
    analyze_cmd->add_option("--output-profiles", analyze_opts.profiles, "per-notebook CSV")
        ->required();
    analyze_cmd->add_option("--output-transitions", analyze_opts.transitions,
                            "transition matrix JSON")
        ->required();
    CLI::Option* fn_opt = analyze_cmd->add_option("--function", analyze_opts.function,
                                                  "resolved function name to profile");
    CLI::Option* cells_opt =
        analyze_cmd->add_option("--cells", analyze_opts.cells, "cells JSONL (for --function)");
    CLI::Option* fn_out_opt = analyze_cmd->add_option(
        "--output-function", analyze_opts.function_out, "function distribution JSON");
    fn_opt->needs(cells_opt);
    fn_opt->needs(fn_out_opt);
    analyze_cmd->add_flag("--break-on-unlabeled", analyze_opts.break_on_unlabeled,
                          "sever transition chains at unlabeled cells");
    analyze_cmd->add_option("--config", analyze_opts.config, "run config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    if (train_cmd->parsed() && train_cmd->count("--gold")) {
        std::cerr << "error: train never reads expert annotations; pass weak labels via "
                     "--labels (gold CSVs are for eval)\n\n"
                  << app.help() << std::flush;
        return 2;
    }

    try {
        int width = float_width();
        if (ingest_cmd->parsed()) return run_ingest(ingest);
        if (weak_cmd->parsed()) return run_weak_label(weak);
        if (train_cmd->parsed()) {
            return width == 32 ? run_train<float>(train_opts) : run_train<double>(train_opts);
        }
        if (predict_cmd->parsed()) {
            return width == 32 ? run_predict<float>(predict_opts)
                               : run_predict<double>(predict_opts);
        }
        if (eval_cmd->parsed()) return run_eval(eval_opts);
        if (analyze_cmd->parsed()) return run_analyze(analyze_opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;  // unreachable: a subcommand is required
}
