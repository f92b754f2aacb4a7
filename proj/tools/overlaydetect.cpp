// overlaydetect: generate synthetic corpora, train the fusion classifier,
// evaluate detection strategies, and render comparison tables.

#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>

#include <CLI11.hpp>
#include <json.hpp>

#include "overlay/dataset.hpp"
#include "overlay/finetune.hpp"
#include "overlay/fusion.hpp"
#include "overlay/harness.hpp"
#include "overlay/prompting.hpp"
#include "overlay/vlm_client.hpp"

namespace {

using namespace overlay;

SyntheticSpec spec_from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    s.seed = j.value("seed", 0ULL);
    s.count_per_category = j.value("count_per_category", 10);
    s.width = j.value("width", 128);
    s.height = j.value("height", 128);
    if (j.contains("overlay_style")) {
        const auto& o = j["overlay_style"];
        s.overlay_style.font_scale = o.value("font_scale", 2);
        s.overlay_style.solid_fill = o.value("solid_fill", true);
        s.overlay_style.margin_px = o.value("margin_px", 8);
    }
    if (j.contains("natural_style")) {
        const auto& n = j["natural_style"];
        s.natural_style.warp = n.value("warp", 0.35);
        s.natural_style.alpha_blend = n.value("alpha_blend", 0.7);
    }
    return s;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    std::ifstream in(spec_path);
    if (!in) throw IoError("cannot open spec: " + spec_path);
    nlohmann::json j;
    in >> j;
    SyntheticSpec spec = spec_from_json(j);
    const int eval_count = j.value("eval_count_per_category", spec.count_per_category / 2);

    spec.split = Split::train;
    Manifest train = generate_synthetic_corpus(spec, std::filesystem::path(out_dir) / "train");

    SyntheticSpec eval_spec = spec;
    eval_spec.split = Split::eval;
    eval_spec.count_per_category = std::max(1, eval_count);
    eval_spec.seed = spec.seed ^ 0x5bd1e9955bd1e995ULL;
    Manifest eval = generate_synthetic_corpus(eval_spec, std::filesystem::path(out_dir) / "eval");

    Manifest all;
    all.samples = train.samples;
    all.samples.insert(all.samples.end(), eval.samples.begin(), eval.samples.end());
    all.retally();
    const auto manifest_path = std::filesystem::path(out_dir) / "manifest.jsonl";
    save_manifest(all, manifest_path);
    std::cout << "wrote " << all.samples.size() << " samples to " << manifest_path.string()
              << "\n";
    return 0;
}

Manifest split_of(const Manifest& m, Split split) {
    Manifest out;
    for (const auto& s : m.samples)
        if (s.split == split) out.samples.push_back(s);
    out.retally();
    return out;
}

int cmd_train_fusion(const std::string& manifest_path, const std::string& config_path,
                     const std::string& out_path) {
    FusionConfig model;
    TrainConfig tc;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot open config: " + config_path);
        nlohmann::json j;
        in >> j;
        model.char_embed_dim = j.value("char_embed_dim", model.char_embed_dim);
        model.text_hidden = j.value("text_hidden", model.text_hidden);
        model.pos_hidden = j.value("pos_hidden", model.pos_hidden);
        model.image_feature = j.value("image_feature", model.image_feature);
        model.encoder_input = j.value("encoder_input", model.encoder_input);
        tc.epochs = j.value("epochs", tc.epochs);
        tc.learning_rate = j.value("learning_rate", tc.learning_rate);
        tc.seed = j.value("seed", tc.seed);
        tc.batch_size = j.value("batch_size", tc.batch_size);
    }
    const Manifest manifest = split_of(load_manifest(manifest_path), Split::train);
    if (manifest.samples.empty())
        throw ContractError("no train-split samples in manifest");
    std::vector<TrainRecord> records;
    for (const auto& s : manifest.samples) records.push_back(load_record(s));
    TrainResult result = train(records, model, tc);
    save_checkpoint(result.params, out_path);
    const auto& last = result.trace.back();
    std::cout << "trained " << tc.epochs << " epochs; final loss " << last.loss
              << ", train accuracy " << last.accuracy << "\n"
              << "checkpoint: " << out_path << "\n";
    return 0;
}

std::string display_name(Strategy s) {
    switch (s) {
        case Strategy::zero_shot: return "Zero-shot LLM";
        case Strategy::sequential: return "Sequential prompting";
        case Strategy::fusion: return "Fusion CNN";
        case Strategy::finetuned: return "Fine-tuned LLM";
    }
    return "?";
}

struct Tracer {
    std::ofstream out;
    std::mutex mu;
    void record(const VlmRequest& req, const VlmResponse& resp) {
        std::lock_guard g(mu);
        nlohmann::ordered_json j;
        j["image_id"] = req.request_id;
        j["prompt"] = req.prompt;
        j["response"] = resp.text;
        out << j.dump() << "\n";
    }
};

int cmd_eval(const std::string& strategy_name, const std::string& manifest_path,
             const std::string& templates_dir, const std::string& params_path,
             const std::string& endpoint_config, const std::string& mock_script,
             int parallelism, bool trace, const std::string& out_path) {
    const Strategy strategy = strategy_from_string(strategy_name);
    const Manifest manifest = split_of(load_manifest(manifest_path), Split::eval);
    if (manifest.samples.empty()) throw ContractError("no eval-split samples in manifest");

    std::unique_ptr<VlmClient> client;
    std::unique_ptr<Tracer> tracer;
    if (strategy != Strategy::fusion) {
        if (!mock_script.empty())
            client = std::make_unique<MockVlmClient>(load_script(mock_script));
        else if (!endpoint_config.empty())
            client = std::make_unique<HttpVlmClient>(load_endpoint_config(endpoint_config));
        else
            throw ContractError("strategy needs --mock-script or --endpoint-config");
        if (trace) {
            tracer = std::make_unique<Tracer>();
            tracer->out.open(out_path + ".trace.jsonl");
            client->set_observer([t = tracer.get()](const VlmRequest& rq,
                                                    const VlmResponse& rs) {
                t->record(rq, rs);
            });
        }
    }

    StrategyFn fn;
    FusionParams params;
    PromptTemplate single, stage1, stage2;
    switch (strategy) {
        case Strategy::fusion:
            if (params_path.empty()) throw ContractError("fusion needs --params");
            params = load_checkpoint(params_path);
            fn = [&params](const ImageSample& s) {
                return detect_fusion(params, load_record(s));
            };
            break;
        case Strategy::zero_shot:
        case Strategy::finetuned:
            single = load_template(templates_dir, "zero_shot");
            fn = [&, strategy](const ImageSample& s) {
                auto v = detect_zero_shot(read_file_bytes(s.image_path), s.id, *client,
                                          single);
                v.strategy = strategy;
                return v;
            };
            break;
        case Strategy::sequential:
            stage1 = load_template(templates_dir, "stage1_extract");
            stage2 = load_template(templates_dir, "stage2_verdict");
            fn = [&](const ImageSample& s) {
                auto [v, extraction] = detect_sequential(read_file_bytes(s.image_path),
                                                         s.id, *client, stage1, stage2);
                (void)extraction;
                return v;
            };
            break;
    }

    const auto records = evaluate(manifest, to_string(strategy), fn, parallelism);
    save_predictions(records, out_path + ".predictions.jsonl");

    ComparisonReport report;
    report.dataset_fingerprint = fingerprint_file(manifest_path);
    report.rows.push_back({display_name(strategy), score(records)});
    save_report(report, out_path);
    std::cout << render_table(report);
    return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_path) {
    ComparisonReport merged;
    for (const auto& p : report_paths) {
        const ComparisonReport r = load_report(p);
        if (merged.dataset_fingerprint.empty())
            merged.dataset_fingerprint = r.dataset_fingerprint;
        else if (!r.dataset_fingerprint.empty() &&
                 r.dataset_fingerprint != merged.dataset_fingerprint)
            std::cerr << "warning: " << p << " was evaluated on a different manifest\n";
        for (const auto& row : r.rows) merged.rows.push_back(row);
    }
    const std::string table = render_table(merged);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << table;
    std::cout << table;
    return 0;
}

int cmd_emit_finetune(const std::string& manifest_path, const std::string& out_config,
                      const std::string& out_manifest) {
    const Manifest manifest = split_of(load_manifest(manifest_path), Split::train);
    save_config(paper_default_config(), out_config);
    const std::string instruction =
        "Does this image contain artificially overlaid text? Answer yes or no.";
    const auto records = emit_training_manifest(manifest, instruction, out_manifest);
    std::cout << "wrote " << records.size() << " instruction records to " << out_manifest
              << "\nconfig: " << out_config << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"artificial text overlay detection toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    gen->add_option("--spec", spec_path, "synthetic spec (JSON)")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    std::string manifest_path, config_path, ckpt_path;
    auto* tf = app.add_subcommand("train-fusion", "train the fusion classifier");
    tf->add_option("--manifest", manifest_path, "dataset manifest")->required();
    tf->add_option("--config", config_path, "trainer config (JSON)");
    tf->add_option("--out", ckpt_path, "output checkpoint")->required();

    std::string strategy, templates_dir = "templates", params_path, endpoint_config,
                mock_script, report_out;
    int parallelism = 1;
    bool trace = false;
    auto* ev = app.add_subcommand("eval", "evaluate a strategy over an eval manifest");
    ev->add_option("--strategy", strategy, "zero_shot|sequential|fusion|finetuned")
        ->required();
    ev->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ev->add_option("--templates", templates_dir, "prompt templates directory");
    ev->add_option("--params", params_path, "fusion checkpoint");
    ev->add_option("--endpoint-config", endpoint_config, "real endpoint config (JSON)");
    ev->add_option("--mock-script", mock_script, "scripted mock behavior (JSON)");
    ev->add_option("--parallelism", parallelism, "concurrent images");
    ev->add_flag("--trace", trace, "persist per-image chain transcripts");
    ev->add_option("--out", report_out, "report output path")->required();

    std::vector<std::string> report_paths;
    std::string table_out;
    auto* cmp = app.add_subcommand("compare", "merge reports into one table");
    cmp->add_option("--reports", report_paths, "machine report files")->required();
    cmp->add_option("--out", table_out, "rendered table output")->required();

    std::string out_config, out_manifest;
    auto* emit = app.add_subcommand("emit-finetune", "emit fine-tuning artifacts");
    emit->add_option("--manifest", manifest_path, "dataset manifest")->required();
    emit->add_option("--out-config", out_config, "hyperparameter config output")
        ->required();
    emit->add_option("--out-manifest", out_manifest, "instruction manifest output")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, out_dir);
        if (tf->parsed()) return cmd_train_fusion(manifest_path, config_path, ckpt_path);
        if (ev->parsed())
            return cmd_eval(strategy, manifest_path, templates_dir, params_path,
                            endpoint_config, mock_script, parallelism, trace, report_out);
        if (cmp->parsed()) return cmd_compare(report_paths, table_out);
        if (emit->parsed())
            return cmd_emit_finetune(manifest_path, out_config, out_manifest);
    } catch (const overlay::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
