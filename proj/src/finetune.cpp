#include "overlay/finetune.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "overlay/metrics.hpp"

namespace overlay {

using ojson = nlohmann::ordered_json;

FinetuneConfig paper_default_config() {
    FinetuneConfig c;
    c.epochs = 2;
    c.per_device_batch = 1;
    c.grad_accumulation = 2;
    c.effective_batch = 2;
    c.learning_rate = 2e-4;
    c.schedule = Schedule::cosine;
    c.warmup_ratio = 0.03;
    c.weight_decay = 0.0;
    c.precision = Precision::bf16;
    c.vision_tower_frozen = true;
    c.llm_trainable = true;
    c.projector_trainable = true;
    c.crops_per_image = 16;
    c.gradient_checkpointing = true;
    c.tf32 = true;
    c.flash_attention_v2 = false;
    c.log_every_steps = 1;
    return c;
}

std::vector<std::string> validate(const FinetuneConfig& c) {
    std::vector<std::string> v;
    if (c.epochs < 1) v.push_back("epochs must be >= 1");
    if (c.per_device_batch < 1) v.push_back("per_device_batch must be >= 1");
    if (c.grad_accumulation < 1) v.push_back("grad_accumulation must be >= 1");
    if (c.effective_batch != c.per_device_batch * c.grad_accumulation)
        v.push_back("effective_batch must equal per_device_batch * grad_accumulation");
    if (c.learning_rate <= 0) v.push_back("learning_rate must be > 0");
    if (c.warmup_ratio < 0 || c.warmup_ratio > 1)
        v.push_back("warmup_ratio must be in [0,1]");
    if (c.weight_decay < 0) v.push_back("weight_decay must be >= 0");
    if (c.crops_per_image < 1) v.push_back("crops_per_image must be >= 1");
    if (c.log_every_steps < 1) v.push_back("log_every_steps must be >= 1");
    return v;
}

namespace {

std::string schedule_name(Schedule s) {
    return s == Schedule::cosine ? "cosine" : "cosine";
}

std::string precision_name(Precision p) {
    return p == Precision::bf16 ? "bf16" : "fp16";
}

}  // namespace

std::string serialize_config(const FinetuneConfig& c) {
    ojson j;
    j["epochs"] = c.epochs;
    j["per_device_batch"] = c.per_device_batch;
    j["grad_accumulation"] = c.grad_accumulation;
    j["effective_batch"] = c.effective_batch;
    j["learning_rate"] = c.learning_rate;
    j["schedule"] = schedule_name(c.schedule);
    j["warmup_ratio"] = c.warmup_ratio;
    j["weight_decay"] = c.weight_decay;
    j["precision"] = precision_name(c.precision);
    j["vision_tower_frozen"] = c.vision_tower_frozen;
    j["llm_trainable"] = c.llm_trainable;
    j["projector_trainable"] = c.projector_trainable;
    j["crops_per_image"] = c.crops_per_image;
    j["gradient_checkpointing"] = c.gradient_checkpointing;
    j["tf32"] = c.tf32;
    j["flash_attention_v2"] = c.flash_attention_v2;
    j["log_every_steps"] = c.log_every_steps;
    return j.dump(2) + "\n";
}

FinetuneConfig parse_config(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid config: ") + e.what());
    }
    static const std::set<std::string> known = {
        "epochs", "per_device_batch", "grad_accumulation", "effective_batch",
        "learning_rate", "schedule", "warmup_ratio", "weight_decay", "precision",
        "vision_tower_frozen", "llm_trainable", "projector_trainable",
        "crops_per_image", "gradient_checkpointing", "tf32", "flash_attention_v2",
        "log_every_steps"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) throw SchemaError("unknown config key \"" + key + "\"");
    }
    FinetuneConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.per_device_batch = j.at("per_device_batch").get<int>();
    c.grad_accumulation = j.at("grad_accumulation").get<int>();
    c.effective_batch = j.at("effective_batch").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    const auto sched = j.at("schedule").get<std::string>();
    if (sched != "cosine") throw SchemaError("unknown schedule \"" + sched + "\"");
    c.schedule = Schedule::cosine;
    c.warmup_ratio = j.at("warmup_ratio").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    const auto prec = j.at("precision").get<std::string>();
    if (prec == "bf16")
        c.precision = Precision::bf16;
    else if (prec == "fp16")
        c.precision = Precision::fp16;
    else
        throw SchemaError("unknown precision \"" + prec + "\"");
    c.vision_tower_frozen = j.at("vision_tower_frozen").get<bool>();
    c.llm_trainable = j.at("llm_trainable").get<bool>();
    c.projector_trainable = j.at("projector_trainable").get<bool>();
    c.crops_per_image = j.at("crops_per_image").get<int>();
    c.gradient_checkpointing = j.at("gradient_checkpointing").get<bool>();
    c.tf32 = j.at("tf32").get<bool>();
    c.flash_attention_v2 = j.at("flash_attention_v2").get<bool>();
    c.log_every_steps = j.at("log_every_steps").get<int>();
    return c;
}

void save_config(const FinetuneConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << serialize_config(config);
}

FinetuneConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<InstructionRecord> emit_training_manifest(
    const Manifest& manifest, const std::string& instruction,
    const std::filesystem::path& out_path) {
    for (const auto& s : manifest.samples)
        if (s.split != Split::train)
            throw ContractError("emit_training_manifest: manifest must be train split");
    std::vector<InstructionRecord> records;
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open for writing: " + out_path.string());
    for (const auto& s : manifest.samples) {
        InstructionRecord r;
        r.image_path = s.image_path;
        r.instruction = instruction;
        r.answer = category_to_binary(s.category) == BinaryLabel::positive ? "yes" : "no";
        ojson j;
        j["image_path"] = r.image_path;
        j["instruction"] = r.instruction;
        j["answer"] = r.answer;
        out << j.dump() << "\n";
        records.push_back(std::move(r));
    }
    return records;
}

EarlyStopState early_stop_update(EarlyStopState state, int epoch,
                                 double val_accuracy) {
    if (val_accuracy < 0.0 || val_accuracy > 1.0)
        throw ContractError("val_accuracy must be in [0,1]");
    if (epoch <= state.last_epoch)
        throw ContractError("epoch numbers must be strictly increasing");
    state.last_epoch = epoch;
    if (val_accuracy > state.best_metric) {
        state.best_metric = val_accuracy;
        state.best_epoch = epoch;
        state.epochs_since_best = 0;
    } else {
        ++state.epochs_since_best;  // ties count as non-improvement
        if (state.epochs_since_best > state.patience) state.stopped = true;
    }
    return state;
}

std::string MockTrainer::run(const FinetuneConfig& config,
                             const std::filesystem::path& manifest_path,
                             const EpochCallback& on_epoch) {
    (void)manifest_path;
    ++run_count_;
    const int epochs = std::min<int>(config.epochs,
                                     static_cast<int>(accuracies_.size()));
    for (int e = 1; e <= epochs; ++e) {
        if (!on_epoch(e, accuracies_[static_cast<size_t>(e) - 1])) break;
    }
    return "mock-checkpoint";
}

FinetuneRunSummary run_finetune(const FinetuneConfig& config,
                                const std::filesystem::path& manifest_path,
                                ExternalTrainer& trainer, int patience) {
    if (const auto violations = validate(config); !violations.empty()) {
        std::string msg = "invalid finetune config:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw ContractError(msg);
    }
    if (!std::filesystem::exists(manifest_path))
        throw IoError("training manifest not found: " + manifest_path.string());

    FinetuneRunSummary summary;
    EarlyStopState state;
    state.patience = patience;
    summary.checkpoint = trainer.run(
        config, manifest_path, [&](int epoch, double val_accuracy) {
            state = early_stop_update(state, epoch, val_accuracy);
            summary.val_accuracy.push_back(val_accuracy);
            summary.stop_epoch = epoch;
            return !state.stopped;
        });
    summary.best_epoch = state.best_epoch;
    summary.early_stopped = state.stopped;
    return summary;
}

}  // namespace overlay
