#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "overlay/dataset.hpp"

namespace overlay {

enum class Schedule { cosine };
enum class Precision { bf16, fp16 };

/// Full fine-tuning hyperparameter set, one field per configuration row.
struct FinetuneConfig {
    int epochs = 0;
    int per_device_batch = 0;
    int grad_accumulation = 0;
    int effective_batch = 0;
    double learning_rate = 0.0;
    Schedule schedule = Schedule::cosine;
    double warmup_ratio = 0.0;
    double weight_decay = 0.0;
    Precision precision = Precision::bf16;
    bool vision_tower_frozen = true;
    bool llm_trainable = true;
    bool projector_trainable = true;
    int crops_per_image = 0;
    bool gradient_checkpointing = true;
    bool tf32 = true;
    bool flash_attention_v2 = false;
    int log_every_steps = 1;

    bool operator==(const FinetuneConfig&) const = default;
};

/// The recipe this toolkit ships as its default: 2 epochs, per-device batch 1
/// with accumulation 2, lr 2e-4, cosine schedule with 0.03 warmup, weight
/// decay 0, bf16, frozen vision tower, trainable LLM and projector, 16 crops,
/// gradient checkpointing and TF32 on, FlashAttention v2 off, log every step.
FinetuneConfig paper_default_config();

/// Violations returned as data, never thrown.
std::vector<std::string> validate(const FinetuneConfig& config);

/// Byte-stable key/value serialization; parsing rejects unknown keys.
std::string serialize_config(const FinetuneConfig& config);
FinetuneConfig parse_config(const std::string& text);
void save_config(const FinetuneConfig& config, const std::filesystem::path& path);
FinetuneConfig load_config(const std::filesystem::path& path);

struct InstructionRecord {
    std::string image_path;
    std::string instruction;
    std::string answer;  // "yes" iff the category is overlay, else "no"

    bool operator==(const InstructionRecord&) const = default;
};

/// One record per train-split sample, manifest order, written line-delimited.
std::vector<InstructionRecord> emit_training_manifest(
    const Manifest& manifest, const std::string& instruction,
    const std::filesystem::path& out_path);

struct EarlyStopState {
    double best_metric = -1.0;
    int best_epoch = 0;
    int patience = 1;
    int epochs_since_best = 0;
    bool stopped = false;
    int last_epoch = 0;
};

/// Strict improvement resets the counter; ties count as non-improvement.
/// Stops once the counter exceeds patience. Epochs must be strictly
/// increasing across calls.
EarlyStopState early_stop_update(EarlyStopState state, int epoch,
                                 double val_accuracy);

/// Narrow boundary to whatever actually updates the large model's weights.
/// run() must invoke on_epoch once per completed epoch in order and stop when
/// it returns false; the return value is a checkpoint locator.
class ExternalTrainer {
public:
    virtual ~ExternalTrainer() = default;
    using EpochCallback = std::function<bool(int epoch, double val_accuracy)>;
    virtual std::string run(const FinetuneConfig& config,
                            const std::filesystem::path& manifest_path,
                            const EpochCallback& on_epoch) = 0;
};

/// Test double driven by a scripted per-epoch accuracy sequence.
class MockTrainer : public ExternalTrainer {
public:
    explicit MockTrainer(std::vector<double> accuracies)
        : accuracies_(std::move(accuracies)) {}
    std::string run(const FinetuneConfig& config,
                    const std::filesystem::path& manifest_path,
                    const EpochCallback& on_epoch) override;
    int run_count() const { return run_count_; }

private:
    std::vector<double> accuracies_;
    int run_count_ = 0;
};

struct FinetuneRunSummary {
    std::vector<double> val_accuracy;  // one entry per completed epoch
    int best_epoch = 0;
    int stop_epoch = 0;
    bool early_stopped = false;
    std::string checkpoint;
};

/// Validates the config (rejecting before any trainer contact), hands it to
/// the trainer, and applies early stopping over the per-epoch callbacks.
FinetuneRunSummary run_finetune(const FinetuneConfig& config,
                                const std::filesystem::path& manifest_path,
                                ExternalTrainer& trainer, int patience = 1);

}  // namespace overlay
