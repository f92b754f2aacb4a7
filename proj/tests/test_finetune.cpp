#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "overlay/finetune.hpp"

using namespace overlay;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const auto dir = fs::temp_directory_path() / "overlay_test_finetune";
    fs::create_directories(dir);
    return dir;
}

Manifest train_manifest() {
    Manifest m;
    m.samples = {{"a", "/img/a.pgm", Category::overlay, Split::train},
                 {"b", "/img/b.pgm", Category::natural, Split::train},
                 {"c", "/img/c.pgm", Category::none, Split::train}};
    m.retally();
    return m;
}

}  // namespace

TEST_CASE("paper_default_config: every configuration row") {
    const auto c = paper_default_config();
    CHECK(c.epochs == 2);
    CHECK(c.per_device_batch == 1);
    CHECK(c.grad_accumulation == 2);
    CHECK(c.effective_batch == 2);
    CHECK(c.learning_rate == 2e-4);
    CHECK(c.schedule == Schedule::cosine);
    CHECK(c.warmup_ratio == 0.03);
    CHECK(c.weight_decay == 0.0);
    CHECK(c.precision == Precision::bf16);
    CHECK(c.vision_tower_frozen);
    CHECK(c.llm_trainable);
    CHECK(c.projector_trainable);
    CHECK(c.crops_per_image == 16);
    CHECK(c.gradient_checkpointing);
    CHECK(c.tf32);
    CHECK_FALSE(c.flash_attention_v2);
    CHECK(c.log_every_steps == 1);
}

TEST_CASE("config serialization: byte-stable, round-trips, rejects unknown keys") {
    const auto c = paper_default_config();
    const std::string s1 = serialize_config(c);
    const std::string s2 = serialize_config(c);
    CHECK(s1 == s2);
    CHECK(parse_config(s1) == c);
    CHECK_THROWS_WITH_AS(parse_config(R"({"epochs":2,"bogus":1})"),
                         doctest::Contains("bogus"), SchemaError);
}

TEST_CASE("validate: default ok, single-field mutations rejected") {
    CHECK(validate(paper_default_config()).empty());

    auto c = paper_default_config();
    c.effective_batch = 3;
    auto v = validate(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("effective_batch") != std::string::npos);

    c = paper_default_config();
    c.warmup_ratio = 1.5;
    CHECK_FALSE(validate(c).empty());

    c = paper_default_config();
    c.epochs = 0;
    CHECK_FALSE(validate(c).empty());

    c = paper_default_config();
    c.learning_rate = 0.0;
    CHECK_FALSE(validate(c).empty());

    c = paper_default_config();
    c.crops_per_image = 0;
    CHECK_FALSE(validate(c).empty());
}

TEST_CASE("emit_training_manifest: answers follow the category mapping") {
    const auto path = scratch() / "instr.jsonl";
    const auto records = emit_training_manifest(train_manifest(), "Overlay?", path);
    REQUIRE(records.size() == 3);
    CHECK(records[0].answer == "yes");
    CHECK(records[1].answer == "no");
    CHECK(records[2].answer == "no");
    CHECK(records[0].instruction == "Overlay?");

    std::ifstream in(path);
    int lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 3);
}

TEST_CASE("emit_training_manifest: empty manifest, eval-split rejection") {
    const auto path = scratch() / "empty.jsonl";
    Manifest empty;
    CHECK(emit_training_manifest(empty, "x", path).empty());

    Manifest eval = train_manifest();
    eval.samples[1].split = Split::eval;
    CHECK_THROWS_AS(emit_training_manifest(eval, "x", path), ContractError);
}

TEST_CASE("early_stop_update: patience-1 rule examples") {
    EarlyStopState s;
    s.patience = 1;
    s = early_stop_update(s, 1, 0.60);
    s = early_stop_update(s, 2, 0.70);
    s = early_stop_update(s, 3, 0.65);
    CHECK(s.best_epoch == 2);
    CHECK_FALSE(s.stopped);  // counter == patience, not yet exceeded
    s = early_stop_update(s, 4, 0.64);
    CHECK(s.stopped);
    CHECK(s.best_epoch == 2);
}

TEST_CASE("early_stop_update: ties are non-improvements") {
    EarlyStopState s;
    s.patience = 1;
    s = early_stop_update(s, 1, 0.70);
    s = early_stop_update(s, 2, 0.70);
    CHECK(s.best_epoch == 1);
    CHECK(s.epochs_since_best == 1);
}

TEST_CASE("early_stop_update: contract errors") {
    EarlyStopState s;
    s = early_stop_update(s, 1, 0.5);
    CHECK_THROWS_AS(early_stop_update(s, 1, 0.6), ContractError);  // non-monotone
    CHECK_THROWS_AS(early_stop_update(s, 2, 1.5), ContractError);
}

TEST_CASE("run_finetune: scripted trainer sequences") {
    const auto manifest = scratch() / "m.jsonl";
    { std::ofstream out(manifest); out << ""; }

    MockTrainer t1({0.6, 0.7});
    auto cfg = paper_default_config();
    const auto s1 = run_finetune(cfg, manifest, t1, 1);
    CHECK(s1.best_epoch == 2);
    CHECK_FALSE(s1.early_stopped);
    CHECK(s1.val_accuracy == std::vector<double>{0.6, 0.7});
    CHECK(s1.checkpoint == "mock-checkpoint");

    MockTrainer t2({0.7, 0.6, 0.5});
    cfg.epochs = 3;
    const auto s2 = run_finetune(cfg, manifest, t2, 1);
    CHECK(s2.stop_epoch == 3);
    CHECK(s2.best_epoch == 1);
    CHECK(s2.early_stopped);
}

TEST_CASE("run_finetune: invalid config never reaches the trainer") {
    auto cfg = paper_default_config();
    cfg.effective_batch = 99;
    MockTrainer t({0.5});
    CHECK_THROWS_AS(run_finetune(cfg, scratch() / "m.jsonl", t, 1), ContractError);
    CHECK(t.run_count() == 0);
}
