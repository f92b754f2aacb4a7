#include "overlay/harness.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace overlay {

using ojson = nlohmann::ordered_json;

std::vector<PredictionRecord> evaluate(const Manifest& manifest,
                                       const std::string& strategy_name,
                                       const StrategyFn& strategy,
                                       int parallelism) {
    if (manifest.samples.empty()) throw ContractError("evaluate: empty manifest");
    if (parallelism < 1) throw ContractError("evaluate: parallelism must be >= 1");

    std::vector<PredictionRecord> records(manifest.samples.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= manifest.samples.size()) return;
            const ImageSample& s = manifest.samples[i];
            PredictionRecord& rec = records[i];
            rec.image_id = s.id;
            rec.strategy = strategy_name;
            rec.truth_category = s.category;
            rec.truth_binary = category_to_binary(s.category);
            try {
                rec.verdict = strategy(s);
            } catch (const VerdictError& e) {
                rec.error = std::string("verdict: ") + e.what();
            } catch (const TransportError& e) {
                rec.error = std::string("transport: ") + e.what();
            } catch (const ProtocolError& e) {
                rec.error = std::string("protocol: ") + e.what();
            } catch (const Error& e) {
                rec.error = std::string("error: ") + e.what();
            }
        }
    };
    if (parallelism == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < parallelism; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

MetricReport score(const std::vector<PredictionRecord>& records, ErrorPolicy policy) {
    if (records.empty()) throw ContractError("score: no records");
    std::vector<BinaryLabel> preds, truths;
    for (const auto& r : records) {
        if (r.verdict) {
            preds.push_back(r.verdict->label);
            truths.push_back(r.truth_binary);
        } else if (policy == ErrorPolicy::count_as_negative) {
            // a detector that failed to answer has not flagged the image
            preds.push_back(BinaryLabel::negative);
            truths.push_back(r.truth_binary);
        }
    }
    if (preds.empty())
        throw ContractError("score: nothing to score after excluding errors");
    return summarize(confusion(preds, truths));
}

// ---------------------------------------------------------------------------
// Prediction file
// ---------------------------------------------------------------------------

namespace {

ojson verdict_to_json(const OverlayVerdict& v) {
    ojson j;
    j["label"] = to_string(v.label);
    j["confidence"] = v.confidence;
    j["overlay_texts"] = v.overlay_texts;
    j["evidence"] = v.evidence;
    j["strategy"] = to_string(v.strategy);
    return j;
}

OverlayVerdict verdict_from_json(const ojson& j) {
    OverlayVerdict v;
    v.label = j.at("label").get<std::string>() == "positive" ? BinaryLabel::positive
                                                            : BinaryLabel::negative;
    v.confidence = j.at("confidence").get<double>();
    v.overlay_texts = j.at("overlay_texts").get<std::vector<std::string>>();
    v.evidence = j.at("evidence").get<std::string>();
    v.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    return v;
}

}  // namespace

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& r : records) {
        ojson j;
        j["image_id"] = r.image_id;
        j["strategy"] = r.strategy;
        j["truth_category"] = to_string(r.truth_category);
        j["truth_binary"] = to_string(r.truth_binary);
        if (r.verdict) j["verdict"] = verdict_to_json(*r.verdict);
        if (r.error) j["error"] = *r.error;
        out << j.dump() << "\n";
    }
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictions: " + path.string());
    std::vector<PredictionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const ojson j = ojson::parse(line);
        PredictionRecord r;
        r.image_id = j.at("image_id").get<std::string>();
        r.strategy = j.at("strategy").get<std::string>();
        r.truth_category = category_from_string(j.at("truth_category").get<std::string>());
        r.truth_binary = j.at("truth_binary").get<std::string>() == "positive"
                             ? BinaryLabel::positive
                             : BinaryLabel::negative;
        if (j.contains("verdict")) r.verdict = verdict_from_json(j["verdict"]);
        if (j.contains("error")) r.error = j["error"].get<std::string>();
        records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string fingerprint_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    uint64_t h = 14695981039346656037ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << h;
    return out.str();
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "—";  // em dash for undefined metrics
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << *v;
    return out.str();
}

}  // namespace

std::string render_table(const ComparisonReport& report) {
    if (report.rows.empty()) throw ContractError("render_table: no rows");
    size_t name_w = std::string("Model").size();
    for (const auto& row : report.rows) name_w = std::max(name_w, row.strategy.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_w)) << "Model"
        << " | Precision | Recall | Accuracy\n";
    for (const auto& row : report.rows) {
        out << std::left << std::setw(static_cast<int>(name_w)) << row.strategy << " | "
            << std::right << std::setw(9) << cell(row.metrics.precision) << " | "
            << std::setw(6) << cell(row.metrics.recall) << " | " << std::setw(8)
            << cell(std::optional<double>(row.metrics.accuracy)) << "\n";
    }
    return out.str();
}

void save_report(const ComparisonReport& report, const std::filesystem::path& path) {
    ojson j;
    j["dataset_fingerprint"] = report.dataset_fingerprint;
    j["generated_at"] = report.generated_at;
    j["rows"] = ojson::array();
    for (const auto& row : report.rows) {
        ojson r;
        r["strategy"] = row.strategy;
        if (row.metrics.precision) r["precision"] = *row.metrics.precision;
        if (row.metrics.recall) r["recall"] = *row.metrics.recall;
        r["accuracy"] = row.metrics.accuracy;
        r["n"] = row.metrics.n;
        r["confusion"] = {{"tp", row.metrics.matrix.tp},
                          {"fp", row.metrics.matrix.fp},
                          {"fn", row.metrics.matrix.fn},
                          {"tn", row.metrics.matrix.tn}};
        j["rows"].push_back(std::move(r));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

ComparisonReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path.string());
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid report: ") + e.what());
    }
    ComparisonReport report;
    report.dataset_fingerprint = j.value("dataset_fingerprint", "");
    report.generated_at = j.value("generated_at", "");
    for (const auto& r : j.at("rows")) {
        ComparisonReport::Row row;
        row.strategy = r.at("strategy").get<std::string>();
        if (r.contains("precision")) row.metrics.precision = r["precision"].get<double>();
        if (r.contains("recall")) row.metrics.recall = r["recall"].get<double>();
        row.metrics.accuracy = r.at("accuracy").get<double>();
        row.metrics.n = r.at("n").get<long>();
        const auto& cm = r.at("confusion");
        row.metrics.matrix = {cm.at("tp").get<long>(), cm.at("fp").get<long>(),
                              cm.at("fn").get<long>(), cm.at("tn").get<long>()};
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace overlay
