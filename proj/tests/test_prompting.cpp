#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "overlay/prompting.hpp"

using namespace overlay;

namespace {

PromptTemplate tmpl(const std::string& name, const std::string& body,
                    std::set<std::string> required = {}) {
    return {name, body, std::move(required)};
}

std::vector<uint8_t> image_bytes() { return {9, 8, 7, 6}; }

MockVlmClient scripted(std::vector<ScriptRule> rules, ScriptRule fallback = {
                           .response = "ANSWER: no."}) {
    ScriptedBehavior b;
    b.rules = std::move(rules);
    b.fallback = std::move(fallback);
    return MockVlmClient(std::move(b));
}

// generator for the round-trip property: safe alphabet, no quotes/newlines
std::string rand_string(std::mt19937_64& rng, size_t max_len) {
    static const std::string alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 -";
    const size_t len = 1 + rng() % max_len;
    std::string s;
    for (size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    if (s.front() == ' ') s.front() = 'x';
    if (s.back() == ' ') s.back() = 'x';
    return s;
}

ExtractionResult rand_extraction(std::mt19937_64& rng) {
    ExtractionResult e;
    e.image_id = "img";
    const int n = static_cast<int>(rng() % 5);
    const int m = static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) e.objects.push_back(rand_string(rng, 12));
    for (int i = 0; i < m; ++i) {
        TextEntity t;
        t.literal = rand_string(rng, 10);
        if (n > 0 && rng() % 2) t.carrier = static_cast<int>(rng() % n);
        e.texts.push_back(std::move(t));
    }
    if (n > 0 && m > 0) {
        const int nr = static_cast<int>(rng() % 4);
        for (int i = 0; i < nr; ++i)
            e.relations.push_back({static_cast<int>(rng() % m),
                                   static_cast<int>(rng() % n),
                                   rand_string(rng, 8)});
    }
    return e;
}

}  // namespace

TEST_CASE("render: substitution, missing required, extra bindings ignored") {
    const auto t = tmpl("t", "List objects in {image_hint}.", {"image_hint"});
    CHECK(render(t, {{"image_hint", "the frame"}}) == "List objects in the frame.");
    CHECK_THROWS_WITH_AS(render(t, {}), doctest::Contains("image_hint"), RenderError);
    CHECK(render(t, {{"image_hint", "x"}, {"unused", "y"}}) == "List objects in x.");
    // unbound optional placeholders render empty
    const auto opt = tmpl("o", "a{maybe}b");
    CHECK(render(opt, {}) == "ab");
}

TEST_CASE("parse_verdict: rule application") {
    auto [l1, o1] = parse_verdict(
        "I examined the image. ANSWER: Yes. OVERLAY: ['50% OFF','TODAY']");
    CHECK(l1 == BinaryLabel::positive);
    CHECK(o1 == std::vector<std::string>{"50% OFF", "TODAY"});

    auto [l2, o2] = parse_verdict("ANSWER: no");
    CHECK(l2 == BinaryLabel::negative);
    CHECK(o2.empty());

    CHECK_THROWS_AS(parse_verdict("The text seems overlaid."), VerdictError);
    CHECK_THROWS_AS(parse_verdict("ANSWER: maybe"), VerdictError);
    CHECK_THROWS_AS(parse_verdict(""), VerdictError);

    // case-insensitive marker, empty list, rationale tolerated
    auto [l3, o3] = parse_verdict("answer: YES\noverlay: []\nbecause reasons");
    CHECK(l3 == BinaryLabel::positive);
    CHECK(o3.empty());
}

TEST_CASE("parse_verdict: error carries the raw text") {
    try {
        parse_verdict("free prose");
        FAIL("expected VerdictError");
    } catch (const VerdictError& e) {
        CHECK(e.raw == "free prose");
    }
}

TEST_CASE("extraction: serialize then parse restores the result") {
    ExtractionResult e;
    e.image_id = "img";
    e.objects = {"television", "wall"};
    e.texts = {{"NETFLIX", 0}};
    e.relations = {{0, 0, "displayed on"}};
    const auto back = parse_extraction(serialize_extraction(e), "img");
    CHECK(back == e);
    CHECK_FALSE(back.malformed);
    CHECK(back.object_count() == 2);
    CHECK(back.text_count() == 1);
    CHECK(back.relation_count() == 1);
}

TEST_CASE("extraction: 500 random round-trips, cardinalities hold") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 500; ++trial) {
        const ExtractionResult e = rand_extraction(rng);
        const std::string block =
            "Some preamble prose.\n" + serialize_extraction(e) + "Trailing remark.\n";
        const ExtractionResult back = parse_extraction(block, "img");
        CHECK(back == e);
        CHECK_FALSE(back.malformed);
        CHECK(back.object_count() == back.objects.size());
        CHECK(back.text_count() == back.texts.size());
        CHECK(back.relation_count() == back.relations.size());
    }
}

TEST_CASE("extraction: out-of-range relation dropped item-wise") {
    const std::string block =
        "OBJECTS:\n1. sign\nTEXTS:\n1. \"STOP\"\nRELATIONS:\n"
        "1. text 1 -> object 1: painted on\n"
        "2. text 1 -> object 5: floating above\n";
    const auto e = parse_extraction(block, "img");
    CHECK(e.malformed);
    REQUIRE(e.relations.size() == 1);
    CHECK(e.relations[0].phrase == "painted on");
}

TEST_CASE("extraction: absent block and empty text degrade, never throw") {
    const auto e1 = parse_extraction("no structure here at all", "img");
    CHECK(e1.malformed);
    CHECK(e1.objects.empty());
    CHECK(e1.texts.empty());
    CHECK(e1.relations.empty());

    const auto e2 = parse_extraction("", "img");
    CHECK(e2.malformed);
    CHECK(e2.texts.empty());
}

TEST_CASE("extraction: out-of-range carrier cleared") {
    const std::string block = "OBJECTS:\n1. sign\nTEXTS:\n1. \"HI\" (object 3)\nRELATIONS:\n";
    const auto e = parse_extraction(block, "img");
    CHECK(e.malformed);
    REQUIRE(e.texts.size() == 1);
    CHECK_FALSE(e.texts[0].carrier.has_value());
}

TEST_CASE("detect_zero_shot: scripted answers") {
    auto client = scripted({{.prompt_contains = std::string("artificial"),
                             .response = "ANSWER: yes. OVERLAY: ['SALE 50%']"}});
    const auto t = tmpl("zs", "Is there artificial overlaid text?");
    const auto v = detect_zero_shot(image_bytes(), "img1", client, t);
    CHECK(v.label == BinaryLabel::positive);
    CHECK(v.overlay_texts == std::vector<std::string>{"SALE 50%"});
    CHECK(v.strategy == Strategy::zero_shot);
    CHECK(v.confidence == 1.0);

    auto client2 = scripted({}, {.response = "ANSWER: no."});
    const auto v2 = detect_zero_shot(image_bytes(), "img1", client2, t);
    CHECK(v2.label == BinaryLabel::negative);
    CHECK(v2.overlay_texts.empty());

    auto client3 = scripted({}, {.response = "free prose with no marker"});
    CHECK_THROWS_AS(detect_zero_shot(image_bytes(), "img1", client3, t), VerdictError);
}

TEST_CASE("detect_sequential: NETFLIX-style scene yields a negative verdict") {
    ExtractionResult scene;
    scene.objects = {"television screen"};
    scene.texts = {{"NETFLIX", 0}};
    scene.relations = {{0, 0, "displayed on television screen"}};

    auto client = scripted(
        {{.prompt_contains = std::string("Identify all text"),
          .response = "Sure.\n" + serialize_extraction(scene)},
         {.prompt_contains = std::string("decide"), .response = "ANSWER: no."}});

    const auto stage1 = tmpl("s1", "Identify all text and objects.");
    const auto stage2 = tmpl("s2", "Given {extraction} decide.", {"extraction"});
    const auto [verdict, extraction] =
        detect_sequential(image_bytes(), "img1", client, stage1, stage2);
    CHECK(verdict.label == BinaryLabel::negative);
    CHECK(verdict.strategy == Strategy::sequential);
    CHECK(extraction == parse_extraction(serialize_extraction(scene), "img1"));
    CHECK(client.request_count() == 2);  // exactly two requests on success
}

TEST_CASE("detect_sequential: malformed stage 1 proceeds to stage 2") {
    auto client = scripted(
        {{.prompt_contains = std::string("Identify"), .response = "gibberish"},
         {.prompt_contains = std::string("decide"),
          .response = "ANSWER: yes. OVERLAY: ['BUY NOW']"}});
    const auto stage1 = tmpl("s1", "Identify all text.");
    const auto stage2 = tmpl("s2", "Given {extraction} decide.", {"extraction"});
    const auto [verdict, extraction] =
        detect_sequential(image_bytes(), "img1", client, stage1, stage2);
    CHECK(verdict.label == BinaryLabel::positive);
    CHECK(extraction.malformed);
    CHECK(extraction.objects.empty());
    CHECK(client.request_count() == 2);
}

TEST_CASE("detect_sequential: stage-1 transport failure aborts the chain") {
    auto client = scripted({{.prompt_contains = std::string("Identify"),
                             .error = std::string("timeout")}},
                           {.response = "ANSWER: yes."});
    const auto stage1 = tmpl("s1", "Identify all text.");
    const auto stage2 = tmpl("s2", "Given {extraction} decide.", {"extraction"});
    CHECK_THROWS_AS(
        detect_sequential(image_bytes(), "img1", client, stage1, stage2),
        TransportError);
    CHECK(client.request_count() == 1);  // no stage-2 request issued
}

TEST_CASE("detect_sequential: both stages carry byte-identical image payloads") {
    ExtractionResult scene;
    scene.objects = {"poster"};
    auto client = scripted(
        {{.prompt_contains = std::string("Identify"),
          .response = serialize_extraction(scene)},
         {.prompt_contains = std::string("decide"), .response = "ANSWER: no."}});
    std::vector<std::vector<uint8_t>> seen;
    client.set_observer([&seen](const VlmRequest& req, const VlmResponse&) {
        seen.push_back(req.image);
    });
    const auto stage1 = tmpl("s1", "Identify all text.");
    const auto stage2 = tmpl("s2", "Given {extraction} decide.", {"extraction"});
    detect_sequential(image_bytes(), "img1", client, stage1, stage2);
    REQUIRE(seen.size() == 2);
    CHECK(seen[0] == seen[1]);
    CHECK(seen[0] == image_bytes());
}

TEST_CASE("load_template: required markers and file loading") {
    const auto dir = std::filesystem::temp_directory_path() / "overlay_test_tmpl";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "demo.txt");
        out << "Context: {extraction!}\nHint: {hint}\n";
    }
    const auto t = load_template(dir, "demo");
    CHECK(t.required_placeholders == std::set<std::string>{"extraction"});
    CHECK(render(t, {{"extraction", "X"}}) == "Context: X\nHint: \n");
    CHECK_THROWS_AS(load_template(dir, "missing"), IoError);
}

TEST_CASE("repo default templates parse and render") {
    const std::filesystem::path repo_templates = TEMPLATES_DIR;
    const auto zs = load_template(repo_templates, "zero_shot");
    CHECK(render(zs, {}).find("ANSWER") != std::string::npos);
    const auto s1 = load_template(repo_templates, "stage1_extract");
    CHECK(render(s1, {}).find("OBJECTS:") != std::string::npos);
    const auto s2 = load_template(repo_templates, "stage2_verdict");
    CHECK_THROWS_AS(render(s2, {}), RenderError);  // extraction is required
    CHECK(render(s2, {{"extraction", "BLOCK"}}).find("BLOCK") != std::string::npos);
}
