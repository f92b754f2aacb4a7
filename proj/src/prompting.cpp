#include "overlay/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace overlay {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

PromptTemplate load_template(const std::filesystem::path& templates_dir,
                             const std::string& name) {
    const auto path = templates_dir / (name + ".txt");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string raw = buf.str();

    PromptTemplate t;
    t.name = name;
    // {name!} marks a required placeholder; the '!' is stripped from the body
    std::string body;
    for (size_t i = 0; i < raw.size();) {
        if (raw[i] == '{') {
            size_t j = i + 1;
            while (j < raw.size() && is_name_char(raw[j])) ++j;
            if (j > i + 1 && j < raw.size() && (raw[j] == '}' || raw[j] == '!')) {
                const std::string pname = raw.substr(i + 1, j - i - 1);
                if (raw[j] == '!' && j + 1 < raw.size() && raw[j + 1] == '}') {
                    t.required_placeholders.insert(pname);
                    body += "{" + pname + "}";
                    i = j + 2;
                    continue;
                }
                if (raw[j] == '}') {
                    body += "{" + pname + "}";
                    i = j + 1;
                    continue;
                }
            }
        }
        body += raw[i];
        ++i;
    }
    t.body = body;
    return t;
}

std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings) {
    for (const auto& req : tmpl.required_placeholders)
        if (!bindings.count(req))
            throw RenderError("missing required binding \"" + req + "\" for template \"" +
                              tmpl.name + "\"");
    std::string out;
    const std::string& body = tmpl.body;
    for (size_t i = 0; i < body.size();) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && is_name_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                const std::string pname = body.substr(i + 1, j - i - 1);
                auto it = bindings.find(pname);
                if (it != bindings.end()) out += it->second;
                // unbound optional placeholders render empty
                i = j + 1;
                continue;
            }
        }
        out += body[i];
        ++i;
    }
    return out;
}

std::pair<BinaryLabel, std::vector<std::string>> parse_verdict(
    const std::string& text) {
    std::optional<BinaryLabel> label;
    std::vector<std::string> overlays;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        const std::string lt = lower(t);
        const size_t answer_at = label ? std::string::npos : lt.find("answer:");
        const size_t overlay_at = lt.find("overlay:");
        if (answer_at != std::string::npos) {
            std::string rest = trim(t.substr(answer_at + 7));
            std::string word;
            for (char c : rest) {
                if (std::isalpha(static_cast<unsigned char>(c)))
                    word += static_cast<char>(std::tolower(c));
                else
                    break;
            }
            if (word == "yes")
                label = BinaryLabel::positive;
            else if (word == "no")
                label = BinaryLabel::negative;
            else
                throw VerdictError("ANSWER token is neither yes nor no", text);
        }
        if (overlay_at != std::string::npos) {
            const size_t lb = t.find('[', overlay_at);
            const size_t rb = t.rfind(']');
            if (lb == std::string::npos || rb == std::string::npos || rb < lb) continue;
            std::string inner = t.substr(lb + 1, rb - lb - 1);
            std::string item;
            bool in_quote = false;
            char quote = 0;
            for (char c : inner) {
                if (in_quote) {
                    if (c == quote)
                        in_quote = false;
                    else
                        item += c;
                } else if (c == '\'' || c == '"') {
                    in_quote = true;
                    quote = c;
                } else if (c == ',') {
                    if (const std::string s = trim(item); !s.empty()) overlays.push_back(s);
                    item.clear();
                } else {
                    item += c;
                }
            }
            if (const std::string s = trim(item); !s.empty()) overlays.push_back(s);
        }
    }
    if (!label) throw VerdictError("no ANSWER line found in model output", text);
    return {*label, std::move(overlays)};
}

// ---------------------------------------------------------------------------
// Extraction block
// ---------------------------------------------------------------------------

std::string serialize_extraction(const ExtractionResult& e) {
    std::ostringstream out;
    out << "OBJECTS:\n";
    for (size_t i = 0; i < e.objects.size(); ++i)
        out << (i + 1) << ". " << e.objects[i] << "\n";
    out << "TEXTS:\n";
    for (size_t i = 0; i < e.texts.size(); ++i) {
        out << (i + 1) << ". \"" << e.texts[i].literal << "\"";
        if (e.texts[i].carrier) out << " (object " << (*e.texts[i].carrier + 1) << ")";
        out << "\n";
    }
    out << "RELATIONS:\n";
    for (size_t i = 0; i < e.relations.size(); ++i)
        out << (i + 1) << ". text " << (e.relations[i].text_index + 1) << " -> object "
            << (e.relations[i].object_index + 1) << ": " << e.relations[i].phrase
            << "\n";
    return out.str();
}

ExtractionResult parse_extraction(const std::string& text,
                                  const std::string& image_id) {
    ExtractionResult e;
    e.image_id = image_id;

    enum class Section { none, objects, texts, relations };
    Section section = Section::none;
    bool any_header = false;

    static const std::regex item_re(R"(^\s*\d+\.\s*(.*?)\s*$)");
    static const std::regex text_re(R"rx(^"(.*)"(?:\s*\(object\s+(\d+)\))?$)rx");
    static const std::regex rel_re(R"(^text\s+(\d+)\s*->\s*object\s+(\d+)\s*:\s*(.*)$)",
                                   std::regex::icase);

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        const std::string lt = lower(t);
        if (lt == "objects:") { section = Section::objects; any_header = true; continue; }
        if (lt == "texts:") { section = Section::texts; any_header = true; continue; }
        if (lt == "relations:") { section = Section::relations; any_header = true; continue; }
        if (section == Section::none || t.empty()) continue;

        std::smatch m;
        if (!std::regex_match(t, m, item_re)) continue;  // surrounding prose
        const std::string item = m[1];
        switch (section) {
            case Section::objects:
                e.objects.push_back(item);
                break;
            case Section::texts: {
                std::smatch tm;
                if (std::regex_match(item, tm, text_re)) {
                    TextEntity ent;
                    ent.literal = tm[1];
                    if (tm[2].matched) ent.carrier = std::stoi(tm[2]) - 1;
                    e.texts.push_back(std::move(ent));
                } else {
                    // unquoted fallback: take the whole item as the literal
                    e.texts.push_back({item, std::nullopt});
                    e.malformed = true;
                }
                break;
            }
            case Section::relations: {
                std::smatch rm;
                if (std::regex_match(item, rm, rel_re)) {
                    Relation r;
                    r.text_index = std::stoi(rm[1]) - 1;
                    r.object_index = std::stoi(rm[2]) - 1;
                    r.phrase = rm[3];
                    e.relations.push_back(std::move(r));
                } else {
                    e.malformed = true;
                }
                break;
            }
            case Section::none:
                break;
        }
    }

    if (!any_header) {
        e.objects.clear();
        e.texts.clear();
        e.relations.clear();
        e.malformed = true;
        return e;
    }

    // item-wise index validation
    for (auto& te : e.texts) {
        if (te.carrier && (*te.carrier < 0 ||
                           *te.carrier >= static_cast<int>(e.objects.size()))) {
            te.carrier.reset();
            e.malformed = true;
        }
    }
    std::vector<Relation> kept;
    for (auto& r : e.relations) {
        if (r.text_index >= 0 && r.text_index < static_cast<int>(e.texts.size()) &&
            r.object_index >= 0 && r.object_index < static_cast<int>(e.objects.size())) {
            kept.push_back(std::move(r));
        } else {
            e.malformed = true;
        }
    }
    e.relations = std::move(kept);
    return e;
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

namespace {

VlmRequest make_request(const std::vector<uint8_t>& image,
                        const std::string& image_id, std::string prompt) {
    VlmRequest req;
    req.image = image;
    req.prompt = std::move(prompt);
    req.request_id = image_id;
    return req;
}

}  // namespace

OverlayVerdict detect_zero_shot(const std::vector<uint8_t>& image,
                                const std::string& image_id, VlmClient& client,
                                const PromptTemplate& tmpl) {
    const VlmResponse resp = client.complete(make_request(image, image_id, render(tmpl, {})));
    auto [label, overlays] = parse_verdict(resp.text);
    OverlayVerdict v;
    v.label = label;
    v.overlay_texts = std::move(overlays);
    v.evidence = resp.text;
    v.strategy = Strategy::zero_shot;
    return v;
}

ExtractionResult extract_scene(const std::vector<uint8_t>& image,
                               const std::string& image_id, VlmClient& client,
                               const PromptTemplate& tmpl) {
    const VlmResponse resp = client.complete(make_request(image, image_id, render(tmpl, {})));
    return parse_extraction(resp.text, image_id);
}

std::pair<OverlayVerdict, ExtractionResult> detect_sequential(
    const std::vector<uint8_t>& image, const std::string& image_id,
    VlmClient& client, const PromptTemplate& stage1, const PromptTemplate& stage2) {
    ExtractionResult extraction = extract_scene(image, image_id, client, stage1);

    const std::string block = serialize_extraction(extraction);
    std::map<std::string, std::string> bindings;
    bindings["extraction"] = block;
    // second request carries the same image bytes
    const VlmResponse resp =
        client.complete(make_request(image, image_id, render(stage2, bindings)));
    auto [label, overlays] = parse_verdict(resp.text);

    OverlayVerdict v;
    v.label = label;
    v.overlay_texts = std::move(overlays);
    v.evidence = resp.text;
    v.strategy = Strategy::sequential;
    return {std::move(v), std::move(extraction)};
}

}  // namespace overlay
