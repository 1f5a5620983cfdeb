#include "halueval/repair.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <nlohmann/json.hpp>

#include "halueval/gateway.hpp"
#include "halueval/prompts.hpp"

namespace halueval::repair {

using nlohmann::json;

std::string to_string(RepairMethod m) {
    switch (m) {
        case RepairMethod::strict: return "strict";
        case RepairMethod::syntactic: return "syntactic";
        case RepairMethod::typed_extraction: return "typed_extraction";
        case RepairMethod::prose_extraction: return "prose_extraction";
        case RepairMethod::needs_llm: return "needs_llm";
    }
    return "needs_llm";
}

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// ---- syntactic repair: tokenize, then re-emit with fixes ----

struct Token {
    enum class Type { LBrace, RBrace, LBracket, RBracket, Colon, Comma, String, Number, Literal, Bare };
    Type type;
    std::string text;  // strings hold unquoted raw content
};

bool is_structural(char c) {
    return c == '{' || c == '}' || c == '[' || c == ']' || c == ':' || c == ',' || c == '"';
}

std::vector<Token> lex(std::string_view text) {
    std::vector<Token> tokens;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        switch (c) {
            case '{': tokens.push_back({Token::Type::LBrace, "{"}); ++i; continue;
            case '}': tokens.push_back({Token::Type::RBrace, "}"}); ++i; continue;
            case '[': tokens.push_back({Token::Type::LBracket, "["}); ++i; continue;
            case ']': tokens.push_back({Token::Type::RBracket, "]"}); ++i; continue;
            case ':': tokens.push_back({Token::Type::Colon, ":"}); ++i; continue;
            case ',': tokens.push_back({Token::Type::Comma, ","}); ++i; continue;
            default: break;
        }
        if (c == '"') {
            std::string content;
            ++i;
            bool closed = false;
            while (i < text.size()) {
                char d = text[i];
                if (d == '\\' && i + 1 < text.size()) {
                    content += d;
                    content += text[i + 1];
                    i += 2;
                    continue;
                }
                if (d == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                content += d;
                ++i;
            }
            (void)closed;  // unterminated strings are closed implicitly
            tokens.push_back({Token::Type::String, std::move(content)});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i + 1 < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            size_t j = i + 1;
            while (j < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.' ||
                    text[j] == 'e' || text[j] == 'E' || text[j] == '+' || text[j] == '-'))
                ++j;
            tokens.push_back({Token::Type::Number, std::string(text.substr(i, j - i))});
            i = j;
            continue;
        }
        // bare run up to the next structural character; internal spaces kept
        size_t j = i;
        while (j < text.size() && !is_structural(text[j]) && text[j] != '\n') ++j;
        std::string word = trim(text.substr(i, j - i));
        i = j;
        if (word.empty()) continue;
        if (word == "true" || word == "false" || word == "null")
            tokens.push_back({Token::Type::Literal, std::move(word)});
        else
            tokens.push_back({Token::Type::Bare, std::move(word)});
    }
    return tokens;
}

bool is_value_start(Token::Type t) {
    return t == Token::Type::String || t == Token::Type::Number || t == Token::Type::Literal ||
           t == Token::Type::Bare || t == Token::Type::LBrace || t == Token::Type::LBracket;
}

std::string quote(const std::string& raw) {
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

// container state while re-emitting
struct Frame {
    bool is_array;
    // arrays: expect value (true) or comma/close (false)
    // objects: 0=expect key, 1=expect colon, 2=expect value, 3=expect comma/close
    int state;
};

class Emitter {
public:
    void value_token(const Token& t) {
        switch (t.type) {
            case Token::Type::String: append(quote_raw(t.text)); break;
            case Token::Type::Bare: append(quote(t.text)); break;
            default: append(t.text); break;
        }
    }
    void punct(const std::string& s) { append(s); }
    void drop_trailing_comma() {
        // out_ ends with ", " or ","
        if (out_.size() >= 2 && out_.compare(out_.size() - 2, 2, ", ") == 0)
            out_.resize(out_.size() - 2);
        else if (!out_.empty() && out_.back() == ',')
            out_.pop_back();
    }
    bool ends_with_comma() const {
        if (out_.size() >= 2 && out_.compare(out_.size() - 2, 2, ", ") == 0) return true;
        return !out_.empty() && out_.back() == ',';
    }
    const std::string& str() const { return out_; }

private:
    static std::string quote_raw(const std::string& content) { return "\"" + content + "\""; }
    void append(const std::string& s) { out_ += s; }
    std::string out_;
};

std::string rebuild(const std::vector<Token>& tokens) {
    Emitter out;
    std::vector<Frame> stack;
    size_t i = 0;

    auto open_container = [&](const Token& t) {
        if (t.type == Token::Type::LBrace) {
            out.punct("{");
            stack.push_back({false, 0});
        } else {
            out.punct("[");
            stack.push_back({true, 1});  // state 1 = expect value
        }
    };

    auto close_container = [&](bool array) {
        if (out.ends_with_comma()) out.drop_trailing_comma();
        out.punct(array ? "]" : "}");
        stack.pop_back();
        if (!stack.empty()) {
            // the closed container was a value in its parent
            if (stack.back().is_array)
                stack.back().state = 0;  // expect comma/close
            else
                stack.back().state = 3;
        }
    };

    // leading value token outside any container: single top-level value
    while (i < tokens.size()) {
        const Token& t = tokens[i];
        if (stack.empty()) {
            if (t.type == Token::Type::LBrace || t.type == Token::Type::LBracket) {
                open_container(t);
                ++i;
                continue;
            }
            // a complete top-level value already emitted: ignore trailing junk
            if (!out.str().empty()) break;
            if (is_value_start(t.type)) {
                out.value_token(t);
                ++i;
                continue;
            }
            ++i;  // stray punctuation before any payload
            continue;
        }

        Frame& top = stack.back();
        if (top.is_array) {
            if (top.state == 1) {  // expect value
                if (is_value_start(t.type)) {
                    if (t.type == Token::Type::LBrace || t.type == Token::Type::LBracket) {
                        open_container(t);
                    } else {
                        out.value_token(t);
                        top.state = 0;
                    }
                    ++i;
                } else if (t.type == Token::Type::RBracket) {
                    close_container(true);
                    ++i;
                } else if (t.type == Token::Type::Comma) {
                    ++i;  // duplicate comma
                } else if (t.type == Token::Type::RBrace) {
                    close_container(true);  // wrong closer: close the array
                    ++i;
                } else {
                    ++i;  // stray colon in array
                }
            } else {  // expect comma or close
                if (t.type == Token::Type::Comma) {
                    out.punct(", ");
                    top.state = 1;
                    ++i;
                } else if (t.type == Token::Type::RBracket) {
                    close_container(true);
                    ++i;
                } else if (t.type == Token::Type::RBrace) {
                    close_container(true);
                    ++i;
                } else if (is_value_start(t.type)) {
                    out.punct(", ");  // missing comma between items
                    top.state = 1;
                } else {
                    ++i;
                }
            }
        } else {  // object
            switch (top.state) {
                case 0:  // expect key
                    if (t.type == Token::Type::String || t.type == Token::Type::Bare ||
                        t.type == Token::Type::Literal || t.type == Token::Type::Number) {
                        // keys are always emitted quoted
                        if (t.type == Token::Type::String)
                            out.value_token(t);
                        else
                            out.value_token(Token{Token::Type::Bare, t.text});
                        top.state = 1;
                        ++i;
                    } else if (t.type == Token::Type::RBrace) {
                        close_container(false);
                        ++i;
                    } else if (t.type == Token::Type::Comma) {
                        ++i;
                    } else if (t.type == Token::Type::RBracket) {
                        close_container(false);
                        ++i;
                    } else {
                        ++i;
                    }
                    break;
                case 1:  // expect colon
                    if (t.type == Token::Type::Colon) {
                        out.punct(": ");
                        top.state = 2;
                        ++i;
                    } else {
                        out.punct(": ");  // missing colon
                        top.state = 2;
                    }
                    break;
                case 2:  // expect value
                    if (is_value_start(t.type)) {
                        if (t.type == Token::Type::LBrace || t.type == Token::Type::LBracket) {
                            open_container(t);
                        } else {
                            out.value_token(t);
                            top.state = 3;
                        }
                        ++i;
                    } else if (t.type == Token::Type::RBrace) {
                        out.punct("null");
                        close_container(false);
                        ++i;
                    } else {
                        ++i;
                    }
                    break;
                default:  // expect comma or close
                    if (t.type == Token::Type::Comma) {
                        out.punct(", ");
                        top.state = 0;
                        ++i;
                    } else if (t.type == Token::Type::RBrace) {
                        close_container(false);
                        ++i;
                    } else if (t.type == Token::Type::RBracket) {
                        close_container(false);
                        ++i;
                    } else if (t.type == Token::Type::String || t.type == Token::Type::Bare) {
                        out.punct(", ");  // missing comma between members
                        top.state = 0;
                    } else {
                        ++i;
                    }
                    break;
            }
        }
    }

    // close whatever is still open at end of input
    while (!stack.empty()) {
        Frame top = stack.back();
        if (!top.is_array && top.state == 1) out.punct(": null");
        if (!top.is_array && top.state == 2) out.punct("null");
        if (top.is_array && out.ends_with_comma()) out.drop_trailing_comma();
        close_container(top.is_array);
    }
    return out.str();
}

std::string strip_fences(std::string_view text) {
    auto open = text.find("```");
    if (open == std::string_view::npos) return std::string(text);
    auto body_start = text.find('\n', open);
    if (body_start == std::string_view::npos) return std::string(text);
    auto close = text.find("```", body_start);
    if (close == std::string_view::npos) return std::string(text.substr(body_start + 1));
    return std::string(text.substr(body_start + 1, close - body_start - 1));
}

std::optional<DetectorVerdict> verdict_from_array(const json& arr, bool strict_strings,
                                                  std::vector<std::string>* trace) {
    DetectorVerdict v;
    for (const auto& item : arr) {
        if (item.is_string()) {
            auto s = item.get<std::string>();
            if (!s.empty()) v.spans.push_back(std::move(s));
            continue;
        }
        if (strict_strings) return std::nullopt;
        if (item.is_object() && item.contains("span") && item.at("span").is_string()) {
            auto s = item.at("span").get<std::string>();
            if (!s.empty()) v.spans.push_back(std::move(s));
        } else if (trace) {
            trace->push_back("dropped item without span: " + item.dump());
        }
    }
    return v;
}

std::string strip_item(std::string item) {
    item = trim(item);
    // leading bullet / list markers
    static const std::regex marker(R"(^(?:[-*]\s+|\d{1,3}[.)]\s+))");
    item = std::regex_replace(item, marker, "");
    item = trim(item);
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"')
        item = trim(item.substr(1, item.size() - 2));
    return item;
}

}  // namespace

std::optional<DetectorVerdict> parse_strict(std::string_view text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("hallucination_list") || !j.at("hallucination_list").is_array())
        return std::nullopt;
    return verdict_from_array(j.at("hallucination_list"), /*strict_strings=*/true, nullptr);
}

std::string repair_syntactic(std::string_view text) {
    std::string body = strip_fences(text);
    // start at the first JSON-ish opener; keep nothing of the surrounding prose
    auto start = body.find_first_of("{[");
    if (start == std::string::npos) return std::string(text);
    auto rebuilt = rebuild(lex(std::string_view(body).substr(start)));
    return rebuilt.empty() ? std::string(text) : rebuilt;
}

std::optional<DetectorVerdict> extract_typed(std::string_view text,
                                             std::vector<std::string>& trace) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        j = json::parse(repair_syntactic(text), nullptr, false);
        if (j.is_discarded()) return std::nullopt;
    }
    if (j.is_array()) {
        trace.push_back("top-level array treated as hallucination_list");
        return verdict_from_array(j, false, &trace);
    }
    if (j.is_object()) {
        if (j.contains("hallucination_list") && j.at("hallucination_list").is_array())
            return verdict_from_array(j.at("hallucination_list"), false, &trace);
        if (j.size() == 1 && j.begin().value().is_array()) {
            trace.push_back("coerced single key '" + j.begin().key() + "' to hallucination_list");
            return verdict_from_array(j.begin().value(), false, &trace);
        }
    }
    return std::nullopt;
}

std::optional<DetectorVerdict> extract_prose(std::string_view text, const RepairOptions& options,
                                             std::vector<std::string>& trace) {
    std::string lower = to_lower(std::string(text));
    for (const auto& phrase : options.no_hallucination_phrases) {
        if (lower.find(phrase) != std::string::npos) {
            trace.push_back("no-hallucination phrase: '" + phrase + "'");
            return DetectorVerdict{};
        }
    }

    // strip hallucination headers ("Hallucinations:", "I found these hallucinations:")
    bool preamble_seen = false;
    std::string body;
    {
        size_t pos = 0;
        std::string_view sv(text);
        while (pos <= sv.size()) {
            size_t nl = sv.find('\n', pos);
            std::string_view line =
                sv.substr(pos, nl == std::string_view::npos ? sv.size() - pos : nl - pos);
            pos = nl == std::string_view::npos ? sv.size() + 1 : nl + 1;
            std::string t = trim(line);
            std::string tl = to_lower(t);
            if (!t.empty() && tl.find("hallucinat") != std::string::npos) {
                auto colon = t.find(':');
                if (colon != std::string::npos) {
                    preamble_seen = true;
                    auto rest = trim(t.substr(colon + 1));
                    if (!rest.empty()) body += rest + "\n";
                    continue;
                }
            }
            body += t;
            body += "\n";
        }
    }

    auto finish = [&](std::vector<std::string> items,
                      const char* how) -> std::optional<DetectorVerdict> {
        DetectorVerdict v;
        for (auto& it : items) {
            auto s = strip_item(std::move(it));
            if (!s.empty()) v.spans.push_back(std::move(s));
        }
        if (v.spans.empty()) return std::nullopt;
        trace.push_back(how);
        return v;
    };

    // 1. numbered lists: "1. x 2. y" / "1) x 2) y"
    {
        static const std::regex marker(R"((^|\s)(\d{1,3})[.)]\s+)");
        auto begin = std::sregex_iterator(body.begin(), body.end(), marker);
        auto end = std::sregex_iterator();
        std::vector<std::pair<size_t, size_t>> spans;  // (item start, marker start)
        for (auto it = begin; it != end; ++it) {
            size_t marker_start = static_cast<size_t>(it->position(0)) +
                                  it->length(1);  // skip leading ws capture
            size_t item_start = static_cast<size_t>(it->position(0)) + it->length(0);
            spans.emplace_back(item_start, marker_start);
        }
        if (!spans.empty()) {
            std::vector<std::string> items;
            for (size_t k = 0; k < spans.size(); ++k) {
                size_t item_end = (k + 1 < spans.size()) ? spans[k + 1].second : body.size();
                items.push_back(body.substr(spans[k].first, item_end - spans[k].first));
            }
            if (auto v = finish(std::move(items), "numbered list")) return v;
        }
    }

    // 2. bullet lists: •, "- ", "* "
    {
        if (body.find("•") != std::string::npos) {
            std::vector<std::string> items;
            size_t pos = 0;
            const std::string bullet = "•";
            size_t first = body.find(bullet);
            pos = first + bullet.size();
            while (true) {
                size_t next = body.find(bullet, pos);
                if (next == std::string::npos) {
                    items.push_back(body.substr(pos));
                    break;
                }
                items.push_back(body.substr(pos, next - pos));
                pos = next + bullet.size();
            }
            if (auto v = finish(std::move(items), "bullet list")) return v;
        }
        std::vector<std::string> dash_items;
        bool all_marked = true;
        size_t nonempty = 0;
        size_t pos = 0;
        while (pos <= body.size()) {
            size_t nl = body.find('\n', pos);
            std::string line = body.substr(pos, nl == std::string::npos ? body.size() - pos : nl - pos);
            pos = nl == std::string::npos ? body.size() + 1 : nl + 1;
            auto t = trim(line);
            if (t.empty()) continue;
            ++nonempty;
            if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0)
                dash_items.push_back(t);
            else
                all_marked = false;
        }
        if (all_marked && !dash_items.empty()) {
            if (auto v = finish(std::move(dash_items), "bullet list")) return v;
        }
    }

    // 3/4. line-separated items (after a header, one line suffices)
    {
        std::vector<std::string> lines;
        size_t pos = 0;
        while (pos <= body.size()) {
            size_t nl = body.find('\n', pos);
            std::string line = body.substr(pos, nl == std::string::npos ? body.size() - pos : nl - pos);
            pos = nl == std::string::npos ? body.size() + 1 : nl + 1;
            auto t = trim(line);
            if (!t.empty()) lines.push_back(std::move(t));
        }
        if ((preamble_seen && !lines.empty()) || lines.size() >= 2) {
            if (auto v = finish(std::move(lines), "line-separated items")) return v;
        }
    }
    return std::nullopt;
}

RepairOutcome repair(std::string_view text, const RepairOptions& options) {
    RepairOutcome outcome;
    if (auto v = parse_strict(text)) {
        outcome.verdict = std::move(v);
        outcome.method = RepairMethod::strict;
        return outcome;
    }
    auto fixed = repair_syntactic(text);
    if (fixed != text) {
        if (auto v = parse_strict(fixed)) {
            outcome.verdict = std::move(v);
            outcome.method = RepairMethod::syntactic;
            outcome.trace.push_back("syntactic rewrite applied");
            return outcome;
        }
    }
    if (auto v = extract_typed(text, outcome.trace)) {
        outcome.verdict = std::move(v);
        outcome.method = RepairMethod::typed_extraction;
        return outcome;
    }
    if (auto v = extract_prose(text, options, outcome.trace)) {
        outcome.verdict = std::move(v);
        outcome.method = RepairMethod::prose_extraction;
        return outcome;
    }
    outcome.verdict.reset();
    outcome.method = RepairMethod::needs_llm;
    outcome.trace.push_back("all deterministic stages failed");
    return outcome;
}

std::variant<DetectorVerdict, UnrepairableOutput> repair_with_llm(std::string_view text,
                                                                  gateway::Gateway& gw,
                                                                  const std::string& model) {
    auto prompt = prompts::render_json_fix(std::string(text));
    gateway::ChatRequest req;
    req.model = model;
    req.temperature = 0.0;
    req.messages.push_back({gateway::ChatMessage::Role::user, prompt.user});
    auto result = gw.complete(req);
    if (!result.ok())
        return UnrepairableOutput{"gateway failure: " + gateway::to_string(result.error->kind),
                                  ""};
    auto reply = result.response->content;
    if (auto v = parse_strict(reply)) return *v;
    return UnrepairableOutput{"reply still unparseable", reply};
}

std::string serialize(const DetectorVerdict& verdict) {
    std::string out = "{\"hallucination_list\": [";
    for (size_t i = 0; i < verdict.spans.size(); ++i) {
        if (i) out += ", ";
        out += json(verdict.spans[i]).dump();
    }
    out += "]}";
    return out;
}

}  // namespace halueval::repair
