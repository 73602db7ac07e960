#include "crysflow/tags.hpp"

#include <array>
#include <cctype>

#include "crysflow/kvconfig.hpp"

namespace crysflow {

namespace {

struct TagSpec {
    std::string_view name;
    SegmentKind kind;
};

constexpr std::array<TagSpec, 3> kTags = {{{"think", SegmentKind::Think},
                                           {"tool_call", SegmentKind::ToolCall},
                                           {"answer", SegmentKind::Answer}}};

std::string open_of(std::string_view name) { return "<" + std::string(name) + ">"; }
std::string close_of(std::string_view name) { return "</" + std::string(name) + ">"; }

bool blank(std::string_view s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace

ParsedOutput parse_model_output(std::string_view text) {
    ParsedOutput out;
    std::size_t pos = 0;
    std::size_t prose_start = 0;

    auto push = [&](SegmentKind kind, std::string body, std::size_t begin, std::size_t end) {
        TaggedSegment seg;
        seg.kind = kind;
        seg.text = std::move(body);
        seg.position = out.segments.size();
        seg.begin = begin;
        seg.end = end;
        out.segments.push_back(std::move(seg));
    };
    auto flush_prose = [&](std::size_t upto) {
        if (upto > prose_start && !blank(text.substr(prose_start, upto - prose_start)))
            push(SegmentKind::Prose, trim(text.substr(prose_start, upto - prose_start)), prose_start, upto);
    };

    while (pos < text.size()) {
        const std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) break;
        const TagSpec* opened = nullptr;
        const TagSpec* closed = nullptr;
        for (const auto& spec : kTags) {
            if (text.substr(lt).starts_with(open_of(spec.name))) opened = &spec;
            if (text.substr(lt).starts_with(close_of(spec.name))) closed = &spec;
        }
        if (closed) {
            out.violations.push_back("unmatched " + close_of(closed->name));
            pos = lt + close_of(closed->name).size();
            continue;
        }
        if (!opened) {
            pos = lt + 1;
            continue;
        }
        const std::string open = open_of(opened->name);
        const std::string close = close_of(opened->name);
        const std::size_t body_start = lt + open.size();
        const std::size_t close_at = text.find(close, body_start);
        if (close_at == std::string_view::npos) {
            out.violations.push_back("unclosed " + open);
            break;  // remainder is prose
        }
        bool nested = false;
        for (const auto& spec : kTags) {
            const std::size_t inner = text.find(open_of(spec.name), body_start);
            if (inner != std::string_view::npos && inner < close_at) nested = true;
        }
        const std::size_t end = close_at + close.size();
        flush_prose(lt);
        if (nested) {
            out.violations.push_back("nested tag inside " + open);
            push(SegmentKind::Prose, trim(text.substr(lt, end - lt)), lt, end);
        } else {
            push(opened->kind, trim(text.substr(body_start, close_at - body_start)), lt, end);
        }
        pos = end;
        prose_start = end;
    }
    flush_prose(text.size());
    return out;
}

std::optional<ParsedCall> parse_tool_call(std::string_view body, std::string* error) {
    auto fail = [&](std::string why) -> std::optional<ParsedCall> {
        if (error) *error = std::move(why);
        return std::nullopt;
    };
    json j = json::parse(body.begin(), body.end(), nullptr, false);
    if (j.is_discarded()) return fail("tool_call body is not valid JSON");
    if (!j.is_object()) return fail("tool_call body must be a JSON object");
    if (!j.contains("name") || !j["name"].is_string()) return fail("tool_call needs a string 'name'");
    ParsedCall call;
    call.name = j["name"].get<std::string>();
    if (j.contains("arguments")) {
        if (!j["arguments"].is_object()) return fail("tool_call 'arguments' must be an object");
        call.arguments = j["arguments"];
    }
    return call;
}

std::optional<std::string> extract_tag(std::string_view text, std::string_view tag) {
    const std::string open = open_of(tag);
    const std::string close = close_of(tag);
    const std::size_t b = text.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    const std::size_t e = text.find(close, b + open.size());
    if (e == std::string_view::npos) return std::nullopt;
    return trim(text.substr(b + open.size(), e - b - open.size()));
}

}  // namespace crysflow
