#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crysflow/trajectory.hpp"

namespace crysflow {

struct ParsedOutput {
    std::vector<TaggedSegment> segments;
    std::vector<std::string> violations;
};

/// Splits model text into <think>, <tool_call> and <answer> segments plus the
/// prose between them. Total: unclosed, nested or stray tags become prose and
/// a violation entry; nothing throws.
ParsedOutput parse_model_output(std::string_view text);

struct ParsedCall {
    std::string name;
    json arguments = json::object();
};

/// Parses a tool_call body of the form {"name": ..., "arguments": {...}}.
/// Returns nullopt (with `error` filled) when the body is malformed.
std::optional<ParsedCall> parse_tool_call(std::string_view body, std::string* error = nullptr);

/// Body of the first <tag>...</tag>, trimmed.
std::optional<std::string> extract_tag(std::string_view text, std::string_view tag);

}  // namespace crysflow
