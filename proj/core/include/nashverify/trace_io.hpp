#pragma once

#include "nashverify/orchestrator.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace nashverify {

/// Stable-order JSON document for one trace, newline terminated. Identical
/// traces always serialize to identical bytes.
std::string trace_to_json(const TraceRecord& trace);

/// Inverse of trace_to_json. Throws FixtureError on malformed documents.
TraceRecord trace_from_json(std::string_view document);

/// File name used for a trace: the instance id with path-unsafe characters
/// replaced, plus ".trace.json".
std::string trace_file_name(std::string_view instance_id);

/// Writes trace_to_json into `directory`; returns the file path.
std::filesystem::path write_trace(const TraceRecord& trace, const std::filesystem::path& directory);

}  // namespace nashverify
