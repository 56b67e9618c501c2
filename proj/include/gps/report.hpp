#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gps/metrics.hpp"

namespace gps {

inline constexpr std::string_view kToolVersion = "gps 0.1.0";

// Everything needed to reproduce a run byte for byte.
struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string config_hash;
  std::string pool_fingerprint;
  std::string split_manifest;  // path relative to the output directory
  std::string map;             // idem; empty when no map was trained
  std::map<std::string, std::string> artifacts;  // relative path -> sha256

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

enum class ReportFormat { Csv, Markdown, Json };

ReportFormat parse_report_format(std::string_view name);

// Columns follow the usual diversity / relevance / quality table order:
// Dist-1 Dist-2 Ent-1 Ent-2 SB1 SB2 B2 R2 MS BS BM25 GR. Absent external
// metrics render as an empty CSV field, JSON null, or "-" in Markdown. One row per report.
std::string render_report(const std::vector<MetricReport>& reports, const RunManifest& manifest, ReportFormat format);

// Writes render_report's output; throws IoError when the path is unwritable.
void emit_report(const std::vector<MetricReport>& reports, const RunManifest& manifest, ReportFormat format,
                 const std::filesystem::path& path);

std::vector<MetricReport> reports_from_csv(std::string_view text);
std::vector<MetricReport> reports_from_json(std::string_view text);

}  // namespace gps
