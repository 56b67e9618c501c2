#include "gps/report.hpp"

#include <cstdio>

#include "gps/error.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gps {

using nlohmann::json;

std::string manifest_to_json(const RunManifest& m) {
  json doc = {{"tool_version", m.tool_version}, {"config_hash", m.config_hash},
              {"pool_fingerprint", m.pool_fingerprint}, {"split_manifest", m.split_manifest},
              {"map", m.map}, {"artifacts", m.artifacts}};
  return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    RunManifest m;
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.pool_fingerprint = doc.at("pool_fingerprint").get<std::string>();
    m.split_manifest = doc.at("split_manifest").get<std::string>();
    m.map = doc.at("map").get<std::string>();
    m.artifacts = doc.at("artifacts").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "json") return ReportFormat::Json;
  throw ArgumentError("unknown report format '" + std::string(name) + "'");
}

namespace {

constexpr const char* kCsvHeader =
    "strategy,dist1,dist2,ent1,ent2,selfbleu1,selfbleu2,bleu2,rouge2,moverscore,bertscore,bm25,gruen,"
    "instances,unranked,bm25_k1,bm25_b,pool_fingerprint,config_hash";

std::string num(double v) { return detail::format_double(v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string render_csv(const std::vector<MetricReport>& reports) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : reports) {
    out += r.strategy + "," + num(r.dist1) + "," + num(r.dist2) + "," + num(r.ent1) + "," + num(r.ent2) + "," +
           num(r.selfbleu1) + "," + num(r.selfbleu2) + "," + num(r.bleu2) + "," + num(r.rouge2) + "," +
           opt_num(r.moverscore) + "," + opt_num(r.bertscore) + "," + num(r.bm25) + "," + opt_num(r.gruen) + "," +
           std::to_string(r.instances) + "," + std::to_string(r.unranked) + "," + num(r.bm25_k1) + "," +
           num(r.bm25_b) + "," + r.pool_fingerprint + "," + r.config_hash + "\n";
  }
  return out;
}

std::string conventions_line(const MetricReport& r) {
  return "natural log throughout; BLEU zero precisions floored at 1e-9; BLEU-2 and ROUGE-2 are sentence-level "
         "means over instances against the full reference set; ROUGE-2 is bigram F1 (max over references); "
         "BM25 k1=" + num(r.bm25_k1) + " b=" + num(r.bm25_b) + ", idf = ln(1 + (N - df + 0.5) / (df + 0.5))";
}

std::string render_markdown(const std::vector<MetricReport>& reports, const RunManifest& m) {
  const std::string dash = "-";
  auto md_opt = [&](const std::optional<double>& v) { return v ? fixed4(*v) : dash; };
  std::string out = "| Strategy | Dist-1 | Dist-2 | Ent-1 | Ent-2 | SB1 | SB2 | B2 | R2 | MS | BS | BM25 | GR |\n";
  out += "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + r.strategy + " | " + fixed4(r.dist1) + " | " + fixed4(r.dist2) + " | " + fixed4(r.ent1) + " | " +
           fixed4(r.ent2) + " | " + fixed4(r.selfbleu1) + " | " + fixed4(r.selfbleu2) + " | " + fixed4(r.bleu2) +
           " | " + fixed4(r.rouge2) + " | " + md_opt(r.moverscore) + " | " + md_opt(r.bertscore) + " | " +
           fixed4(r.bm25) + " | " + md_opt(r.gruen) + " |\n";
  }
  out += "\n";
  if (!reports.empty()) {
    out += "Instances: " + std::to_string(reports.front().instances) + " (unranked: " +
           std::to_string(reports.front().unranked) + ")\n\n";
    out += "Conventions: " + conventions_line(reports.front()) + ".\n\n";
  }
  out += "Config hash: `" + m.config_hash + "`  \nPool fingerprint: `" + m.pool_fingerprint + "`  \nTool: " +
         m.tool_version + "\n";
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string render_json(const std::vector<MetricReport>& reports, const RunManifest& m) {
  json rows = json::array();
  for (const auto& r : reports) {
    rows.push_back({{"strategy", r.strategy}, {"dist1", r.dist1}, {"dist2", r.dist2}, {"ent1", r.ent1},
                    {"ent2", r.ent2}, {"selfbleu1", r.selfbleu1}, {"selfbleu2", r.selfbleu2}, {"bleu2", r.bleu2},
                    {"rouge2", r.rouge2}, {"moverscore", opt_json(r.moverscore)},
                    {"bertscore", opt_json(r.bertscore)}, {"bm25", r.bm25}, {"gruen", opt_json(r.gruen)},
                    {"instances", r.instances}, {"unranked", r.unranked}, {"bm25_k1", r.bm25_k1},
                    {"bm25_b", r.bm25_b}, {"pool_fingerprint", r.pool_fingerprint},
                    {"config_hash", r.config_hash}});
  }
  json doc = {{"conventions", reports.empty() ? std::string() : conventions_line(reports.front())},
              {"manifest", json::parse(manifest_to_json(m))},
              {"rows", rows}};
  return doc.dump(2) + "\n";
}

}  // namespace

std::string render_report(const std::vector<MetricReport>& reports, const RunManifest& manifest, ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return render_csv(reports);
    case ReportFormat::Markdown: return render_markdown(reports, manifest);
    case ReportFormat::Json: return render_json(reports, manifest);
  }
  return {};
}

void emit_report(const std::vector<MetricReport>& reports, const RunManifest& manifest, ReportFormat format,
                 const std::filesystem::path& path) {
  detail::write_file(path, render_report(reports, manifest, format));
}

std::vector<MetricReport> reports_from_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != kCsvHeader) throw FormatError("report csv: unexpected header");
  std::vector<MetricReport> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = lines[i].find(',', start);
      f.emplace_back(lines[i].substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 19) throw ParseError(i + 1, "report csv: expected 19 fields");
    auto d = [&](std::size_t k) {
      double v = 0;
      if (!detail::parse_double(f[k], v)) throw ParseError(i + 1, "report csv: bad number '" + f[k] + "'");
      return v;
    };
    auto od = [&](std::size_t k) -> std::optional<double> {
      if (f[k].empty()) return std::nullopt;
      return d(k);
    };
    MetricReport r;
    r.strategy = f[0];
    r.dist1 = d(1); r.dist2 = d(2); r.ent1 = d(3); r.ent2 = d(4);
    r.selfbleu1 = d(5); r.selfbleu2 = d(6); r.bleu2 = d(7); r.rouge2 = d(8);
    r.moverscore = od(9); r.bertscore = od(10); r.bm25 = d(11); r.gruen = od(12);
    r.instances = static_cast<std::size_t>(std::stoull(f[13]));
    r.unranked = static_cast<std::size_t>(std::stoull(f[14]));
    r.bm25_k1 = d(15); r.bm25_b = d(16);
    r.pool_fingerprint = f[17];
    r.config_hash = f[18];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricReport> reports_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    std::vector<MetricReport> out;
    auto opt = [](const json& j) -> std::optional<double> {
      if (j.is_null()) return std::nullopt;
      return j.get<double>();
    };
    for (const auto& row : doc.at("rows")) {
      MetricReport r;
      r.strategy = row.at("strategy").get<std::string>();
      r.dist1 = row.at("dist1").get<double>();
      r.dist2 = row.at("dist2").get<double>();
      r.ent1 = row.at("ent1").get<double>();
      r.ent2 = row.at("ent2").get<double>();
      r.selfbleu1 = row.at("selfbleu1").get<double>();
      r.selfbleu2 = row.at("selfbleu2").get<double>();
      r.bleu2 = row.at("bleu2").get<double>();
      r.rouge2 = row.at("rouge2").get<double>();
      r.moverscore = opt(row.at("moverscore"));
      r.bertscore = opt(row.at("bertscore"));
      r.bm25 = row.at("bm25").get<double>();
      r.gruen = opt(row.at("gruen"));
      r.instances = row.at("instances").get<std::size_t>();
      r.unranked = row.at("unranked").get<std::size_t>();
      r.bm25_k1 = row.at("bm25_k1").get<double>();
      r.bm25_b = row.at("bm25_b").get<double>();
      r.pool_fingerprint = row.at("pool_fingerprint").get<std::string>();
      r.config_hash = row.at("config_hash").get<std::string>();
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  }
}

}  // namespace gps
