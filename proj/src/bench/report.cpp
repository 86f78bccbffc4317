/* Copyright 2026 The aerobust Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aerobust/bench.hpp"
#include "aerobust/error.hpp"

namespace aerobust::bench {
namespace {

std::string fixed3(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000".
  if (std::string(buf) == "-0.000") return "0.000";
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

std::optional<std::size_t> clean_index(const EvalReport& r) {
  for (std::size_t i = 0; i < r.conditions.size(); ++i) {
    if (std::holds_alternative<cond::Clean>(r.conditions[i].kind)) return i;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Format> parse_formats(const std::string& list) {
  std::vector<Format> out;
  std::istringstream in(list);
  std::string item;
  auto add = [&](Format f) {
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  };
  while (std::getline(in, item, ',')) {
    if (item == "csv") {
      add(Format::kCsv);
    } else if (item == "md" || item == "markdown") {
      add(Format::kMarkdown);
    } else if (item == "svg") {
      add(Format::kSvg);
    } else if (item == "summary") {
      add(Format::kSummary);
    } else if (item == "json") {
      add(Format::kJson);
    } else if (item == "all") {
      for (auto f : {Format::kCsv, Format::kMarkdown, Format::kSvg, Format::kSummary, Format::kJson}) add(f);
    } else {
      throw ConfigError("unknown report format '" + item + "' (csv, md, svg, summary, json, all)");
    }
  }
  if (out.empty()) throw ConfigError("no report format given");
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "model,condition,mAP,AUC,d_prime\n";
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    for (std::size_t c = 0; c < report.conditions.size(); ++c) {
      const auto& cell = report.cell(m, c);
      out += csv_field(report.models[m].name) + ',' + csv_field(report.conditions[c].name) + ',';
      if (cell.ok) {
        out += fixed3(cell.triple.mAP) + ',' + fixed3(cell.triple.auc) + ',' + fixed3(cell.triple.d_prime) + '\n';
      } else {
        out += "NA,NA,NA\n";
      }
    }
  }
  return out;
}

std::string report_markdown(const EvalReport& report, const RobustnessSummary& summary, std::size_t top_k) {
  std::ostringstream md;
  md << "# Robustness report\n\n";
  if (report.provenance.contains("config_hash")) {
    md << "Config `" << report.provenance["config_hash"].get<std::string>() << "`, seed "
       << report.provenance.value("seed", std::uint64_t{0}) << ", " << report.clip_ids.size() << " clips.\n\n";
  }

  md << "| Condition |";
  for (const auto& m : report.models) md << ' ' << m.name << " mAP | AUC | d' |";
  md << "\n|---|";
  for (std::size_t i = 0; i < report.models.size(); ++i) md << "---:|---:|---:|";
  md << '\n';
  for (std::size_t c = 0; c < report.conditions.size(); ++c) {
    md << "| " << report.conditions[c].name << " |";
    for (std::size_t m = 0; m < report.models.size(); ++m) {
      const auto& cell = report.cell(m, c);
      if (cell.ok) {
        md << ' ' << fixed3(cell.triple.mAP) << " | " << fixed3(cell.triple.auc) << " | "
           << fixed3(cell.triple.d_prime) << " |";
      } else {
        md << " failed | | |";
      }
    }
    md << '\n';
  }

  md << "\n## Summary\n\n| Model | Clean mAP | d_half (s) |";
  std::vector<std::string> attack_names;
  for (const auto& c : report.conditions) {
    if (c.is_attack()) attack_names.push_back(c.name);
  }
  for (const auto& a : attack_names) md << ' ' << a << " |";
  md << "\n|---|---:|---:|";
  for (std::size_t i = 0; i < attack_names.size(); ++i) md << "---:|";
  md << '\n';
  for (const auto& s : summary.models) {
    md << "| " << s.model << " | " << fixed3(s.clean_map) << " | " << s.d_half.text() << " |";
    for (const auto& name : attack_names) {
      const auto it = std::find_if(s.attacks.begin(), s.attacks.end(), [&](const auto& a) { return a.condition == name; });
      md << ' ' << (it == s.attacks.end() ? std::string("n/a") : fixed3(it->mAP)) << " |";
    }
    md << '\n';
  }

  const auto clean = clean_index(report);
  if (clean && !attack_names.empty()) {
    md << "\n## Score shift under attack\n\nMean change of the predicted score per class, top " << top_k
       << " by magnitude.\n";
    for (std::size_t m = 0; m < report.models.size(); ++m) {
      const auto& base = report.cell(m, *clean);
      if (!base.ok) continue;
      for (std::size_t c = 0; c < report.conditions.size(); ++c) {
        if (!report.conditions[c].is_attack() || !report.cell(m, c).ok) continue;
        const auto shift = metrics::distribution_shift(base.predictions, report.cell(m, c).predictions, top_k);
        md << "\n### " << report.models[m].name << ", " << report.conditions[c].name << "\n\n";
        md << "| Class | Shift |\n|---|---:|\n";
        for (auto k : shift.ranked) md << "| " << report.class_names[k] << " | " << fixed3(shift.delta[k]) << " |\n";
      }
    }
  }

  bool any_failed = false;
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    for (std::size_t c = 0; c < report.conditions.size(); ++c) {
      const auto& cell = report.cell(m, c);
      if (cell.ok) continue;
      if (!any_failed) md << "\n## Failed cells\n\n";
      any_failed = true;
      md << "- " << report.models[m].name << " / " << report.conditions[c].name << ": " << cell.error << '\n';
    }
  }
  return md.str();
}

std::string map_vs_d_svg(const EvalReport& report) {
  constexpr double kW = 640, kH = 400, kL = 60, kR = 160, kT = 30, kB = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

  std::vector<double> ds;
  for (const auto& c : report.conditions) {
    if (const auto* k = std::get_if<cond::Intermittent>(&c.kind)) ds.push_back(k->interval_s);
  }
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  double lo = ds.empty() ? -3.0 : std::log2(ds.front());
  double hi = ds.empty() ? 1.0 : std::log2(ds.back());
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto px = [&](double d) { return kL + (std::log2(d) - lo) / (hi - lo) * (kW - kL - kR); };
  auto py = [&](double map) { return kT + (1.0 - map) * (kH - kT - kB); };
  char buf[256];

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", kL, kH - kB,
                kW - kR, kH - kB);
  s << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", kL, kT, kL,
                kH - kB);
  s << buf;
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.1f\" x2=\"%g\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%g\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                  kL, py(v), kW - kR, py(v), kL - 6, py(v) + 4, v);
    s << buf;
  }
  for (double d : ds) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%g\" text-anchor=\"middle\">%g</text>\n", px(d), kH - kB + 18,
                  d);
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">interval d (s, log scale)</text>\n",
                kL + (kW - kL - kR) / 2, kH - 10);
  s << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">mAP</text>\n",
                kT + (kH - kT - kB) / 2, kT + (kH - kT - kB) / 2);
  s << buf;

  for (std::size_t m = 0; m < report.models.size(); ++m) {
    const char* color = kColors[m % std::size(kColors)];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t c = 0; c < report.conditions.size(); ++c) {
      const auto* k = std::get_if<cond::Intermittent>(&report.conditions[c].kind);
      if (k && report.cell(m, c).ok) pts.emplace_back(k->interval_s, report.cell(m, c).triple.mAP);
    }
    std::sort(pts.begin(), pts.end());
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [d, v] : pts) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(d), py(v));
      s << buf;
    }
    s << "\"/>\n";
    for (const auto& [d, v] : pts) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n", px(d), py(v), color);
      s << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" fill=\"%s\">", kW - kR + 10, kT + 16.0 * m + 4, color);
    s << buf << xml_escape(report.models[m].name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const EvalReport& report, const RobustnessSummary& summary, const std::vector<Format>& formats,
                 const std::filesystem::path& out_dir, std::size_t top_k) {
  std::filesystem::create_directories(out_dir);
  for (auto f : formats) {
    switch (f) {
      case Format::kCsv:
        write_text(out_dir / "report.csv", report_csv(report));
        break;
      case Format::kMarkdown:
        write_text(out_dir / "report.md", report_markdown(report, summary, top_k));
        break;
      case Format::kSvg:
        write_text(out_dir / "plots" / "map_vs_d.svg", map_vs_d_svg(report));
        break;
      case Format::kSummary:
        write_text(out_dir / "summary.json", summary.to_json().dump(2) + "\n");
        break;
      case Format::kJson:
        write_text(out_dir / "report.json", report.to_json().dump() + "\n");
        break;
    }
  }
}

EvalReport load_report(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return EvalReport::from_json(j);
}

}  // namespace aerobust::bench
