#include "advxfer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "advxfer/error.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/random.hpp"
#include "advxfer/stats.hpp"
#include "json.hpp"

namespace advxfer {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<TransferMatrix> try_matrix(const AsrTable& asr) {
  try {
    return TransferMatrix::build(asr);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUndefinedBaseline) throw;
    return std::nullopt;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::string format_transfer_table_csv(const AsrTable& asr) {
  asr.validate();
  const std::size_t n = asr.size();
  // Rows with a zero self-attack ASR have no transfer rates.
  auto row_defined = [&](std::size_t i) { return asr.values[i][i] > 0.0; };
  auto rate = [&](std::size_t i, std::size_t j) { return asr.values[i][j] / asr.values[i][i]; };
  std::ostringstream out;
  out << "source";
  for (const auto& a : asr.architectures) out << ',' << a;
  out << ",mean_tr\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << "P_" << asr.architectures[i];
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out << ',' << fixed(100.0 * asr.values[i][j], 1);
      if (i == j) continue;
      out << " (" << (row_defined(i) ? fixed(rate(i, j), 2) : "n/a") << ')';
      if (row_defined(i)) sum += rate(i, j);
    }
    out << ',' << (row_defined(i) && n > 1 ? fixed(sum / static_cast<double>(n - 1), 2) : "n/a");
    out << '\n';
  }
  out << "vulnerability_score";
  for (std::size_t j = 0; j < n; ++j) {
    bool defined = n > 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      defined = defined && row_defined(i);
      if (row_defined(i)) sum += rate(i, j);
    }
    out << ',' << (defined ? fixed(sum / static_cast<double>(n - 1), 3) : "n/a");
  }
  out << ",--\n";
  return out.str();
}

std::string render_heatmap_svg(const TransferMatrix& m, const std::string& title) {
  const int cell = 80;
  const int left = 120;
  const int top = 60;
  const int n = static_cast<int>(m.size());
  const int width = left + n * cell + 20;
  const int height = top + n * cell + 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  for (int j = 0; j < n; ++j) {
    svg << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << xml_escape(m.architectures()[j]) << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    svg << "<text x=\"" << left - 8 << "\" y=\"" << top + i * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">P_" << xml_escape(m.architectures()[i]) << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double tr = m.rates()[i][j];
      std::string fill = "#9e9e9e";
      std::string ink = "#000000";
      if (i != j) {
        // Light (low) to dark blue (high) over [0, 1].
        const double t = std::clamp(tr, 0.0, 1.0);
        const int r = static_cast<int>(std::lround(239 - t * (239 - 8)));
        const int g = static_cast<int>(std::lround(243 - t * (243 - 48)));
        const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
        fill = buf;
        if (t > 0.5) ink = "#ffffff";
      }
      svg << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << fill << "\" stroke=\"#ffffff\"/>\n";
      svg << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << ink << "\">" << fixed(tr, 2) << "</text>\n";
    }
  }
  svg << "<text x=\"" << left + n * cell / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\">target model</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_frame_efficacy_svg(const AsrTable& asr, const std::string& title) {
  asr.validate();
  const int n = static_cast<int>(asr.size());
  const int bar = 24;
  const int group = n * bar + 40;
  const int left = 50;
  const int top = 40;
  const int plot_h = 200;
  const int width = left + n * group + 20;
  const int height = top + plot_h + 80;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 10
      << "\" y2=\"" << top + plot_h << "\" stroke=\"#000\"/>\n";
  for (int i = 0; i < n; ++i) {
    const int gx = left + i * group + 20;
    for (int j = 0; j < n; ++j) {
      const double v = asr.values[i][j];
      const int h = static_cast<int>(std::lround(v * plot_h));
      svg << "<rect x=\"" << gx + j * bar << "\" y=\"" << top + plot_h - h << "\" width=\""
          << bar - 2 << "\" height=\"" << h << "\" fill=\"" << kColors[j % 6] << "\""
          << (i == j ? " fill-opacity=\"0.4\"" : "") << "/>\n";
      svg << "<text x=\"" << gx + j * bar + bar / 2 << "\" y=\"" << top + plot_h - h - 3
          << "\" text-anchor=\"middle\" font-size=\"9\">" << fixed(100.0 * v, 1) << "</text>\n";
    }
    svg << "<text x=\"" << gx + n * bar / 2 << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\">P_" << xml_escape(asr.architectures[i]) << "</text>\n";
    if (n > 1) {
      const double mean = mean_cross_architecture(asr.values, static_cast<std::size_t>(i));
      svg << "<text x=\"" << gx + n * bar / 2 << "\" y=\"" << top + plot_h + 32
          << "\" text-anchor=\"middle\">cross mean " << fixed(100.0 * mean, 1) << "</text>\n";
    }
  }
  for (int j = 0; j < n; ++j) {
    svg << "<rect x=\"" << left + j * 110 << "\" y=\"" << height - 24
        << "\" width=\"10\" height=\"10\" fill=\"" << kColors[j % 6] << "\"/>\n";
    svg << "<text x=\"" << left + j * 110 + 14 << "\" y=\"" << height - 15 << "\">"
        << xml_escape(asr.architectures[j]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

struct CampaignInfo {
  std::vector<std::string> architectures;
  std::vector<std::string> scenarios;
  std::uint64_t master_seed = 0;
  bool universal = false;
  std::uint64_t permutations = 9999;
  json raw;
};

CampaignInfo read_campaign(const ResultsLayout& layout) {
  const auto bytes = read_file_bytes(layout.campaign_file());
  CampaignInfo info;
  try {
    info.raw = json::parse(bytes.begin(), bytes.end());
    info.architectures = info.raw.at("architectures").get<std::vector<std::string>>();
    for (const auto& s : info.raw.at("scenarios")) {
      info.scenarios.push_back(s.at("scenario_id").get<std::string>());
    }
    info.master_seed = std::stoull(info.raw.at("master_seed").get<std::string>());
    info.universal = info.raw.at("universal").get<bool>();
    info.permutations = info.raw.at("permutations").get<std::uint64_t>();
  } catch (const std::exception& e) {
    fail(ErrorKind::kIo, "malformed " + layout.campaign_file().string() + ": " + e.what());
  }
  return info;
}

bool has_trials(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("trial_") && e.path().extension() == ".jsonl") return true;
  }
  return false;
}

json table_json(const std::vector<std::string>& names, const std::vector<std::vector<double>>& v) {
  json out = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    json row = json::object();
    for (std::size_t j = 0; j < names.size(); ++j) row[names[j]] = v[i][j];
    out[names[i]] = row;
  }
  return out;
}

}  // namespace

std::string compute_summary_json(const fs::path& results_dir) {
  const ResultsLayout layout{results_dir};
  if (!fs::exists(layout.campaign_file())) {
    fail(ErrorKind::kMissingInput, "missing inputs: " + layout.campaign_file().string());
  }
  const CampaignInfo info = read_campaign(layout);

  std::vector<std::string> missing;
  for (const auto& sid : info.scenarios) {
    for (const auto& a : info.architectures) {
      if (!has_trials(layout.baseline_dir(a, sid))) missing.push_back(layout.baseline_dir(a, sid).string());
    }
    for (const auto& src : info.architectures) {
      for (const auto& tgt : info.architectures) {
        if (!has_trials(layout.eval_dir(src, tgt, sid))) {
          missing.push_back(layout.eval_dir(src, tgt, sid).string());
        }
      }
    }
    if (info.universal) {
      for (const auto& tgt : info.architectures) {
        if (!has_trials(layout.eval_dir(kUniversalSource, tgt, sid))) {
          missing.push_back(layout.eval_dir(kUniversalSource, tgt, sid).string());
        }
      }
    }
  }
  for (const char* phase : {"baseline", "self", "transfer"}) {
    if (!fs::exists(layout.status_file(phase))) missing.push_back(layout.status_file(phase).string());
  }
  if (info.universal && !fs::exists(layout.status_file("universal"))) {
    missing.push_back(layout.status_file("universal").string());
  }
  if (!missing.empty()) {
    std::string msg = "missing inputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    fail(ErrorKind::kMissingInput, msg);
  }

  json summary;
  summary["architectures"] = info.architectures;
  json scenarios = json::object();
  for (const auto& sid : info.scenarios) {
    json s;
    const AsrTable asr = load_asr_table(layout, info.architectures, sid);
    s["asr"] = table_json(asr.architectures, asr.values);
    json baseline = json::object();
    std::map<std::string, std::vector<TrialLog>> baseline_logs;
    for (const auto& a : info.architectures) {
      baseline_logs[a] = load_cell_logs(layout.baseline_dir(a, sid));
      baseline[a] = frame_asr(baseline_logs[a]);
    }
    s["baseline"] = baseline;

    if (const auto tm = try_matrix(asr)) {
      s["tr"] = table_json(tm->architectures(), tm->rates());
      if (tm->size() > 1) {
        s["mean_tr"] = mean_transfer_rate(*tm);
        json vs = json::object(), rs = json::object(), to = json::object();
        for (const auto& a : info.architectures) {
          vs[a] = vulnerability_score(*tm, a);
          rs[a] = robustness_score(*tm, a);
          to[a] = transfer_out_rate(*tm, a);
        }
        s["vs"] = vs;
        s["rs"] = rs;
        s["to"] = to;
      }
    } else {
      s["tr"] = nullptr;
      s["note"] = "transfer rates undefined: a self-attack ASR is zero";
    }

    json frame_efficacy = json::object();
    if (asr.size() > 1) {
      for (std::size_t i = 0; i < asr.size(); ++i) {
        frame_efficacy[asr.architectures[i]] = mean_cross_architecture(asr.values, i);
      }
    }
    s["frame_efficacy"] = frame_efficacy;

    json p_values = json::object();
    for (const auto& src : info.architectures) {
      for (const auto& tgt : info.architectures) {
        const auto attack = load_cell_logs(layout.eval_dir(src, tgt, sid));
        const auto seed = derive_seed(info.master_seed, "stats", src, tgt, sid);
        const auto r = cluster_permutation_test(clustered_from_logs(baseline_logs[tgt]),
                                                clustered_from_logs(attack), info.permutations, seed);
        p_values[src + "->" + tgt] = {{"statistic", r.statistic},
                                      {"p_value", r.p_value},
                                      {"n_perm", r.n_perm},
                                      {"seed", std::to_string(r.seed)},
                                      {"exact", r.exact},
                                      {"significant", r.p_value < 0.05}};
      }
    }
    s["p_values"] = p_values;

    json ensemble = json::object();
    std::vector<std::string> sources = info.architectures;
    if (info.universal) sources.emplace_back(kUniversalSource);
    for (const auto& src : sources) {
      std::vector<std::vector<TrialLog>> per_oracle;
      for (const auto& tgt : info.architectures) {
        per_oracle.push_back(load_cell_logs(layout.eval_dir(src, tgt, sid)));
      }
      try {
        ensemble[src] = ensemble_asr(per_oracle);
      } catch (const Error&) {
        ensemble[src] = nullptr;  // misaligned after trial exclusion
      }
    }
    s["ensemble_asr"] = ensemble;

    if (info.universal) {
      std::vector<double> universal;
      std::vector<double> self;
      for (std::size_t j = 0; j < asr.size(); ++j) {
        universal.push_back(
            frame_asr(load_cell_logs(layout.eval_dir(kUniversalSource, asr.architectures[j], sid))));
        self.push_back(asr.values[j][j]);
      }
      try {
        const auto uae = universal_efficiency(universal, self);
        json per = json::object();
        for (std::size_t j = 0; j < asr.size(); ++j) per[asr.architectures[j]] = uae.per_architecture[j];
        s["uae"] = {{"per_architecture", per}, {"mean", uae.mean}};
      } catch (const Error& e) {
        s["uae"] = nullptr;
      }
      json uasr = json::object();
      for (std::size_t j = 0; j < asr.size(); ++j) uasr[asr.architectures[j]] = universal[j];
      s["universal_asr"] = uasr;
    }
    scenarios[sid] = s;
  }
  summary["scenarios"] = scenarios;

  json queries = json::object();
  json warnings = json::array();
  json excluded = json::array();
  std::vector<std::string> phases = {"baseline", "self", "transfer"};
  if (info.universal) phases.emplace_back("universal");
  for (const auto& phase : phases) {
    const PhaseStatus st = read_phase_status(layout.status_file(phase));
    queries[phase] = st.queries;
    for (const auto& w : st.warnings) warnings.push_back(w);
    for (const auto& x : st.excluded) excluded.push_back(x);
  }
  summary["query_counts"] = queries;
  summary["warnings"] = warnings;
  summary["excluded_trials"] = excluded;
  summary["excluded_count"] = excluded.size();

  json seeds = json::object();
  seeds["master"] = std::to_string(info.master_seed);
  json optimize = json::object();
  for (const auto& sid : info.scenarios) {
    for (const auto& a : info.architectures) {
      optimize[patch_id(a, sid)] = std::to_string(derive_seed(info.master_seed, "optimize", a, sid));
    }
    if (info.universal) {
      optimize[patch_id(kUniversalSource, sid)] =
          std::to_string(derive_seed(info.master_seed, "universal", sid));
    }
  }
  seeds["optimize"] = optimize;
  summary["seeds"] = seeds;
  return summary.dump(2) + "\n";
}

std::vector<std::string> rebuild_matrices(const fs::path& results_dir) {
  const ResultsLayout layout{results_dir};
  const CampaignInfo info = read_campaign(layout);
  for (const auto& sid : info.scenarios) {
    const AsrTable asr = load_asr_table(layout, info.architectures, sid);
    write_asr_csv(layout.matrix_dir() / (sid + "_asr.csv"), asr);
    if (const auto tm = try_matrix(asr)) {
      write_transfer_csv(layout.matrix_dir() / (sid + "_tr.csv"), *tm);
    }
  }
  return info.scenarios;
}

ReportBundle render_report(const fs::path& results_dir) {
  const ResultsLayout layout{results_dir};
  const std::string summary = compute_summary_json(results_dir);
  const CampaignInfo info = read_campaign(layout);
  ReportBundle bundle;
  const fs::path dir = layout.report_dir();
  for (const auto& sid : info.scenarios) {
    const AsrTable asr = load_asr_table(layout, info.architectures, sid);
    const auto put = [&](const std::string& name, const std::string& text) {
      write_text(dir / name, text);
      bundle.files.push_back(dir / name);
    };
    put(sid + "_table.csv", format_transfer_table_csv(asr));
    write_asr_csv(dir / (sid + "_asr.csv"), asr);
    bundle.files.push_back(dir / (sid + "_asr.csv"));
    if (const auto tm = try_matrix(asr)) {
      write_transfer_csv(dir / (sid + "_tr.csv"), *tm);
      bundle.files.push_back(dir / (sid + "_tr.csv"));
      put(sid + "_heatmap.svg", render_heatmap_svg(*tm, "Transfer rate heat map: " + sid));
    }
    put(sid + "_frame_efficacy.svg",
        render_frame_efficacy_svg(asr, "Frame success rate by target: " + sid));
  }
  write_text(dir / "summary.json", summary);
  bundle.files.push_back(dir / "summary.json");
  return bundle;
}

bool verify_report(const fs::path& results_dir, std::string* diff) {
  const ResultsLayout layout{results_dir};
  const auto bytes = read_file_bytes(layout.report_dir() / "summary.json");
  const std::string stored(bytes.begin(), bytes.end());
  const std::string fresh = compute_summary_json(results_dir);
  if (stored == fresh) return true;
  if (diff != nullptr) {
    const json a = json::parse(stored);
    const json b = json::parse(fresh);
    *diff = json::diff(a, b).dump(2);
  }
  return false;
}

}  // namespace advxfer
