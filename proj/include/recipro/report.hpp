#pragma once

// Rendering of run results: CSV tables, SVG charts and a markdown summary.
// Everything here is a pure function of RunArtifacts; map-ordered iteration
// and fixed "%.Nf" formatting keep the bytes stable.

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recipro/corpus.hpp"
#include "recipro/error.hpp"
#include "recipro/eval.hpp"

namespace recipro {

struct SeedMetrics {
  std::string model_id;
  std::string dataset_id;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct TransferRecord {
  std::string model_id;
  std::string train_dataset;
  std::string eval_dataset;
  std::uint64_t seed = 0;
  std::optional<MetricsReport> metrics;
  std::string unavailable;
};

struct AgreementRecord {
  std::string dataset_id;
  std::uint64_t seed = 0;
  AgreementResult result;
};

struct GapRecord {
  std::string model_id;
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::string class_a;
  std::string class_b;
  double gap = 0.0;  // recall(a) - recall(b), fraction
};

// Per-dataset counts mirroring the dataset description table.
struct DatasetSummary {
  std::string dataset_id;
  std::vector<std::string> label_alphabet;  // display order
  CorpusStats ingested;
  CorpusStats labeled;  // after cleaning and label filtering
  std::size_t balanced_examples = 0;
  double balanced_mean_chars = 0.0;
  std::map<std::string, std::size_t> balanced_recipients_per_label;
  std::array<std::size_t, 3> split_recipients{};
  std::array<std::size_t, 3> split_examples{};
};

struct RunArtifacts {
  std::vector<SeedMetrics> metrics;
  std::vector<TransferRecord> transfer;
  std::vector<AgreementRecord> agreement;
  std::vector<GapRecord> gaps;
  std::vector<DatasetSummary> datasets;
  // Display order; ids missing here are appended in sorted order.
  std::vector<std::string> model_order;
  std::vector<std::string> dataset_order;

  bool empty() const {
    return metrics.empty() && transfer.empty() && agreement.empty() && gaps.empty() && datasets.empty();
  }
};

namespace report_detail {

inline std::string fmt(double v, int decimals) {
  if (v == 0.0) v = 0.0;  // no "-0.0000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string file_stem(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("unwritable_path", path.string());
  out << content;
  if (!out) throw validation_error("unwritable_path", path.string());
}

inline std::vector<std::string> ordered(const std::vector<std::string>& preferred, const std::set<std::string>& present) {
  std::vector<std::string> out;
  for (const auto& p : preferred)
    if (present.count(p) && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  for (const auto& p : present)
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  return out;
}

}  // namespace report_detail

// ---------------------------------------------------------------------------
// Aggregation over seeds

inline constexpr std::array<const char*, 5> kMetricNames = {
    "balanced_accuracy", "accuracy", "macro_f1", "macro_precision", "macro_recall"};

inline double metric_value(const MetricsReport& m, std::size_t i) {
  switch (i) {
    case 0: return m.balanced_accuracy;
    case 1: return m.accuracy;
    case 2: return m.macro_f1;
    case 3: return m.macro_precision;
    default: return m.macro_recall;
  }
}

struct MetricsRow {
  std::string model_id;
  std::string dataset_id;
  std::size_t seeds = 0;
  std::array<Summary, 5> metrics;  // kMetricNames order
};

struct TransferRow {
  std::string model_id;
  std::string train_dataset;
  std::string eval_dataset;
  std::size_t seeds = 0;
  std::optional<Summary> balanced_accuracy;
  std::string unavailable;
};

struct AgreementRow {
  std::string dataset_id;
  std::string mode;
  std::string model_i;
  std::string model_j;
  std::size_t seeds = 0;
  std::size_t degenerate_seeds = 0;
  std::optional<Summary> kappa;
  Summary observed;
  Summary chance;
};

struct GapRow {
  std::string model_id;
  std::string dataset_id;
  std::string class_a;
  std::string class_b;
  Summary gap_points;
};

struct AggregatedRun {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::vector<MetricsRow> metrics;
  std::vector<TransferRow> transfer;
  std::vector<AgreementRow> agreement;
  std::vector<GapRow> gaps;
};

inline AggregatedRun aggregate(const RunArtifacts& a) {
  using report_detail::ordered;
  AggregatedRun out;
  std::set<std::string> models, datasets;
  for (const auto& m : a.metrics) models.insert(m.model_id), datasets.insert(m.dataset_id);
  for (const auto& t : a.transfer)
    models.insert(t.model_id), datasets.insert(t.train_dataset), datasets.insert(t.eval_dataset);
  for (const auto& g : a.gaps) models.insert(g.model_id), datasets.insert(g.dataset_id);
  for (const auto& r : a.agreement)
    models.insert(r.result.model_i), models.insert(r.result.model_j), datasets.insert(r.dataset_id);
  for (const auto& d : a.datasets) datasets.insert(d.dataset_id);
  out.models = ordered(a.model_order, models);
  out.datasets = ordered(a.dataset_order, datasets);
  auto rank = [](const std::vector<std::string>& order, const std::string& id) {
    return std::find(order.begin(), order.end(), id) - order.begin();
  };

  std::map<std::pair<long, long>, std::array<std::vector<double>, 5>> metric_values;
  for (const auto& m : a.metrics) {
    auto& v = metric_values[{rank(out.models, m.model_id), rank(out.datasets, m.dataset_id)}];
    for (std::size_t i = 0; i < 5; ++i) v[i].push_back(metric_value(m.metrics, i));
  }
  for (const auto& [key, v] : metric_values) {
    MetricsRow row{out.models[key.first], out.datasets[key.second], v[0].size(), {}};
    for (std::size_t i = 0; i < 5; ++i) row.metrics[i] = summarize(v[i]);
    out.metrics.push_back(std::move(row));
  }

  struct TransferAcc {
    std::vector<double> values;
    std::size_t seeds = 0;
    std::string unavailable;
  };
  std::map<std::array<long, 3>, TransferAcc> transfer_values;
  for (const auto& t : a.transfer) {
    auto& acc = transfer_values[{rank(out.models, t.model_id), rank(out.datasets, t.train_dataset),
                                 rank(out.datasets, t.eval_dataset)}];
    ++acc.seeds;
    if (t.metrics)
      acc.values.push_back(t.metrics->balanced_accuracy);
    else if (acc.unavailable.empty())
      acc.unavailable = t.unavailable;
  }
  for (const auto& [key, acc] : transfer_values) {
    TransferRow row{out.models[key[0]], out.datasets[key[1]], out.datasets[key[2]], acc.seeds, {}, {}};
    if (acc.values.size() == acc.seeds)
      row.balanced_accuracy = summarize(acc.values);
    else
      row.unavailable = acc.unavailable;
    out.transfer.push_back(std::move(row));
  }

  struct AgreeAcc {
    std::vector<double> kappa, observed, chance;
    std::size_t seeds = 0, degenerate = 0;
    std::string mode;
  };
  std::map<std::tuple<long, std::string, long, long>, AgreeAcc> agree_values;
  for (const auto& r : a.agreement) {
    auto& acc = agree_values[{rank(out.datasets, r.dataset_id), to_string(r.result.mode),
                              rank(out.models, r.result.model_i), rank(out.models, r.result.model_j)}];
    ++acc.seeds;
    acc.observed.push_back(r.result.observed);
    acc.chance.push_back(r.result.chance);
    if (r.result.kappa)
      acc.kappa.push_back(*r.result.kappa);
    else
      ++acc.degenerate;
  }
  for (const auto& [key, acc] : agree_values) {
    AgreementRow row;
    row.dataset_id = out.datasets[std::get<0>(key)];
    row.mode = std::get<1>(key);
    row.model_i = out.models[std::get<2>(key)];
    row.model_j = out.models[std::get<3>(key)];
    row.seeds = acc.seeds;
    row.degenerate_seeds = acc.degenerate;
    if (!acc.kappa.empty()) row.kappa = summarize(acc.kappa);
    row.observed = summarize(acc.observed);
    row.chance = summarize(acc.chance);
    out.agreement.push_back(std::move(row));
  }

  std::map<std::tuple<long, long, std::string, std::string>, std::vector<double>> gap_values;
  for (const auto& g : a.gaps)
    gap_values[{rank(out.models, g.model_id), rank(out.datasets, g.dataset_id), g.class_a, g.class_b}]
        .push_back(100.0 * g.gap);
  for (const auto& [key, v] : gap_values)
    out.gaps.push_back({out.models[std::get<0>(key)], out.datasets[std::get<1>(key)], std::get<2>(key),
                        std::get<3>(key), summarize(v)});
  return out;
}

// "0.7729 (0.0145)"
inline std::string mean_std_cell(const Summary& s) {
  return report_detail::fmt(s.mean, 4) + " (" + report_detail::fmt(s.std, 4) + ")";
}

// ---------------------------------------------------------------------------
// Tables

inline std::string metrics_csv(const AggregatedRun& run) {
  using report_detail::fmt;
  std::ostringstream out;
  out << "model_id,dataset_id,seeds";
  for (const char* name : kMetricNames) out << ',' << name << ',' << name << "_std";
  out << '\n';
  for (const auto& r : run.metrics) {
    out << report_detail::csv_field(r.model_id) << ',' << report_detail::csv_field(r.dataset_id) << ',' << r.seeds;
    for (const auto& s : r.metrics) out << ',' << fmt(s.mean, 4) << ',' << fmt(s.std, 4);
    out << '\n';
  }
  return out.str();
}

inline std::string transfer_csv(const AggregatedRun& run) {
  using report_detail::csv_field;
  using report_detail::fmt;
  std::ostringstream out;
  out << "model_id,train_dataset,eval_dataset,seeds,balanced_accuracy,balanced_accuracy_std,unavailable\n";
  for (const auto& r : run.transfer) {
    out << csv_field(r.model_id) << ',' << csv_field(r.train_dataset) << ',' << csv_field(r.eval_dataset) << ','
        << r.seeds << ',';
    if (r.balanced_accuracy)
      out << fmt(r.balanced_accuracy->mean, 4) << ',' << fmt(r.balanced_accuracy->std, 4) << ",\n";
    else
      out << ",," << csv_field(r.unavailable) << '\n';
  }
  return out.str();
}

inline std::string agreement_csv(const AggregatedRun& run) {
  using report_detail::csv_field;
  using report_detail::fmt;
  std::ostringstream out;
  out << "dataset_id,mode,model_i,model_j,seeds,kappa,kappa_std,observed,chance,degenerate_seeds\n";
  for (const auto& r : run.agreement) {
    out << csv_field(r.dataset_id) << ',' << r.mode << ',' << csv_field(r.model_i) << ',' << csv_field(r.model_j)
        << ',' << r.seeds << ',';
    if (r.kappa)
      out << fmt(r.kappa->mean, 4) << ',' << fmt(r.kappa->std, 4);
    else
      out << "degenerate,";
    out << ',' << fmt(r.observed.mean, 4) << ',' << fmt(r.chance.mean, 4) << ',' << r.degenerate_seeds << '\n';
  }
  return out.str();
}

inline std::string gaps_csv(const AggregatedRun& run) {
  using report_detail::csv_field;
  using report_detail::fmt;
  std::ostringstream out;
  out << "model_id,dataset_id,class_a,class_b,seeds,recall_gap_points,recall_gap_points_std\n";
  for (const auto& r : run.gaps)
    out << csv_field(r.model_id) << ',' << csv_field(r.dataset_id) << ',' << csv_field(r.class_a) << ','
        << csv_field(r.class_b) << ',' << r.gap_points.n << ',' << fmt(r.gap_points.mean, 2) << ','
        << fmt(r.gap_points.std, 2) << '\n';
  return out.str();
}

inline std::string dataset_stats_csv(const RunArtifacts& a, const AggregatedRun& run) {
  using report_detail::csv_field;
  using report_detail::fmt;
  std::vector<const DatasetSummary*> cols;
  for (const auto& id : run.datasets)
    for (const auto& d : a.datasets)
      if (d.dataset_id == id) cols.push_back(&d);

  auto slash = [](const std::vector<std::string>& parts) { return text::join(parts, " / "); };
  auto per_label = [&](const DatasetSummary& d, const std::map<std::string, std::size_t>& counts) {
    std::vector<std::string> parts;
    for (const auto& l : d.label_alphabet) {
      auto it = counts.find(l);
      parts.push_back(std::to_string(it == counts.end() ? 0 : it->second));
    }
    return slash(parts);
  };
  auto triple = [&](const std::array<std::size_t, 3>& v) {
    return slash({std::to_string(v[0]), std::to_string(v[1]), std::to_string(v[2])});
  };

  std::vector<std::pair<std::string, std::function<std::string(const DatasetSummary&)>>> rows = {
      {"Utterances", [](const DatasetSummary& d) { return std::to_string(d.ingested.utterance_count); }},
      {"Number of Authors", [](const DatasetSummary& d) { return std::to_string(d.ingested.author_count); }},
      {"Number of Recipients", [](const DatasetSummary& d) { return std::to_string(d.ingested.recipient_count); }},
      {"Labeled Recipients", [](const DatasetSummary& d) { return std::to_string(d.labeled.labeled_recipient_count); }},
      {"Recipients per Label", [&](const DatasetSummary& d) { return per_label(d, d.labeled.recipients_per_label); }},
      {"Balanced Recipients per Label",
       [&](const DatasetSummary& d) { return per_label(d, d.balanced_recipients_per_label); }},
      {"Balanced Utterances", [](const DatasetSummary& d) { return std::to_string(d.balanced_examples); }},
      {"Mean Characters per Balanced Utterance", [](const DatasetSummary& d) { return fmt(d.balanced_mean_chars, 2); }},
      {"Recipient train/val/test", [&](const DatasetSummary& d) { return triple(d.split_recipients); }},
      {"Utterances train/val/test", [&](const DatasetSummary& d) { return triple(d.split_examples); }},
      {"Label Order", [&](const DatasetSummary& d) { return slash(d.label_alphabet); }},
  };
  std::ostringstream out;
  out << "statistic";
  for (const auto* d : cols) out << ',' << csv_field(d->dataset_id);
  out << '\n';
  for (const auto& [name, cell] : rows) {
    out << name;
    for (const auto* d : cols) out << ',' << csv_field(cell(*d));
    out << '\n';
  }
  return out.str();
}

// Writes tables/*.csv; returns paths relative to out_dir.
inline std::vector<std::string> emit_tables(const RunArtifacts& a, const std::filesystem::path& out_dir) {
  if (a.empty()) throw validation_error("empty_artifacts", "nothing to report");
  const auto run = aggregate(a);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"tables/metrics.csv", metrics_csv(run)},
      {"tables/transfer.csv", transfer_csv(run)},
      {"tables/agreement.csv", agreement_csv(run)},
      {"tables/gaps.csv", gaps_csv(run)},
      {"tables/dataset_stats.csv", dataset_stats_csv(a, run)},
  };
  std::vector<std::string> written;
  for (const auto& [rel, content] : files) {
    report_detail::write_text(out_dir / rel, content);
    written.push_back(rel);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Charts
//
// Every bar and heatmap cell carries a <text class="value"> label with the
// same number the tables print, tagged with data-* attributes naming the
// row and column, so charts can be checked by parsing text.

namespace svg {

inline std::string header(int w, int h, const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << report_detail::xml_escape(title) << "</text>\n";
  return o.str();
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3"};
  return colors[i % 7];
}

// Diverging-free sequential ramp for v in [0, 1].
inline std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(247 - v * (247 - 8));
  const int g = static_cast<int>(251 - v * (251 - 81));
  const int b = static_cast<int>(255 - v * (255 - 156));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

struct HeatCell {
  std::string row, col;
  std::optional<double> value;
  std::string label;
};

inline std::string heatmap(const std::string& title, const std::vector<std::string>& rows,
                           const std::vector<std::string>& cols, const std::vector<HeatCell>& cells,
                           const std::string& row_title, const std::string& col_title, double lo, double hi) {
  using report_detail::xml_escape;
  const int cell = 80, left = 140, top = 70;
  const int w = left + cell * static_cast<int>(cols.size()) + 30;
  const int h = top + cell * static_cast<int>(rows.size()) + 40;
  std::ostringstream o;
  o << header(w, h, title);
  o << "<text x=\"" << left + cell * static_cast<int>(cols.size()) / 2 << "\" y=\"40\" text-anchor=\"middle\">"
    << xml_escape(col_title) << "</text>\n";
  o << "<text x=\"12\" y=\"" << top - 8 << "\">" << xml_escape(row_title) << "</text>\n";
  for (std::size_t c = 0; c < cols.size(); ++c)
    o << "<text class=\"col\" x=\"" << left + cell * static_cast<int>(c) + cell / 2 << "\" y=\"" << top - 8
      << "\" text-anchor=\"middle\">" << xml_escape(cols[c]) << "</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r)
    o << "<text class=\"row\" x=\"" << left - 8 << "\" y=\"" << top + cell * static_cast<int>(r) + cell / 2 + 4
      << "\" text-anchor=\"end\">" << xml_escape(rows[r]) << "</text>\n";
  for (const auto& hc : cells) {
    const auto r = std::find(rows.begin(), rows.end(), hc.row) - rows.begin();
    const auto c = std::find(cols.begin(), cols.end(), hc.col) - cols.begin();
    const int x = left + cell * static_cast<int>(c), y = top + cell * static_cast<int>(r);
    const double t = hc.value ? (hi > lo ? (*hc.value - lo) / (hi - lo) : 0.5) : 0.0;
    o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
      << (hc.value ? heat_color(t) : "#dddddd") << "\" stroke=\"white\"/>\n";
    o << "<text class=\"value\" data-row=\"" << xml_escape(hc.row) << "\" data-col=\"" << xml_escape(hc.col)
      << "\" x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
      << (t > 0.6 ? "white" : "black") << "\">" << xml_escape(hc.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct Bar {
  std::string group;   // x-axis group
  std::string series;  // bar within group
  double value = 0.0;
  double error = 0.0;  // half-height of the whisker
  std::string label;
};

// Vertical grouped bars over [lo, hi] with optional error whiskers.
inline std::string bar_chart(const std::string& title, const std::string& y_title,
                             const std::vector<std::string>& groups, const std::vector<std::string>& series,
                             const std::vector<Bar>& bars, double lo, double hi) {
  using report_detail::fmt;
  using report_detail::xml_escape;
  const int bar_w = 36, gap = 30, left = 70, top = 50, plot_h = 300;
  const int group_w = bar_w * static_cast<int>(std::max<std::size_t>(series.size(), 1)) + gap;
  const int w = left + group_w * static_cast<int>(groups.size()) + 160;
  const int h = top + plot_h + 60;
  auto y_of = [&](double v) { return top + plot_h - (std::clamp(v, lo, hi) - lo) / (hi - lo) * plot_h; };

  std::ostringstream o;
  o << header(w, h, title);
  o << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
    << ")\" text-anchor=\"middle\">" << xml_escape(y_title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double y = y_of(v);
    o << "<line x1=\"" << left << "\" x2=\"" << left + group_w * static_cast<int>(groups.size()) << "\" y1=\""
      << fmt(y, 1) << "\" y2=\"" << fmt(y, 1) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text class=\"tick\" x=\"" << left - 6 << "\" y=\"" << fmt(y + 4, 1) << "\" text-anchor=\"end\">"
      << fmt(v, 2) << "</text>\n";
  }
  const double zero_y = y_of(std::clamp(0.0, lo, hi));
  for (std::size_t g = 0; g < groups.size(); ++g)
    o << "<text class=\"group\" x=\"" << left + group_w * static_cast<int>(g) + (group_w - gap) / 2 << "\" y=\""
      << top + plot_h + 20 << "\" text-anchor=\"middle\">" << xml_escape(groups[g]) << "</text>\n";
  for (const auto& b : bars) {
    const auto g = std::find(groups.begin(), groups.end(), b.group) - groups.begin();
    const auto s = std::find(series.begin(), series.end(), b.series) - series.begin();
    const int x = left + group_w * static_cast<int>(g) + bar_w * static_cast<int>(s);
    const double y = y_of(b.value);
    o << "<rect x=\"" << x + 2 << "\" y=\"" << fmt(std::min(y, zero_y), 1) << "\" width=\"" << bar_w - 4
      << "\" height=\"" << fmt(std::abs(zero_y - y), 1) << "\" fill=\"" << palette(static_cast<std::size_t>(s))
      << "\"/>\n";
    const double cx = x + bar_w / 2.0;
    const double y1 = y_of(b.value + b.error), y2 = y_of(b.value - b.error);
    o << "<line class=\"error\" x1=\"" << fmt(cx, 1) << "\" x2=\"" << fmt(cx, 1) << "\" y1=\"" << fmt(y1, 1)
      << "\" y2=\"" << fmt(y2, 1) << "\" stroke=\"black\"/>\n";
    o << "<text class=\"value\" data-row=\"" << xml_escape(b.series) << "\" data-col=\"" << xml_escape(b.group)
      << "\" x=\"" << fmt(cx, 1) << "\" y=\"" << fmt(std::min(y1, y) - 4, 1)
      << "\" text-anchor=\"middle\" font-size=\"9\">" << xml_escape(b.label) << "</text>\n";
  }
  const int lx = left + group_w * static_cast<int>(groups.size()) + 20;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const int ly = top + 18 * static_cast<int>(s);
    o << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\"" << palette(s) << "\"/>\n";
    o << "<text class=\"legend\" x=\"" << lx + 18 << "\" y=\"" << ly + 10 << "\">" << xml_escape(series[s])
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace svg

// Writes charts/*.svg; returns paths relative to out_dir.
inline std::vector<std::string> emit_charts(const RunArtifacts& a, const std::filesystem::path& out_dir) {
  using report_detail::file_stem;
  using report_detail::fmt;
  if (a.empty()) throw validation_error("empty_artifacts", "nothing to report");
  const auto run = aggregate(a);
  std::vector<std::pair<std::string, std::string>> files;

  if (!run.metrics.empty()) {
    std::vector<svg::Bar> bars;
    std::vector<std::string> groups, series;
    for (const auto& r : run.metrics) {
      bars.push_back({r.dataset_id, r.model_id, r.metrics[0].mean, r.metrics[0].std, fmt(r.metrics[0].mean, 4)});
      if (std::find(groups.begin(), groups.end(), r.dataset_id) == groups.end()) groups.push_back(r.dataset_id);
      if (std::find(series.begin(), series.end(), r.model_id) == series.end()) series.push_back(r.model_id);
    }
    files.emplace_back("charts/balanced_accuracy.svg",
                       svg::bar_chart("Balanced accuracy (mean +/- std over seeds)", "balanced accuracy",
                                      report_detail::ordered(run.datasets, {groups.begin(), groups.end()}),
                                      report_detail::ordered(run.models, {series.begin(), series.end()}), bars, 0.0,
                                      1.0));
  }

  if (!run.gaps.empty()) {
    std::vector<svg::Bar> bars;
    std::set<std::string> groups, series;
    double extent = 5.0;
    for (const auto& r : run.gaps) {
      bars.push_back({r.dataset_id, r.model_id, r.gap_points.mean, r.gap_points.std, fmt(r.gap_points.mean, 2)});
      groups.insert(r.dataset_id);
      series.insert(r.model_id);
      extent = std::max(extent, std::abs(r.gap_points.mean) + r.gap_points.std);
    }
    const std::string title = "Recall gap " + run.gaps.front().class_a + " - " + run.gaps.front().class_b +
                              " (percentage points)";
    files.emplace_back("charts/gap.svg",
                       svg::bar_chart(title, "recall gap (points)", report_detail::ordered(run.datasets, groups),
                                      report_detail::ordered(run.models, series), bars, -extent, extent));
  }

  std::map<std::string, std::vector<const TransferRow*>> transfer_by_model;
  for (const auto& r : run.transfer) transfer_by_model[r.model_id].push_back(&r);
  for (const auto& [model, rows] : transfer_by_model) {
    std::set<std::string> train, eval;
    std::vector<svg::HeatCell> cells;
    for (const auto* r : rows) {
      train.insert(r->train_dataset);
      eval.insert(r->eval_dataset);
      if (r->balanced_accuracy)
        cells.push_back({r->train_dataset, r->eval_dataset, r->balanced_accuracy->mean,
                         fmt(r->balanced_accuracy->mean, 4)});
      else
        cells.push_back({r->train_dataset, r->eval_dataset, std::nullopt, "n/a"});
    }
    files.emplace_back("charts/transfer_" + file_stem(model) + ".svg",
                       svg::heatmap("Transfer balanced accuracy: " + model, report_detail::ordered(run.datasets, train),
                                    report_detail::ordered(run.datasets, eval), cells, "train", "evaluated on", 0.5,
                                    1.0));
  }

  std::map<std::pair<std::string, std::string>, std::vector<const AgreementRow*>> agree_by_dataset;
  for (const auto& r : run.agreement) agree_by_dataset[{r.dataset_id, r.mode}].push_back(&r);
  for (const auto& [key, rows] : agree_by_dataset) {
    std::set<std::string> models;
    std::vector<svg::HeatCell> cells;
    for (const auto* r : rows) {
      models.insert(r->model_i);
      models.insert(r->model_j);
      if (r->kappa)
        cells.push_back({r->model_i, r->model_j, r->kappa->mean, fmt(r->kappa->mean, 2)});
      else
        cells.push_back({r->model_i, r->model_j, std::nullopt, "degenerate"});
    }
    const auto order = report_detail::ordered(run.models, models);
    std::string name = "charts/kappa_" + file_stem(key.first);
    if (key.second != "correctness") name += "_" + key.second;
    files.emplace_back(name + ".svg", svg::heatmap("Kappa agreement (" + key.second + "): " + key.first, order, order,
                                                   cells, "model", "model", 0.0, 1.0));
  }

  std::vector<std::string> written;
  for (const auto& [rel, content] : files) {
    report_detail::write_text(out_dir / rel, content);
    written.push_back(rel);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Markdown summary, rendered from the same aggregation as the tables.

inline std::string summary_markdown(const RunArtifacts& a) {
  using report_detail::fmt;
  const auto run = aggregate(a);
  std::ostringstream o;
  o << "# Recipient profiling run summary\n\n";
  if (!run.metrics.empty()) {
    o << "## Same-domain metrics (mean (std) over seeds)\n\n";
    o << "| Model | Dataset | Balanced Accuracy | Accuracy | F1-score | Precision | Recall | Seeds |\n";
    o << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : run.metrics) {
      o << "| " << r.model_id << " | " << r.dataset_id;
      for (const auto& s : r.metrics) o << " | " << mean_std_cell(s);
      o << " | " << r.seeds << " |\n";
    }
    o << '\n';
  }
  if (!run.transfer.empty()) {
    o << "## Transfer (balanced accuracy)\n\n| Model | Train | Evaluated on | Balanced Accuracy |\n|---|---|---|---|\n";
    for (const auto& r : run.transfer)
      o << "| " << r.model_id << " | " << r.train_dataset << " | " << r.eval_dataset << " | "
        << (r.balanced_accuracy ? mean_std_cell(*r.balanced_accuracy) : "unavailable: " + r.unavailable) << " |\n";
    o << '\n';
  }
  if (!run.gaps.empty()) {
    o << "## Per-class recall gap\n\nReported as a difference of recalls in percentage points, "
         "not as a relative difference.\n\n| Model | Dataset | Classes | Gap (points) |\n|---|---|---|---|\n";
    for (const auto& r : run.gaps)
      o << "| " << r.model_id << " | " << r.dataset_id << " | " << r.class_a << " - " << r.class_b << " | "
        << fmt(r.gap_points.mean, 2) << " (" << fmt(r.gap_points.std, 2) << ") |\n";
    o << '\n';
  }
  if (!run.agreement.empty()) {
    o << "## Agreement (kappa)\n\n| Dataset | Mode | Model i | Model j | Kappa |\n|---|---|---|---|---|\n";
    for (const auto& r : run.agreement)
      o << "| " << r.dataset_id << " | " << r.mode << " | " << r.model_i << " | " << r.model_j << " | "
        << (r.kappa ? mean_std_cell(*r.kappa) : std::string("degenerate")) << " |\n";
    o << '\n';
  }
  if (!a.datasets.empty()) {
    o << "## Datasets\n\n";
    std::istringstream csv(dataset_stats_csv(a, run));
    std::string line;
    bool head = true;
    while (std::getline(csv, line)) {
      std::string row = "| ";
      for (char c : line) row += c == ',' ? std::string(" | ") : std::string(1, c);
      o << row << " |\n";
      if (head) {
        o << '|';
        for (std::size_t i = 0; i <= a.datasets.size(); ++i) o << "---|";
        o << '\n';
        head = false;
      }
    }
  }
  return o.str();
}

inline std::vector<std::string> emit_report(const RunArtifacts& a, const std::filesystem::path& out_dir) {
  auto files = emit_tables(a, out_dir);
  for (auto& f : emit_charts(a, out_dir)) files.push_back(std::move(f));
  report_detail::write_text(out_dir / "summary.md", summary_markdown(a));
  files.push_back("summary.md");
  return files;
}

}  // namespace recipro
