#include "stance/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

constexpr const char* kMissingCell = "\xE2\x80\x94";  // U+2014

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

nlohmann::ordered_json label_array(const std::array<double, kNumLabels>& v) {
  nlohmann::ordered_json j;
  for (StanceLabel l : kAllLabels) j[to_string(l)] = v[index_of(l)];
  return j;
}

}  // namespace

void ConfusionMatrix::add(StanceLabel gold, StanceLabel pred) {
  ++counts[index_of(gold)][index_of(pred)];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) counts[g][p] += o.counts[g][p];
  }
  return *this;
}

MetricReport report_from_confusion(const ConfusionMatrix& cm) {
  MetricReport r;
  r.confusion = cm;
  r.count = cm.total();
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    ClassScores& s = r.per_class[c];
    s.tp = cm.counts[c][c];
    for (std::size_t o = 0; o < kNumLabels; ++o) {
      if (o == c) continue;
      s.fp += cm.counts[o][c];
      s.fn += cm.counts[c][o];
    }
    s.precision = safe_div(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fp));
    s.recall = safe_div(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn));
    // Same value as 2PR/(P+R) with a single rounding.
    s.f1 = safe_div(2.0 * static_cast<double>(s.tp), static_cast<double>(2 * s.tp + s.fp + s.fn));
  }
  r.official = (r.per_class[index_of(StanceLabel::kFavor)].f1 +
                r.per_class[index_of(StanceLabel::kAgainst)].f1) /
               2.0;
  return r;
}

MetricReport macro_f1_favor_against(const std::vector<StanceLabel>& pred,
                                    const std::vector<StanceLabel>& gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("metric: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw ValidationError("metric: no predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return report_from_confusion(cm);
}

MetricReport pooled_overall(const std::vector<TopicPredictions>& topics) {
  if (topics.empty()) throw ValidationError("pooled metric: no topics");
  ConfusionMatrix cm;
  for (const TopicPredictions& t : topics) {
    cm += macro_f1_favor_against(t.pred, t.gold).confusion;
  }
  return report_from_confusion(cm);
}

ErrorAnalysisReport all_models_missed(
    const std::map<std::string, std::vector<StanceLabel>>& model_predictions,
    const std::vector<Post>& posts) {
  if (model_predictions.empty()) throw ValidationError("error analysis: no models");
  ErrorAnalysisReport report;
  for (const auto& [name, preds] : model_predictions) {
    if (preds.size() != posts.size()) {
      throw ValidationError("error analysis: model " + name + " has " +
                            std::to_string(preds.size()) + " predictions for " +
                            std::to_string(posts.size()) + " posts");
    }
    report.models.push_back(name);
  }
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const Post& p = posts[i];
    bool any_correct = false;
    for (const auto& [name, preds] : model_predictions) any_correct = any_correct || preds[i] == p.gold;
    if (any_correct) continue;
    MissedPost m{p.topic, p.id, p.text, p.gold, {}};
    for (const auto& [name, preds] : model_predictions) m.predictions[name] = preds[i];
    report.posts.push_back(std::move(m));
    ++report.per_topic[p.topic];
  }
  return report;
}

ComparisonTable render_comparison(const std::vector<ModelResults>& results,
                                  const std::vector<std::string>& topics,
                                  const std::vector<ModelResults>& reference_rows) {
  ComparisonTable t;
  t.columns = topics;
  t.columns.push_back("TOTAL");
  auto add_row = [&](const ModelResults& m, bool reference) {
    ComparisonTable::Row row{m.model, {}, reference};
    for (const std::string& topic : topics) {
      const auto it = m.per_topic.find(topic);
      row.cells.push_back(it == m.per_topic.end() ? std::nullopt : std::optional<double>(it->second));
    }
    row.cells.push_back(m.total);
    t.rows.push_back(std::move(row));
  };
  for (const ModelResults& m : results) add_row(m, false);
  for (const ModelResults& m : reference_rows) add_row(m, true);

  t.best.assign(t.columns.size(), std::nullopt);
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& cell = t.rows[r].cells[c];
      if (t.rows[r].reference || !cell) continue;
      if (!t.best[c] || *cell > *t.rows[*t.best[c]].cells[c]) t.best[c] = r;
    }
  }
  return t;
}

std::string ComparisonTable::to_text() const {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Model"});
  for (const std::string& c : columns) grid.back().push_back(c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> line{rows[r].reference ? rows[r].model + " (reported)" : rows[r].model};
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = rows[r].cells[c];
      std::string s = cell ? fmt3(*cell) : kMissingCell;
      if (best[c] && *best[c] == r) s += "*";
      line.push_back(s);
    }
    grid.push_back(std::move(line));
  }
  // Display width counts UTF-8 code points.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(columns.size() + 1, 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
  }
  std::string out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) out += "  ";
      const std::string pad(widths[i] - width(line[i]), ' ');
      out += i == 0 ? line[i] + pad : pad + line[i];
    }
    out += '\n';
  }
  return out;
}

std::string ComparisonTable::to_tsv() const {
  std::string out = "model\treference";
  for (const std::string& c : columns) out += "\t" + c;
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += rows[r].model + "\t" + (rows[r].reference ? "1" : "0");
    for (const auto& cell : rows[r].cells) out += "\t" + (cell ? fmt3(*cell) : std::string(kMissingCell));
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json ComparisonTable::to_json() const {
  nlohmann::ordered_json j;
  j["columns"] = columns;
  j["rows"] = nlohmann::ordered_json::array();
  for (const Row& row : rows) {
    nlohmann::ordered_json r;
    r["model"] = row.model;
    r["reference"] = row.reference;
    nlohmann::ordered_json cells;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      cells[columns[c]] = row.cells[c] ? nlohmann::ordered_json(*row.cells[c]) : nullptr;
    }
    r["cells"] = cells;
    j["rows"].push_back(r);
  }
  nlohmann::ordered_json b;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    b[columns[c]] = best[c] ? nlohmann::ordered_json(rows[*best[c]].model) : nullptr;
  }
  j["best"] = b;
  return j;
}

std::vector<std::string> reference_topics(Benchmark b) {
  if (b == Benchmark::kSemEval) return {"AT", "CC", "LA", "FM", "HC"};
  return {"HRT", "EC", "VC", "SC", "MMR"};
}

std::vector<ModelResults> reference_results(Benchmark b) {
  struct Ref {
    const char* model;
    std::array<double, 6> v;
  };
  static const std::vector<Ref> semeval = {
      {"TAN", {0.628, 0.430, 0.567, 0.590, 0.728, 0.690}},
      {"TAN-", {0.638, 0.440, 0.572, 0.542, 0.724, 0.692}},
      {"LSTM", {0.629, 0.429, 0.628, 0.571, 0.611, 0.687}},
      {"SEN", {0.590, 0.39, 0.575, 0.510, 0.565, 0.630}},
      {"CNN", {0.641, 0.445, 0.684, 0.552, 0.675, 0.706}},
      {"BERT", {0.743, 0.446, 0.657, 0.650, 0.713, 0.751}},
      {"Two-step SVM", {0.410, 0.419, 0.436, 0.496, 0.488, 0.631}},
      {"Two-step SVM + frame semantics", {0.725, 0.535, 0.836, 0.787, 0.797, 0.744}},
  };
  static const std::vector<Ref> mpchi = {
      {"TAN", {0.347, 0.580, 0.421, 0.507, 0.671, 0.586}},
      {"TAN-", {0.569, 0.583, 0.578, 0.468, 0.608, 0.589}},
      {"LSTM", {0.464, 0.609, 0.592, 0.575, 0.665, 0.631}},
      {"SEN", {0.480, 0.605, 0.405, 0.445, 0.615, 0.540}},
      {"CNN", {0.359, 0.539, 0.524, 0.252, 0.524, 0.551}},
      {"BERT", {0.669, 0.780, 0.647, 0.769, 0.782, 0.756}},
      {"Two-step SVM", {0.470, 0.297, 0.409, 0.293, 0.455, 0.519}},
  };
  const auto topics = reference_topics(b);
  std::vector<ModelResults> out;
  for (const Ref& r : b == Benchmark::kSemEval ? semeval : mpchi) {
    ModelResults m{r.model, {}, r.v[5]};
    for (std::size_t i = 0; i < topics.size(); ++i) m.per_topic[topics[i]] = r.v[i];
    out.push_back(std::move(m));
  }
  return out;
}

EffectReport preprocessing_effect(const MetricReport& before, const MetricReport& after) {
  EffectReport e;
  e.official_before = before.official;
  e.official_after = after.official;
  e.official_delta = after.official - before.official;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    e.precision_delta[c] = after.per_class[c].precision - before.per_class[c].precision;
    e.recall_delta[c] = after.per_class[c].recall - before.per_class[c].recall;
    e.f1_delta[c] = after.per_class[c].f1 - before.per_class[c].f1;
  }
  return e;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["official"] = r.official;
  j["count"] = r.count;
  nlohmann::ordered_json classes;
  for (StanceLabel l : kAllLabels) {
    const ClassScores& s = r.per_class[index_of(l)];
    classes[to_string(l)] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                             {"tp", s.tp},           {"fp", s.fp},         {"fn", s.fn}};
  }
  j["classes"] = classes;
  nlohmann::ordered_json cm;
  for (StanceLabel g : kAllLabels) {
    nlohmann::ordered_json row;
    for (StanceLabel p : kAllLabels) row[to_string(p)] = r.confusion.counts[index_of(g)][index_of(p)];
    cm[to_string(g)] = row;
  }
  j["confusion"] = cm;
  return j;
}

nlohmann::ordered_json to_json(const ErrorAnalysisReport& r) {
  nlohmann::ordered_json j;
  j["models"] = r.models;
  j["count"] = r.size();
  j["per_topic"] = r.per_topic;
  j["posts"] = nlohmann::ordered_json::array();
  for (const MissedPost& p : r.posts) {
    nlohmann::ordered_json preds;
    for (const auto& [m, l] : p.predictions) preds[m] = to_string(l);
    j["posts"].push_back({{"topic", p.topic},
                          {"id", p.id},
                          {"gold", to_string(p.gold)},
                          {"text", p.text},
                          {"predictions", preds}});
  }
  return j;
}

nlohmann::ordered_json to_json(const EffectReport& r) {
  nlohmann::ordered_json j;
  j["official_before"] = r.official_before;
  j["official_after"] = r.official_after;
  j["official_delta"] = r.official_delta;
  j["precision_delta"] = label_array(r.precision_delta);
  j["recall_delta"] = label_array(r.recall_delta);
  j["f1_delta"] = label_array(r.f1_delta);
  return j;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows,
                       const std::vector<std::string>& header_comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write predictions: " + path.string());
  for (const std::string& c : header_comments) out << "# " << c << '\n';
  for (const PredictionRow& r : rows) {
    if (r.id.find_first_of("\t\n") != std::string::npos) {
      throw ValidationError("prediction id contains a tab or newline: " + r.id);
    }
    out << r.id << '\t' << to_string(r.label) << '\n';
  }
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> parts = split(lines[i], '\t');
    if (parts.size() != 2) {
      throw ParseError(path.string(), i + 1, "expected \"post_id<TAB>label\"");
    }
    const auto label = try_parse_label(parts[1]);
    if (!label) throw ParseError(path.string(), i + 1, "unknown label '" + parts[1] + "'");
    rows.push_back({std::string(trim(parts[0])), *label});
  }
  return rows;
}

}  // namespace stance
