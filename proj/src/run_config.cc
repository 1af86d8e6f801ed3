#include "stance/run_config.h"

#include <algorithm>
#include <fstream>

#include "stance/ensemble_vote.h"
#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {

using nlohmann::json;
namespace fs = std::filesystem;

std::string model_name(ModelId m) {
  switch (m) {
    case ModelId::kSen: return "sen";
    case ModelId::kTwoStep: return "two-step";
    case ModelId::kLstm: return "lstm";
    case ModelId::kCnn: return "cnn";
    case ModelId::kTan: return "tan";
    case ModelId::kTanMinus: return "tan-";
  }
  return "?";
}

const std::vector<ModelId>& all_models() {
  static const std::vector<ModelId> models = {ModelId::kSen, ModelId::kTwoStep, ModelId::kLstm,
                                              ModelId::kCnn, ModelId::kTan, ModelId::kTanMinus};
  return models;
}

std::optional<ModelId> parse_model_id(std::string_view name) {
  const std::string lower = to_lower_ascii(trim(name));
  for (ModelId m : all_models()) {
    if (model_name(m) == lower) return m;
  }
  if (lower == "tan_minus" || lower == "tanminus") return ModelId::kTanMinus;
  if (lower == "twostep" || lower == "two_step") return ModelId::kTwoStep;
  return std::nullopt;
}

std::optional<ModelKind> neural_kind(ModelId m) {
  switch (m) {
    case ModelId::kLstm: return ModelKind::kLstm;
    case ModelId::kCnn: return ModelKind::kCnn;
    case ModelId::kTan: return ModelKind::kTan;
    case ModelId::kTanMinus: return ModelKind::kTanMinus;
    default: return std::nullopt;
  }
}

namespace {

bool in(const std::string& topic, std::initializer_list<const char*> group) {
  return std::any_of(group.begin(), group.end(), [&](const char* t) { return topic == t; });
}

void set_epochs(TrainSchedule& s, std::size_t lo, std::size_t hi) {
  s.epochs_min = lo;
  s.epochs_max = hi;
}

std::size_t as_count(double v, const std::string& where) {
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Hyperparameters default_hyperparameters(const std::string& t, ModelId m) {
  Hyperparameters h;
  TrainSchedule& s = h.schedule;
  switch (m) {
    case ModelId::kTan:
    case ModelId::kTanMinus:
      s.learning_rate = 5e-4;
      s.batch_size = 50;
      s.dropout = 0.5;
      if (in(t, {"AT", "HRT"})) s.l2 = 1.25;
      if (in(t, {"CC", "LA", "HC"})) s.l2 = 1.0;
      if (t == "FM") s.l2 = 0.75;
      if (in(t, {"MMR", "SC", "VC", "EC"})) s.l2 = 0.25;
      if (in(t, {"AT", "LA", "VC"})) {
        set_epochs(s, 40, 50);
      } else {
        set_epochs(s, 50, 60);
      }
      break;
    case ModelId::kLstm:
      s.learning_rate = 5e-4;
      s.batch_size = 50;
      s.dropout = 0.5;
      if (in(t, {"AT", "HC", "VC", "EC"})) s.l2 = 0.25;
      if (in(t, {"CC", "LA", "MMR", "HRT", "SC"})) s.l2 = 0.5;
      if (t == "FM") s.l2 = 0.75;
      if (in(t, {"MMR", "HRT", "VC", "EC"})) {
        set_epochs(s, 30, 40);
      } else {
        set_epochs(s, 50, 60);
      }
      break;
    case ModelId::kCnn:
      // Learning rate, batch size and epochs are not given per topic; these
      // follow the usual sentence-CNN setup.
      s.learning_rate = 1e-3;
      s.batch_size = 50;
      s.dropout = 0.5;
      s.lr_decay = 0.95;
      set_epochs(s, 20, 25);
      if (in(t, {"AT", "FM", "LA", "MMR", "VC", "EC"})) s.sqr_norm_limit = 7;
      if (in(t, {"CC", "HC", "HRT"})) s.sqr_norm_limit = 8;
      if (t == "SC") s.sqr_norm_limit = 9;
      break;
    case ModelId::kSen:
      h.svm.gamma = 0.001;
      break;
    case ModelId::kTwoStep:
      break;
  }
  return h;
}

void set_hyperparameter(Hyperparameters& h, ModelId m, const std::string& key, double value,
                        const std::string& where) {
  const std::string path = where + "." + key;
  if (neural_kind(m)) {
    TrainSchedule& s = h.schedule;
    if (key == "learning_rate") s.learning_rate = value;
    else if (key == "batch_size") s.batch_size = as_count(value, path);
    else if (key == "dropout") s.dropout = value;
    else if (key == "l2") s.l2 = value;
    else if (key == "epochs_min") s.epochs_min = as_count(value, path);
    else if (key == "epochs_max") s.epochs_max = as_count(value, path);
    else if (key == "lr_decay") s.lr_decay = value;
    else if (key == "sqr_norm_limit") s.sqr_norm_limit = value;
    else throw ConfigError("unknown hyperparameter '" + path + "' for model " + model_name(m));
    return;
  }
  SvmTrainConfig& c = h.svm;
  if (key == "lambda") c.lambda = value;
  else if (key == "epochs") c.epochs = as_count(value, path);
  else if (key == "gamma") c.gamma = value;
  else if (key == "class_weighting") c.class_weighting = value != 0.0;
  else throw ConfigError("unknown hyperparameter '" + path + "' for model " + model_name(m));
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError((where.empty() ? "config" : where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + (where.empty() ? "" : ".") + key + "' has the wrong type");
  }
}

fs::path resolve_path(const std::string& raw, const fs::path& base, const std::string& key) {
  if (raw.empty()) throw ConfigError("config key '" + key + "' is empty");
  fs::path p(raw);
  if (p.is_relative()) p = base / p;
  p = p.lexically_normal();
  if (!fs::exists(p)) throw ConfigError(key + ": file not found: " + p.string());
  return p;
}

void read_path(const json& obj, const char* key, const std::string& where, const fs::path& base,
               fs::path& out) {
  std::string raw;
  if (!obj.contains(key)) return;
  read(obj, key, where, raw);
  out = resolve_path(raw, base, where + "." + key);
}

void read_path(const json& obj, const char* key, const std::string& where, const fs::path& base,
               std::optional<fs::path>& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  fs::path p;
  read_path(obj, key, where, base, p);
  out = p;
}

std::map<std::string, double> read_overrides(const json& obj, ModelId m, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::map<std::string, double> out;
  Hyperparameters probe;
  for (const auto& [key, value] : obj.items()) {
    double v = 0.0;
    if (value.is_boolean()) {
      v = value.get<bool>() ? 1.0 : 0.0;
    } else if (value.is_number()) {
      v = value.get<double>();
    } else {
      throw ConfigError("config key '" + where + "." + key + "' must be a number");
    }
    set_hyperparameter(probe, m, key, v, where);
    out[key] = v;
  }
  return out;
}

ModelId require_model(const std::string& name, const std::string& where) {
  const auto m = parse_model_id(name);
  if (!m) throw ConfigError(where + ": unknown model '" + name + "'");
  return *m;
}

json opt_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  RunConfig c;
  check_keys(j, "", {"data", "topics", "preprocess", "model", "compare_models", "seed", "output_dir",
                     "neural", "vote", "tune", "model_overrides", "topic_overrides"});

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"semeval_train", "semeval_test", "mpchi", "mpchi_split", "embeddings",
                           "frequency_table", "normalization_lexicon", "stopwords",
                           "subjectivity_lexicon", "pos_dictionary"});
    read_path(d, "semeval_train", "data", base, c.data.semeval_train);
    read_path(d, "semeval_test", "data", base, c.data.semeval_test);
    read_path(d, "embeddings", "data", base, c.data.embeddings);
    read_path(d, "frequency_table", "data", base, c.data.frequency_table);
    read_path(d, "normalization_lexicon", "data", base, c.data.normalization_lexicon);
    read_path(d, "stopwords", "data", base, c.data.stopwords);
    read_path(d, "subjectivity_lexicon", "data", base, c.data.subjectivity_lexicon);
    read_path(d, "pos_dictionary", "data", base, c.data.pos_dictionary);
    if (d.contains("mpchi_split")) {
      const json& s = d.at("mpchi_split");
      check_keys(s, "data.mpchi_split", {"train_fraction", "seed", "stratified"});
      read(s, "train_fraction", "data.mpchi_split", c.data.mpchi_split.train_fraction);
      read(s, "seed", "data.mpchi_split", c.data.mpchi_split.seed);
      read(s, "stratified", "data.mpchi_split", c.data.mpchi_split.stratified);
    }
    if (d.contains("mpchi")) {
      if (!d.at("mpchi").is_array()) throw ConfigError("data.mpchi: expected a list");
      for (std::size_t i = 0; i < d.at("mpchi").size(); ++i) {
        const json& e = d.at("mpchi")[i];
        const std::string where = "data.mpchi[" + std::to_string(i) + "]";
        check_keys(e, where, {"topic", "path", "manifest", "delimiter", "text_column",
                              "label_column", "id_column"});
        MpchiSource src;
        read_path(e, "path", where, base, src.path);
        if (src.path.empty()) throw ConfigError(where + ": 'path' is required");
        read_path(e, "manifest", where, base, src.manifest);
        read(e, "topic", where, src.format.topic);
        if (src.format.topic.empty()) throw ConfigError(where + ": 'topic' is required");
        std::string delim = ",";
        read(e, "delimiter", where, delim);
        if (delim == "\\t" || delim == "tab") delim = "\t";
        if (delim.size() != 1) throw ConfigError(where + ".delimiter: expected one character");
        src.format.delimiter = delim[0];
        read(e, "text_column", where, src.format.text_column);
        read(e, "label_column", where, src.format.label_column);
        read(e, "id_column", where, src.format.id_column);
        c.data.mpchi.push_back(src);
      }
    }
  }

  read(j, "topics", "", c.topics);
  if (j.contains("preprocess")) {
    const json& p = j.at("preprocess");
    check_keys(p, "preprocess", {"normalization", "hashtag_split", "microblog", "drop_semst"});
    read(p, "normalization", "preprocess", c.preprocess.normalization);
    read(p, "hashtag_split", "preprocess", c.preprocess.hashtag_split);
    read(p, "microblog", "preprocess", c.preprocess.microblog);
    read(p, "drop_semst", "preprocess", c.preprocess.drop_semst);
  }
  if (j.contains("model")) {
    std::string name;
    read(j, "model", "", name);
    c.model = require_model(name, "model");
  }
  read(j, "compare_models", "", c.compare_models);
  for (const std::string& n : c.compare_models) {
    if (n.empty()) throw ConfigError("compare_models: empty model name");
  }
  read(j, "seed", "", c.seed);
  if (j.contains("output_dir")) {
    std::string out;
    read(j, "output_dir", "", out);
    c.output_dir = fs::path(out).is_relative() ? (base / out).lexically_normal() : fs::path(out);
  }
  if (j.contains("neural")) {
    const json& n = j.at("neural");
    check_keys(n, "neural", {"embed_dim", "hidden", "cnn_filters", "cnn_widths", "fine_tune",
                             "validation_fraction"});
    read(n, "embed_dim", "neural", c.neural.embed_dim);
    read(n, "hidden", "neural", c.neural.hidden);
    read(n, "cnn_filters", "neural", c.neural.cnn_filters);
    read(n, "cnn_widths", "neural", c.neural.cnn_widths);
    read(n, "fine_tune", "neural", c.neural.fine_tune);
    read(n, "validation_fraction", "neural", c.neural.validation_fraction);
    if (c.neural.embed_dim == 0 || c.neural.hidden == 0 || c.neural.cnn_filters == 0 ||
        c.neural.cnn_widths.empty()) {
      throw ConfigError("neural: sizes must be positive");
    }
    if (c.neural.validation_fraction < 0.0 || c.neural.validation_fraction >= 1.0) {
      throw ConfigError("neural.validation_fraction must be in [0, 1)");
    }
  }
  if (j.contains("vote")) {
    const json& v = j.at("vote");
    check_keys(v, "vote", {"enabled", "runs", "validation_fraction", "threads"});
    read(v, "enabled", "vote", c.vote.enabled);
    read(v, "runs", "vote", c.vote.runs);
    read(v, "validation_fraction", "vote", c.vote.validation_fraction);
    read(v, "threads", "vote", c.vote.threads);
    VoteConfig probe;
    probe.num_runs = c.vote.runs;
    probe.validation_fraction = c.vote.validation_fraction;
    probe.checkpoint_epochs = {1};
    probe.threads = c.vote.threads;
    probe.validate();
  }
  if (j.contains("tune")) {
    const json& t = j.at("tune");
    check_keys(t, "tune", {"folds", "grid"});
    read(t, "folds", "tune", c.tune.folds);
    if (c.tune.folds < 2) throw ConfigError("tune.folds must be at least 2");
    if (t.contains("grid")) {
      if (!t.at("grid").is_object()) throw ConfigError("tune.grid: expected an object");
      for (const auto& [key, values] : t.at("grid").items()) {
        std::vector<double> vs;
        try {
          vs = values.get<std::vector<double>>();
        } catch (const json::exception&) {
          throw ConfigError("tune.grid." + key + ": expected a list of numbers");
        }
        if (vs.empty()) throw ConfigError("tune.grid." + key + ": empty candidate list");
        c.tune.grid[key] = vs;
      }
    }
  }
  if (j.contains("model_overrides")) {
    const json& mo = j.at("model_overrides");
    if (!mo.is_object()) throw ConfigError("model_overrides: expected an object");
    for (const auto& [name, obj] : mo.items()) {
      const ModelId m = require_model(name, "model_overrides");
      c.model_overrides[model_name(m)] = read_overrides(obj, m, "model_overrides." + name);
    }
  }
  if (j.contains("topic_overrides")) {
    const json& to = j.at("topic_overrides");
    if (!to.is_object()) throw ConfigError("topic_overrides: expected an object");
    for (const auto& [topic, models] : to.items()) {
      if (!models.is_object()) throw ConfigError("topic_overrides." + topic + ": expected an object");
      for (const auto& [name, obj] : models.items()) {
        const ModelId m = require_model(name, "topic_overrides." + topic);
        c.topic_overrides[topic][model_name(m)] =
            read_overrides(obj, m, "topic_overrides." + topic + "." + name);
      }
    }
  }
  // Grid keys must exist for the configured model.
  Hyperparameters probe;
  for (const auto& [key, values] : c.tune.grid) set_hyperparameter(probe, c.model, key, values[0], "tune.grid");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  json j;
  json d;
  d["semeval_train"] = opt_path(data.semeval_train);
  d["semeval_test"] = opt_path(data.semeval_test);
  json mp = json::array();
  for (const MpchiSource& s : data.mpchi) {
    mp.push_back({{"topic", s.format.topic},
                  {"path", s.path.string()},
                  {"manifest", opt_path(s.manifest)},
                  {"delimiter", std::string(1, s.format.delimiter)},
                  {"text_column", s.format.text_column},
                  {"label_column", s.format.label_column},
                  {"id_column", s.format.id_column}});
  }
  d["mpchi"] = mp;
  d["mpchi_split"] = {{"train_fraction", data.mpchi_split.train_fraction},
                      {"seed", data.mpchi_split.seed},
                      {"stratified", data.mpchi_split.stratified}};
  d["embeddings"] = opt_path(data.embeddings);
  d["frequency_table"] = data.frequency_table.string();
  d["normalization_lexicon"] = data.normalization_lexicon.string();
  d["stopwords"] = data.stopwords.string();
  d["subjectivity_lexicon"] = data.subjectivity_lexicon.string();
  d["pos_dictionary"] = data.pos_dictionary.string();
  j["data"] = d;
  j["topics"] = topics;
  j["preprocess"] = {{"normalization", preprocess.normalization},
                     {"hashtag_split", preprocess.hashtag_split},
                     {"microblog", preprocess.microblog},
                     {"drop_semst", preprocess.drop_semst}};
  j["model"] = model_name(model);
  j["compare_models"] = compare_models;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["neural"] = {{"embed_dim", neural.embed_dim},     {"hidden", neural.hidden},
                 {"cnn_filters", neural.cnn_filters}, {"cnn_widths", neural.cnn_widths},
                 {"fine_tune", neural.fine_tune},     {"validation_fraction", neural.validation_fraction}};
  j["vote"] = {{"enabled", vote.enabled},
               {"runs", vote.runs},
               {"validation_fraction", vote.validation_fraction},
               {"threads", vote.threads}};
  j["tune"] = {{"folds", tune.folds}, {"grid", tune.grid}};
  j["model_overrides"] = model_overrides;
  j["topic_overrides"] = topic_overrides;
  return j;
}

std::uint64_t RunConfig::hash() const {
  // Thread count does not change results.
  json j = to_json();
  j["vote"].erase("threads");
  return fnv1a64(j.dump());
}

std::string RunConfig::hash_hex() const { return hex64(hash()); }

Hyperparameters RunConfig::resolve(const std::string& topic, ModelId m) const {
  Hyperparameters h = default_hyperparameters(topic, m);
  h.schedule.seed = seed;
  h.svm.seed = seed;
  const std::string name = model_name(m);
  if (const auto it = model_overrides.find(name); it != model_overrides.end()) {
    for (const auto& [k, v] : it->second) set_hyperparameter(h, m, k, v, "model_overrides." + name);
  }
  if (const auto t = topic_overrides.find(topic); t != topic_overrides.end()) {
    if (const auto it = t->second.find(name); it != t->second.end()) {
      for (const auto& [k, v] : it->second) {
        set_hyperparameter(h, m, k, v, "topic_overrides." + topic + "." + name);
      }
    }
  }
  if (neural_kind(m)) h.schedule.validate();
  return h;
}

std::string RunConfig::stamp() const {
  return "config_hash=" + hash_hex() + " seed=" + std::to_string(seed);
}

}  // namespace stance
