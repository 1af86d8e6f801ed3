#include "stance/ensemble_vote.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <set>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

void check_tie_break(const std::vector<StanceLabel>& tie_break) {
  std::set<StanceLabel> seen(tie_break.begin(), tie_break.end());
  if (tie_break.size() != kNumLabels || seen.size() != kNumLabels) {
    throw ConfigError("tie-break order must list FAVOR, AGAINST and NONE once each");
  }
}

}  // namespace

StanceLabel majority(const std::vector<StanceLabel>& labels, const std::vector<StanceLabel>& tie_break) {
  if (labels.empty()) throw ValidationError("majority of an empty label list");
  check_tie_break(tie_break);
  std::array<std::size_t, kNumLabels> counts{};
  for (StanceLabel l : labels) ++counts[index_of(l)];
  StanceLabel best = tie_break.front();
  for (StanceLabel l : tie_break) {
    if (counts[index_of(l)] > counts[index_of(best)]) best = l;
  }
  return best;
}

std::vector<StanceLabel> default_tie_break(const std::vector<StanceLabel>& train_labels) {
  std::array<std::size_t, kNumLabels> counts{};
  for (StanceLabel l : train_labels) ++counts[index_of(l)];
  std::vector<StanceLabel> order{StanceLabel::kAgainst, StanceLabel::kFavor, StanceLabel::kNone};
  std::stable_sort(order.begin(), order.end(),
                   [&](StanceLabel a, StanceLabel b) { return counts[index_of(a)] > counts[index_of(b)]; });
  return order;
}

void VoteConfig::validate() const {
  if (num_runs == 0) throw ConfigError("vote scheme needs at least one run");
  if (checkpoint_epochs.empty()) throw ConfigError("vote scheme needs at least one checkpoint epoch");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }
  if (static_cast<double>(num_runs) * validation_fraction > 1.0 + 1e-9) {
    throw ConfigError("validation folds cannot be disjoint: num_runs * validation_fraction > 1");
  }
  if (!tie_break.empty()) check_tie_break(tie_break);
  if (threads == 0) throw ConfigError("threads must be positive");
}

std::vector<std::size_t> epoch_range(std::size_t first, std::size_t last) {
  if (first == 0 || first > last) throw ConfigError("epoch range must be nonempty and 1-based");
  std::vector<std::size_t> out(last - first + 1);
  std::iota(out.begin(), out.end(), first);
  return out;
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run) {
  std::mt19937_64 rng(master_seed);
  rng.discard(run);
  return rng();
}

std::vector<std::vector<std::size_t>> validation_folds(std::size_t n, std::size_t num_runs,
                                                       double fraction, std::uint64_t seed) {
  if (num_runs == 0) throw ConfigError("need at least one fold");
  if (static_cast<double>(num_runs) * fraction > 1.0 + 1e-9) {
    throw ConfigError("validation folds cannot be disjoint: num_runs * validation_fraction > 1");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> folds(num_runs);
  const bool partition = std::abs(static_cast<double>(num_runs) * fraction - 1.0) <= 1e-9;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < num_runs; ++k) {
    const std::size_t size = partition ? n / num_runs + (k < n % num_runs ? 1 : 0)
                                       : static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    folds[k].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                    idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[k].begin(), folds[k].end());
    pos += size;
  }
  return folds;
}

PredictionMatrix::PredictionMatrix(std::size_t runs, std::vector<std::size_t> checkpoint_epochs,
                                   std::vector<std::string> post_ids)
    : runs_(runs), epochs_(std::move(checkpoint_epochs)), ids_(std::move(post_ids)) {
  if (runs_ == 0 || epochs_.empty()) throw ConfigError("prediction matrix needs runs and checkpoints");
  cells_.assign(runs_ * epochs_.size() * ids_.size(), StanceLabel::kNone);
  filled_.assign(cells_.size(), false);
}

std::size_t PredictionMatrix::index(std::size_t run, std::size_t checkpoint, std::size_t post) const {
  if (run >= runs_ || checkpoint >= epochs_.size() || post >= ids_.size()) {
    throw ValidationError("prediction matrix cell out of range");
  }
  return (run * epochs_.size() + checkpoint) * ids_.size() + post;
}

void PredictionMatrix::set(std::size_t run, std::size_t checkpoint, std::size_t post, StanceLabel label) {
  const std::size_t i = index(run, checkpoint, post);
  cells_[i] = label;
  filled_[i] = true;
}

StanceLabel PredictionMatrix::get(std::size_t run, std::size_t checkpoint, std::size_t post) const {
  const std::size_t i = index(run, checkpoint, post);
  if (!filled_[i]) throw ValidationError("prediction matrix cell is empty");
  return cells_[i];
}

bool PredictionMatrix::complete() const {
  return std::all_of(filled_.begin(), filled_.end(), [](bool b) { return b; });
}

void PredictionMatrix::save(const std::filesystem::path& path,
                            const std::vector<std::string>& header_comments) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write prediction matrix: " + path.string());
  for (const std::string& c : header_comments) out << "# " << c << '\n';
  out << "run\tepoch\tpost_id\tlabel\n";
  for (std::size_t r = 0; r < runs_; ++r) {
    for (std::size_t c = 0; c < epochs_.size(); ++c) {
      for (std::size_t p = 0; p < ids_.size(); ++p) {
        out << r << '\t' << epochs_[c] << '\t' << ids_[p] << '\t' << to_string(get(r, c, p)) << '\n';
      }
    }
  }
}

PredictionMatrix PredictionMatrix::load(const std::filesystem::path& path) {
  struct Row {
    std::size_t run;
    std::size_t epoch;
    std::string id;
    StanceLabel label;
  };
  const std::vector<std::string> lines = read_lines(path);
  std::vector<Row> rows;
  bool header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const auto parts = split(lines[i], '\t');
    if (!header) {
      if (lines[i] != "run\tepoch\tpost_id\tlabel") throw ParseError(path.string(), i + 1, "missing header");
      header = true;
      continue;
    }
    if (parts.size() != 4) throw ParseError(path.string(), i + 1, "expected 4 columns");
    const auto label = try_parse_label(parts[3]);
    if (!label) throw ParseError(path.string(), i + 1, "unknown label '" + parts[3] + "'");
    try {
      rows.push_back({std::stoul(parts[0]), std::stoul(parts[1]), parts[2], *label});
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), i + 1, "bad run or epoch number");
    }
  }
  if (rows.empty()) throw ValidationError(path.string() + ": empty prediction matrix");
  std::size_t runs = 0;
  std::vector<std::size_t> epochs;
  std::vector<std::string> ids;
  std::map<std::size_t, std::size_t> epoch_pos;
  std::map<std::string, std::size_t> id_pos;
  for (const Row& r : rows) {
    runs = std::max(runs, r.run + 1);
    if (epoch_pos.emplace(r.epoch, epochs.size()).second) epochs.push_back(r.epoch);
    if (id_pos.emplace(r.id, ids.size()).second) ids.push_back(r.id);
  }
  PredictionMatrix m(runs, epochs, ids);
  for (const Row& r : rows) m.set(r.run, epoch_pos[r.epoch], id_pos[r.id], r.label);
  if (!m.complete()) throw ValidationError(path.string() + ": prediction matrix has missing cells");
  return m;
}

std::vector<StanceLabel> vote(const PredictionMatrix& m, const std::vector<StanceLabel>& tie_break) {
  if (!m.complete()) throw ValidationError("cannot vote on an incomplete prediction matrix");
  const std::size_t checkpoints = m.checkpoint_epochs().size();
  std::vector<StanceLabel> out;
  std::vector<StanceLabel> per_run(m.runs());
  std::vector<StanceLabel> per_ckpt(checkpoints);
  for (std::size_t p = 0; p < m.post_ids().size(); ++p) {
    for (std::size_t r = 0; r < m.runs(); ++r) {
      for (std::size_t c = 0; c < checkpoints; ++c) per_ckpt[c] = m.get(r, c, p);
      per_run[r] = majority(per_ckpt, tie_break);
    }
    out.push_back(majority(per_run, tie_break));
  }
  return out;
}

VoteResult run_vote_scheme(const RunTrainer& trainer, const std::vector<StanceLabel>& train_labels,
                           const std::vector<std::string>& test_ids, const VoteConfig& cfg) {
  cfg.validate();
  if (train_labels.empty()) throw ValidationError("vote scheme: empty training set");
  const std::vector<StanceLabel> tie_break =
      cfg.tie_break.empty() ? default_tie_break(train_labels) : cfg.tie_break;
  const auto folds =
      validation_folds(train_labels.size(), cfg.num_runs, cfg.validation_fraction, cfg.master_seed);

  std::vector<RunSpec> specs;
  for (std::size_t r = 0; r < cfg.num_runs; ++r) {
    RunSpec s;
    s.run = r;
    s.seed = run_seed(cfg.master_seed, r);
    s.validation_idx = folds[r];
    std::vector<bool> held(train_labels.size(), false);
    for (std::size_t i : folds[r]) held[i] = true;
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
      if (!held[i]) s.train_idx.push_back(i);
    }
    if (s.train_idx.empty()) throw ValidationError("vote scheme: a run has no training data");
    specs.push_back(std::move(s));
  }

  std::vector<std::map<std::size_t, std::vector<StanceLabel>>> outputs(cfg.num_runs);
  for (std::size_t start = 0; start < specs.size(); start += cfg.threads) {
    const std::size_t end = std::min(specs.size(), start + cfg.threads);
    std::vector<std::future<std::map<std::size_t, std::vector<StanceLabel>>>> jobs;
    for (std::size_t r = start; r < end; ++r) {
      jobs.push_back(std::async(cfg.threads > 1 ? std::launch::async : std::launch::deferred,
                                [&, r] { return trainer(specs[r], cfg.checkpoint_epochs); }));
    }
    for (std::size_t r = start; r < end; ++r) outputs[r] = jobs[r - start].get();
  }

  PredictionMatrix matrix(cfg.num_runs, cfg.checkpoint_epochs, test_ids);
  for (std::size_t r = 0; r < cfg.num_runs; ++r) {
    for (std::size_t c = 0; c < cfg.checkpoint_epochs.size(); ++c) {
      const auto it = outputs[r].find(cfg.checkpoint_epochs[c]);
      if (it == outputs[r].end()) {
        throw Error("run " + std::to_string(r) + " produced no predictions at epoch " +
                    std::to_string(cfg.checkpoint_epochs[c]));
      }
      if (it->second.size() != test_ids.size()) {
        throw Error("run " + std::to_string(r) + " predicted " + std::to_string(it->second.size()) +
                    " of " + std::to_string(test_ids.size()) + " test posts");
      }
      for (std::size_t p = 0; p < test_ids.size(); ++p) matrix.set(r, c, p, it->second[p]);
    }
  }
  std::vector<StanceLabel> labels = vote(matrix, tie_break);
  return {std::move(labels), std::move(matrix), folds, tie_break};
}

RunTrainer neural_run_trainer(ModelConfig model, TrainSchedule schedule,
                              const std::vector<EncodedPost>& train_posts,
                              const std::vector<EncodedPost>& test_posts) {
  return [model, schedule, &train_posts, &test_posts](const RunSpec& spec,
                                                      const std::vector<std::size_t>& checkpoints) {
    ModelConfig mc = model;
    mc.init_seed = spec.seed;
    TrainSchedule sc = schedule;
    sc.seed = spec.seed;
    const std::size_t last = *std::max_element(checkpoints.begin(), checkpoints.end());
    sc.epochs_max = last;
    sc.epochs_min = std::min(sc.epochs_min, last);
    sc.record_train_loss = false;
    std::vector<EncodedPost> tr;
    for (std::size_t i : spec.train_idx) tr.push_back(train_posts.at(i));
    std::vector<EncodedPost> val;
    for (std::size_t i : spec.validation_idx) val.push_back(train_posts.at(i));
    const std::set<std::size_t> wanted(checkpoints.begin(), checkpoints.end());
    std::map<std::size_t, std::vector<StanceLabel>> out;
    auto net = make_model(mc);
    train(*net, tr, val, sc, [&](std::size_t epoch, NeuralModel& m) {
      if (!wanted.count(epoch)) return;
      std::vector<StanceLabel> pred;
      for (const EncodedPost& p : test_posts) pred.push_back(m.predict(p));
      out[epoch] = std::move(pred);
    });
    return out;
  };
}

}  // namespace stance
