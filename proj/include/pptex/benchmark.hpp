#pragma once

// Protocol runner over a descriptor cache: per round, fit KL + LDA on the
// training rows only, classify the test rows, and accumulate a confusion
// matrix (rows = true class, columns = predicted class) across rounds.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pptex/cache.hpp"
#include "pptex/dataset.hpp"
#include "pptex/error.hpp"
#include "pptex/ml.hpp"

namespace pptex {

enum class Protocol { Kth2b, Uiuc };

inline const char* to_string(Protocol p) { return p == Protocol::Kth2b ? "kth2b" : "uiuc"; }

inline Protocol parse_protocol(const std::string& s) {
  if (s == "kth2b") return Protocol::Kth2b;
  if (s == "uiuc") return Protocol::Uiuc;
  throw ConfigError("unknown protocol '" + s + "' (expected kth2b or uiuc)");
}

struct BenchmarkOptions {
  Protocol protocol = Protocol::Uiuc;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};  // uiuc only
  std::size_t train_per_class = 0;                                  // uiuc only; 0 = half
  KLOptions kl;
};

struct RunReport {
  std::string protocol;
  std::vector<std::string> classes;
  std::vector<std::string> round_names;
  std::vector<double> per_round_accuracy;
  std::vector<std::size_t> test_sizes;
  double mean_accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
  nlohmann::json config_echo = nlohmann::json::object();
};

/// Outcome of one train/test round.
struct RoundResult {
  double accuracy = 0.0;
  std::size_t tests = 0;
  std::size_t retained_dims = 0;
};

/// Fits on plan.train_ids and scores plan.test_ids; adds into `confusion`
/// indexed by position in `classes`.
inline RoundResult run_round(const std::vector<CacheRow>& rows, const SplitPlan& plan,
                             const std::vector<std::string>& classes, const KLOptions& kl,
                             std::vector<std::vector<std::size_t>>& confusion) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < rows.size(); ++i) row_of.emplace(rows[i].id, i);
  std::unordered_map<std::string, std::size_t> class_index;
  for (std::size_t c = 0; c < classes.size(); ++c) class_index.emplace(classes[c], c);

  const Eigen::Index D = rows.empty() ? 0 : Eigen::Index(rows.front().values.size());
  Eigen::MatrixXd train(Eigen::Index(plan.train_ids.size()), D);
  std::vector<std::string> labels;
  labels.reserve(plan.train_ids.size());
  for (std::size_t i = 0; i < plan.train_ids.size(); ++i) {
    const auto& r = rows[row_of.at(plan.train_ids[i])];
    train.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(r.values.data(), D);
    labels.push_back(r.label);
  }
  const PipelineModel model = fit_pipeline(train, labels, kl);

  RoundResult res;
  res.retained_dims = model.kl.retained();
  std::size_t correct = 0;
  for (const auto& id : plan.test_ids) {
    const auto& r = rows[row_of.at(id)];
    const std::string& got = predict(model, r.values);
    ++confusion[class_index.at(r.label)][class_index.at(got)];
    if (got == r.label) ++correct;
  }
  res.tests = plan.test_ids.size();
  res.accuracy = res.tests ? double(correct) / double(res.tests) : 0.0;
  return res;
}

inline RunReport run_benchmark(const std::vector<CacheRow>& rows, const BenchmarkOptions& opt) {
  if (rows.empty()) throw InputError("benchmark: cache has no rows");
  const std::size_t D = rows.front().values.size();
  for (const auto& r : rows)
    if (r.values.size() != D) throw InputError("benchmark: cache rows have differing lengths");
  {
    std::map<std::string, int> ids;
    for (const auto& r : rows)
      if (ids[r.id]++) throw InputError("benchmark: duplicate id '" + r.id + "' in cache");
  }

  RunReport rep;
  rep.protocol = to_string(opt.protocol);
  {
    std::map<std::string, int> labels;
    for (const auto& r : rows) labels[r.label];
    for (const auto& [l, _] : labels) rep.classes.push_back(l);
  }
  rep.confusion.assign(rep.classes.size(), std::vector<std::size_t>(rep.classes.size(), 0));

  std::vector<std::size_t> dims;
  if (opt.protocol == Protocol::Kth2b) {
    for (const auto& r : rows)
      if (r.group.size() != 1 || std::string(kKthGroups).find(r.group) == std::string::npos)
        throw ConfigError("benchmark: kth2b protocol needs sample groups a-d, row '" + r.id +
                          "' has group '" + r.group + "'");
    for (int round = 1; round <= 4; ++round) {
      const auto res = run_round(rows, split_kth(rows, round), rep.classes, opt.kl, rep.confusion);
      rep.round_names.push_back("round " + std::to_string(round) + " (train sample " +
                                std::string(1, kKthGroups[round - 1]) + ")");
      rep.per_round_accuracy.push_back(res.accuracy);
      rep.test_sizes.push_back(res.tests);
      dims.push_back(res.retained_dims);
    }
  } else {
    if (opt.seeds.empty()) throw ConfigError("benchmark: uiuc protocol needs at least one seed");
    for (auto seed : opt.seeds) {
      const auto res = run_round(rows, split_uiuc(rows, seed, opt.train_per_class), rep.classes, opt.kl,
                                 rep.confusion);
      rep.round_names.push_back("seed " + std::to_string(seed));
      rep.per_round_accuracy.push_back(res.accuracy);
      rep.test_sizes.push_back(res.tests);
      dims.push_back(res.retained_dims);
    }
  }
  rep.mean_accuracy = std::accumulate(rep.per_round_accuracy.begin(), rep.per_round_accuracy.end(), 0.0) /
                      double(rep.per_round_accuracy.size());

  auto& cfg = rep.config_echo;
  cfg["protocol"] = rep.protocol;
  cfg["rows"] = rows.size();
  cfg["descriptor_length"] = D;
  cfg["kl"] = {{"variance_fraction", opt.kl.variance_fraction},
               {"eigen_floor", opt.kl.eigen_floor},
               {"cap", "n_train - n_classes"},
               {"fit_on", "training rows only"},
               {"retained_per_round", dims}};
  cfg["lda"] = {{"covariance", "pooled within-class, denominator n - c"},
                {"ridge", "1e-6 * trace / d"},
                {"priors", "uniform"},
                {"tie_break", "first class in sorted label order"}};
  if (opt.protocol == Protocol::Uiuc) {
    cfg["split"] = {{"rng", "mt19937_64, rejection-sampled bounded draws, partial Fisher-Yates"},
                    {"seeds", opt.seeds},
                    {"train_per_class", opt.train_per_class ? nlohmann::json(opt.train_per_class)
                                                            : nlohmann::json("half")}};
  } else {
    cfg["split"] = {{"rounds", 4}, {"train_sample_per_round", "a, b, c, d"}};
  }
  return rep;
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json to_json(const RunReport& r) {
  return {{"format", "pptex-report"},
          {"version", 1},
          {"protocol", r.protocol},
          {"classes", r.classes},
          {"round_names", r.round_names},
          {"per_round_accuracy", r.per_round_accuracy},
          {"test_sizes", r.test_sizes},
          {"mean_accuracy", r.mean_accuracy},
          {"confusion", r.confusion},
          {"config", r.config_echo}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "pptex-report") throw InputError("not a pptex report");
    RunReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    r.round_names = j.at("round_names").get<std::vector<std::string>>();
    r.per_round_accuracy = j.at("per_round_accuracy").get<std::vector<double>>();
    r.test_sizes = j.at("test_sizes").get<std::vector<std::size_t>>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    r.config_echo = j.value("config", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

inline std::string format_confusion_csv(const RunReport& r) {
  std::string out = "true\\predicted";
  for (const auto& c : r.classes) {
    out += ',';
    detail::append_csv_field(out, c);
  }
  out += '\n';
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    detail::append_csv_field(out, r.classes[i]);
    for (auto v : r.confusion[i]) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

inline std::string format_text(const RunReport& r) {
  std::ostringstream out;
  out << "protocol: " << r.protocol << '\n';
  out << "classes: " << r.classes.size() << '\n';
  for (std::size_t i = 0; i < r.per_round_accuracy.size(); ++i)
    out << r.round_names[i] << ": " << percent(r.per_round_accuracy[i]) << " (" << r.test_sizes[i]
        << " test images)\n";
  out << "mean accuracy: " << percent(r.mean_accuracy) << '\n';
  out << "\nconfusion matrix, summed over rounds (rows = true class, columns = predicted):\n";
  std::size_t w = 5;
  for (const auto& row : r.confusion)
    for (auto v : row) w = std::max(w, std::to_string(v).size() + 1);
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    char idx[16];
    std::snprintf(idx, sizeof idx, "%3zu", i + 1);
    out << idx;
    for (auto v : r.confusion[i]) {
      const std::string s = std::to_string(v);
      out << std::string(w - s.size(), ' ') << s;
    }
    out << "  " << r.classes[i] << '\n';
  }
  return out.str();
}

struct PublishedResult {
  const char* method;
  double accuracy_percent;
};

/// Literature accuracies for comparison on each benchmark (reference values
/// only; none of these methods is implemented here).
inline std::vector<PublishedResult> published_results(Protocol p) {
  if (p == Protocol::Kth2b)
    return {{"VZ-MR8", 46.3},         {"LBP", 50.5},           {"VZ-Joint", 53.3},
            {"BSIF", 54.3},           {"LBP-FH", 54.6},        {"CLBP", 57.3},
            {"SIFT+LLC", 57.6},       {"ELBP", 58.1},          {"SIFT+KCB", 58.3},
            {"SIFT+BoVW", 58.4},      {"LBPriu2/VAR*", 58.5},  {"PCANet (NNC)*", 59.4},
            {"RandNet (NNC)*", 60.7}, {"SIFT+VLAD", 63.1},     {"ScatNet (NNC)*", 63.7},
            {"FV-CNN AlexNet", 69.7}, {"pseudo-parabolic CLBP", 67.4}};
  return {{"RandNet (NNC)", 56.6}, {"PCANet (NNC)", 57.7}, {"BSIF", 73.4},
          {"VZ-Joint", 78.4},      {"LBPriu2/VAR", 84.4},  {"LBP", 88.4},
          {"ScatNet (NNC)", 88.6}, {"MRS4", 90.3},         {"SIFT+KCB", 91.4},
          {"MFS", 92.7},           {"VZ-MR8", 92.8},       {"DeCAF", 94.2},
          {"FC-CNN VGGM", 94.5},   {"CLBP", 95.7},         {"SIFT+BoVW", 96.1},
          {"SIFT+LLC", 96.3},      {"pseudo-parabolic CLBP", 98.0}};
}

/// Writes summary.txt, confusion.csv and run.json into `dir`.
inline void write_report(const std::filesystem::path& dir, const RunReport& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw IoError("write failed for " + (dir / name).string());
  };
  put("summary.txt", format_text(r));
  put("confusion.csv", format_confusion_csv(r));
  put("run.json", to_json(r).dump(2) + "\n");
}

/// Accepts the report directory or its run.json.
inline RunReport read_report(const std::filesystem::path& where) {
  const auto path = std::filesystem::is_directory(where) ? where / "run.json" : where;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read report " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed report " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace pptex
