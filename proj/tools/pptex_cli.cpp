// pptex: evolve images, extract descriptor caches, run benchmark protocols
// and print reports.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 I/O or ingestion
// error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pptex/pptex.hpp"

namespace fs = std::filesystem;
using namespace pptex;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

std::vector<NeighborhoodPair> parse_pairs(const std::string& text) {
  std::vector<NeighborhoodPair> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("--pairs: expected P:R, got '" + item + "'");
    try {
      out.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::logic_error&) {
      throw ConfigError("--pairs: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--pairs: empty list");
  return out;
}

std::string format_pairs(const std::vector<NeighborhoodPair>& pairs) {
  std::string s;
  for (const auto& p : pairs) {
    if (!s.empty()) s += ',';
    char buf[48];
    std::snprintf(buf, sizeof buf, "%d:%g", p.P, p.R);
    s += buf;
  }
  return s;
}

// "0..9", "3", or "1,4,7"
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const auto lo = std::stoull(text.substr(0, dots)), hi = std::stoull(text.substr(dots + 2));
      if (hi < lo) throw ConfigError("--seeds: empty range '" + text + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds: cannot parse '" + text + "'");
  }
  if (out.empty()) throw ConfigError("--seeds: empty list");
  return out;
}

nlohmann::json describe_config_json(const DescriptorConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.push_back(k == LbpKind::Sign ? "sign" : "magnitude");
  return {{"tau", c.solver.tau},
          {"dt", c.solver.dt},
          {"steps", c.solver.steps},
          {"pairs", format_pairs(c.pairs)},
          {"kinds", kinds},
          {"length", c.length()},
          {"order", "kind-major, pair-middle, frame-minor"},
          {"histograms", "riu2, normalized per block, valid-region pixels only"},
          {"interpolation", "bilinear, integer snap 1e-9"},
          {"boundary", "zero flux"},
          {"grayscale", "0.299 R + 0.587 G + 0.114 B, unrounded"}};
}

void add_solver_flags(CLI::App* cmd, SolverConfig& cfg) {
  cmd->add_option("--steps", cfg.steps, "Number of time steps K")->capture_default_str();
  cmd->add_option("--tau", cfg.tau, "Damping coefficient")->capture_default_str();
  cmd->add_option("--dt", cfg.dt, "Time step")->capture_default_str();
}

// ---- evolve ------------------------------------------------------------------

int cmd_evolve(const fs::path& input, const SolverConfig& cfg, const fs::path& out_dir) {
  const ImageField image = read_image(input);
  const auto frames = evolve_sequence(image, cfg);
  const auto range = export_frames(frames, out_dir);
  std::printf("wrote %zu frames to %s (range %.6g .. %.6g)\n", frames.size(), out_dir.string().c_str(),
              range.min, range.max);
  return 0;
}

// ---- extract -----------------------------------------------------------------

struct ExtractArgs {
  std::string dataset;
  fs::path root;
  fs::path out;
  std::string pairs = "8:1,16:2,24:3,24:4";
  std::size_t threads = 0;
  std::size_t classes = 0;
  bool lenient = false;
  bool quiet = false;
};

int cmd_extract(const ExtractArgs& a, const SolverConfig& solver) {
  DescriptorConfig cfg;
  cfg.solver = solver;
  cfg.pairs = parse_pairs(a.pairs);
  cfg.validate();

  std::vector<DatasetEntry> entries;
  if (a.dataset == "kth2b") {
    KthLayout layout;
    if (a.lenient || a.classes) layout = {std::nullopt, std::nullopt};
    entries = index_kth_tips2b(a.root, layout);
  } else if (a.dataset == "uiuc") {
    UiucLayout layout;
    if (a.lenient || a.classes) layout = {std::nullopt, std::nullopt};
    entries = index_uiuc(a.root, layout);
  } else {
    throw ConfigError("--dataset must be kth2b or uiuc");
  }
  if (a.classes) {
    std::set<std::string> labels;
    for (const auto& e : entries) labels.insert(e.label);
    if (labels.size() < a.classes)
      throw ConfigError("--classes " + std::to_string(a.classes) + " exceeds the " +
                        std::to_string(labels.size()) + " classes present");
    std::set<std::string> keep;
    for (const auto& l : labels) {
      if (keep.size() == a.classes) break;
      keep.insert(l);
    }
    std::erase_if(entries, [&](const DatasetEntry& e) { return !keep.count(e.label); });
  }

  const std::size_t threads = a.threads ? a.threads : default_thread_count();
  SystemCache systems(cfg.solver);
  std::vector<CacheRow> rows(entries.size());
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& e = entries[i];
    const ImageField field = read_image(e.path);
    auto d = describe(field, cfg, systems.get(field.width(), field.height()), e.id);
    rows[i] = {e.id, e.label, e.group, std::move(d.values)};
    const std::size_t n = ++done;
    if (!a.quiet && (n % 25 == 0 || n == entries.size())) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(log_mutex);
      std::fprintf(stderr, "extract: %zu/%zu images (%.1f s)\n", n, entries.size(), s);
    }
  });

  write_cache(a.out, rows);
  nlohmann::json meta{{"dataset", a.dataset},
                      {"root", a.root.string()},
                      {"rows", rows.size()},
                      {"descriptor", describe_config_json(cfg)}};
  fs::path meta_path = a.out;
  meta_path += ".json";
  std::ofstream(meta_path) << meta.dump(2) << '\n';
  std::printf("wrote %zu rows x %zu features to %s\n", rows.size(), cfg.length(), a.out.string().c_str());
  return 0;
}

// ---- benchmark / report ----------------------------------------------------------

struct BenchmarkArgs {
  fs::path cache;
  std::string protocol;
  std::string seeds = "0..9";
  fs::path out;
  std::size_t train_per_class = 0;
  double variance = 0.99;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  BenchmarkOptions opt;
  opt.protocol = parse_protocol(a.protocol);
  opt.seeds = parse_seeds(a.seeds);
  opt.train_per_class = a.train_per_class;
  opt.kl.variance_fraction = a.variance;
  if (!(a.variance > 0.0 && a.variance <= 1.0)) throw ConfigError("--variance must be in (0, 1]");

  const auto rows = read_cache(a.cache);
  RunReport rep = run_benchmark(rows, opt);
  fs::path meta_path = a.cache;
  meta_path += ".json";
  if (std::ifstream meta{meta_path}) {
    try {
      rep.config_echo["extraction"] = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception&) {
      rep.config_echo["extraction"] = "unreadable " + meta_path.string();
    }
  }
  rep.config_echo["cache"] = a.cache.string();
  write_report(a.out, rep);
  std::fputs(format_text(rep).c_str(), stdout);
  return 0;
}

int cmd_report(const fs::path& in, const std::string& format, bool references) {
  const RunReport rep = read_report(in);
  if (format == "csv") {
    std::fputs(format_confusion_csv(rep).c_str(), stdout);
  } else if (format == "text") {
    std::fputs(format_text(rep).c_str(), stdout);
    if (references) {
      std::printf("\npublished accuracies on this benchmark (%%):\n");
      for (const auto& r : published_results(parse_protocol(rep.protocol)))
        std::printf("  %-24s %5.1f\n", r.method, r.accuracy_percent);
      std::printf("  %-24s %5.1f  (this run)\n", "measured", 100.0 * rep.mean_accuracy);
    }
  } else {
    throw ConfigError("--format must be text or csv");
  }
  return 0;
}

// ---- train / classify ------------------------------------------------------------

int cmd_train(const fs::path& cache, const fs::path& out, double variance) {
  const auto rows = read_cache(cache);
  if (rows.empty()) throw InputError("train: cache has no rows");
  Eigen::MatrixXd X(Eigen::Index(rows.size()), Eigen::Index(rows.front().values.size()));
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != std::size_t(X.cols())) throw InputError("train: ragged cache");
    X.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].values.data(), X.cols());
    labels.push_back(rows[i].label);
  }
  KLOptions kl;
  kl.variance_fraction = variance;
  const auto model = fit_pipeline(X, labels, kl);
  save_model(out, model);
  std::printf("trained on %zu rows, %zu classes, %zu retained dimensions -> %s\n", rows.size(),
              model.lda.classes.size(), model.kl.retained(), out.string().c_str());
  return 0;
}

int cmd_classify(const fs::path& model_path, const fs::path& cache) {
  const auto model = load_model(model_path);
  const auto rows = read_cache(cache);
  std::size_t correct = 0, labeled = 0;
  std::printf("id,label,predicted\n");
  for (const auto& r : rows) {
    const std::string& got = predict(model, r.values);
    std::string line;
    detail::append_csv_field(line, r.id);
    line += ',';
    detail::append_csv_field(line, r.label);
    line += ',';
    detail::append_csv_field(line, got);
    std::printf("%s\n", line.c_str());
    if (!r.label.empty()) {
      ++labeled;
      correct += got == r.label;
    }
  }
  if (labeled) std::fprintf(stderr, "accuracy on labeled rows: %s\n", percent(double(correct) / double(labeled)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture recognition with pseudo-parabolic image evolution and CLBP histograms"};
  app.require_subcommand(1);

  SolverConfig evolve_cfg;
  fs::path evolve_in, evolve_out = "frames";
  auto* evolve = app.add_subcommand("evolve", "Evolve one image and export frames u_0..u_K as 16-bit PGM");
  evolve->add_option("input", evolve_in, "Input image (PNG/PGM/PPM/JPEG)")->required();
  evolve->add_option("--out-dir", evolve_out, "Output directory")->capture_default_str();
  add_solver_flags(evolve, evolve_cfg);

  SolverConfig extract_cfg;
  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Compute the descriptor cache for a dataset");
  extract->add_option("--dataset", ex.dataset, "kth2b or uiuc")->required()->check(CLI::IsMember({"kth2b", "uiuc"}));
  extract->add_option("--root", ex.root, "Dataset root directory")->required();
  extract->add_option("--out", ex.out, "Output CSV cache")->required();
  extract->add_option("--pairs", ex.pairs, "Neighborhoods as P:R list")->capture_default_str();
  extract->add_option("--threads", ex.threads, "Worker threads (default: PPTEX_THREADS or all cores)");
  extract->add_option("--classes", ex.classes, "Use only the first N classes (sorted by name)");
  extract->add_flag("--lenient", ex.lenient, "Skip the published per-class image counts check");
  extract->add_flag("--quiet", ex.quiet, "No progress output");
  add_solver_flags(extract, extract_cfg);

  BenchmarkArgs bm;
  auto* benchmark = app.add_subcommand("benchmark", "Run a train/test protocol over a descriptor cache");
  benchmark->add_option("--cache", bm.cache, "Descriptor cache CSV")->required();
  benchmark->add_option("--protocol", bm.protocol, "kth2b or uiuc")->required()->check(CLI::IsMember({"kth2b", "uiuc"}));
  benchmark->add_option("--seeds", bm.seeds, "UIUC split seeds: A..B or comma list")->capture_default_str();
  benchmark->add_option("--out", bm.out, "Report directory")->required();
  benchmark->add_option("--train-per-class", bm.train_per_class, "UIUC training images per class (0 = half)")
      ->capture_default_str();
  benchmark->add_option("--variance", bm.variance, "KL retained variance fraction")->capture_default_str();

  fs::path report_in;
  std::string report_format = "text";
  bool references = false;
  auto* report = app.add_subcommand("report", "Print a benchmark report");
  report->add_option("--in", report_in, "Report directory or run.json")->required();
  report->add_option("--format", report_format, "text or csv")->capture_default_str()->check(CLI::IsMember({"text", "csv"}));
  report->add_flag("--references", references, "Also list published accuracies for the benchmark");

  fs::path train_cache, train_out;
  double train_variance = 0.99;
  auto* train = app.add_subcommand("train", "Fit KL + LDA on every row of a cache and save the model");
  train->add_option("--cache", train_cache, "Descriptor cache CSV")->required();
  train->add_option("--out", train_out, "Model file")->required();
  train->add_option("--variance", train_variance, "KL retained variance fraction")->capture_default_str();

  fs::path classify_model, classify_cache;
  auto* classify = app.add_subcommand("classify", "Predict classes for cache rows with a saved model");
  classify->add_option("--model", classify_model, "Model file")->required();
  classify->add_option("--cache", classify_cache, "Descriptor cache CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*evolve) return cmd_evolve(evolve_in, evolve_cfg, evolve_out);
    if (*extract) return cmd_extract(ex, extract_cfg);
    if (*benchmark) return cmd_benchmark(bm);
    if (*report) return cmd_report(report_in, report_format, references);
    if (*train) return cmd_train(train_cache, train_out, train_variance);
    if (*classify) return cmd_classify(classify_model, classify_cache);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;
}
