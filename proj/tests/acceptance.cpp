// Acceptance gates. One PASS/FAIL/SKIP line per criterion.
//
//   acceptance --core      criteria 1-5 (synthetic, minutes)
//   acceptance --datasets  criteria 6-7; needs PPTEX_UIUC_ROOT and/or
//                          PPTEX_KTH_ROOT, exits 77 when neither is set
//
// PPTEX_ACCEPTANCE_CACHE_DIR, if set, keeps extracted descriptor caches
// between runs.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pptex/pptex.hpp"

using namespace pptex;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kSolverTol = 1e-9;
constexpr double kMassRelTol = 1e-8;
constexpr double kContractionLo = 41.0 / 49.0 - 1e-6;
constexpr double kContractionHi = 1.0 + 1e-9;
constexpr double kBlockSumTol = 1e-9;
constexpr double kUiucTarget = 98.0, kUiucBand = 2.0;
constexpr double kKthTarget = 67.4, kKthBand = 3.0;
constexpr std::size_t kSubsetClasses = 5;

enum class Outcome { Pass, Fail, Skip };

struct Gate {
  int id;
  const char* name;
  Outcome outcome;
  std::string detail;
};

std::vector<Gate> g_gates;

void record(int id, const char* name, Outcome o, const std::string& detail) {
  g_gates.push_back({id, name, o, detail});
  const char* tag = o == Outcome::Pass ? "PASS" : o == Outcome::Fail ? "FAIL" : "SKIP";
  std::printf("[%s] criterion %d: %s -- %s\n", tag, id, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ---------------------------------------------------------------------------

void solver_oracle() {
  std::mt19937_64 rng(1001);
  const SolverConfig cfg;
  double worst = 0.0;
  std::size_t grids = 0, fields = 0;
  for (int h = 1; h <= 6; ++h)
    for (int w = 1; w <= 6; ++w) {
      if (w * h < 2) continue;
      ++grids;
      const auto system = assemble_system(std::size_t(w), std::size_t(h), cfg);
      for (int t = 0; t < 100; ++t, ++fields) {
        const ImageField u = oracle::random_field(std::size_t(w), std::size_t(h), rng);
        const ImageField got = evolve_step(u, system);
        const Eigen::VectorXd ref = oracle::dense_step(oracle::to_vec(u), w, h, cfg.tau, cfg.dt);
        for (std::size_t i = 0; i < got.size(); ++i)
          worst = std::max(worst, std::abs(got.values()[i] - ref(Eigen::Index(i))));
      }
    }
  record(1, "solver matches dense direct solve", worst <= kSolverTol ? Outcome::Pass : Outcome::Fail,
         fmt("%zu grids, %zu fields, max abs error %.3e (limit %.0e)", grids, fields, worst, kSolverTol));
}

// ---- 2 ---------------------------------------------------------------------------

double centered_norm(const ImageField& f) {
  const double m = f.mean();
  double s = 0.0;
  for (double v : f.values()) s += (v - m) * (v - m);
  return std::sqrt(s);
}

void conservation_and_contraction() {
  std::mt19937_64 rng(1002);
  const SolverConfig cfg;
  const auto system = assemble_system(32, 32, cfg);
  std::vector<double> scratch;
  double worst_mass = 0.0, lo = 1.0, hi = 0.0;
  for (int t = 0; t < 1000; ++t) {
    ImageField u = oracle::random_field(32, 32, rng);
    const double m0 = u.mean();
    for (int k = 0; k < 10; ++k) {
      const double before = centered_norm(u);
      u = evolve_step(u, system, scratch);
      worst_mass = std::max(worst_mass, std::abs(u.mean() - m0) / std::abs(m0));
      const double ratio = centered_norm(u) / before;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  const bool ok = worst_mass <= kMassRelTol && lo >= kContractionLo && hi <= kContractionHi;
  record(2, "mean conservation and per-step contraction", ok ? Outcome::Pass : Outcome::Fail,
         fmt("max relative mean drift %.2e; norm ratio in [%.6f, %.6f], allowed [%.6f, %.9f]", worst_mass, lo, hi,
             kContractionLo, kContractionHi));
}

// ---- 3 ---------------------------------------------------------------------------

void riu2_exhaustive() {
  const int P = 8;
  int uniform = 0, mismatches = 0;
  for (std::uint32_t bits = 0; bits < 256; ++bits) {
    const int u = oracle::transitions(bits, P);
    const int expect_bin = u <= 2 ? oracle::ones(bits, P) : P + 1;
    if (uniformity(bits, P) != u) ++mismatches;
    if (riu2_bin(bits, P) != expect_bin) ++mismatches;
    // the same pattern through the sign coder on a synthetic neighborhood
    std::vector<double> nb(P);
    for (int p = 0; p < P; ++p) nb[std::size_t(p)] = (bits >> p) & 1 ? 1.0 : -1.0;
    if (sign_code(0.0, nb) != expect_bin) ++mismatches;
    uniform += u <= 2;
  }
  const bool ok = mismatches == 0 && uniform == P * (P - 1) + 2;
  record(3, "riu2 mapping for P=8 matches brute force", ok ? Outcome::Pass : Outcome::Fail,
         fmt("256 patterns, %d mismatches, %d uniform (expected %d)", mismatches, uniform, P * (P - 1) + 2));
}

// ---- 4 ---------------------------------------------------------------------------

void descriptor_structure() {
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> ad(0.25, 4.0), bd(-50.0, 50.0);
  const DescriptorConfig cfg;
  const auto layout = descriptor_layout(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t bad_length = 0, bad_blocks = 0, affine_mismatch = 0;
  double worst_sum = 0.0;
  for (int t = 0; t < 20; ++t) {
    const ImageField f = oracle::random_field(64, 64, rng);
    const auto d = describe(f, cfg);
    if (d.values.size() != 8160) ++bad_length;
    for (const auto& b : layout) {
      double s = 0.0;
      for (std::size_t i = 0; i < b.size; ++i) s += d.values[b.offset + i];
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      if (std::abs(s - 1.0) > kBlockSumTol) ++bad_blocks;
    }
    if (describe(affine_map(f, ad(rng), bd(rng)), cfg).values != d.values) ++affine_mismatch;
  }
  const bool ok = bad_length == 0 && bad_blocks == 0 && affine_mismatch == 0;
  record(4, "descriptor length, block mass and affine invariance", ok ? Outcome::Pass : Outcome::Fail,
         fmt("20 images: %zu wrong lengths, %zu blocks off by >%.0e (worst %.1e), %zu affine mismatches, %.0f s",
             bad_length, bad_blocks, kBlockSumTol, worst_sum, affine_mismatch, seconds_since(t0)));
}

// ---- 5 ---------------------------------------------------------------------------

ImageField smooth_ramp(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586), slope(0.5, 3.0), base(20.0, 80.0);
  const double a = angle(rng), s = slope(rng), b = base(rng);
  ImageField f(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) f(x, y) = b + s * (std::cos(a) * double(x) + std::sin(a) * double(y));
  return f;
}

ImageField noisy_checkerboard(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> period(2, 5);
  std::normal_distribution<double> noise(0.0, 8.0);
  const int p = period(rng);
  ImageField f(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      f(x, y) = ((x / std::size_t(p) + y / std::size_t(p)) % 2 ? 170.0 : 80.0) + noise(rng);
  return f;
}

void synthetic_end_to_end() {
  std::mt19937_64 rng(1005);
  const std::size_t n = 48, per_class = 20;
  std::vector<NamedImage> images;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < per_class; ++i) {
    images.push_back({"ramp/" + std::to_string(i), smooth_ramp(n, rng)});
    labels.push_back("ramp");
    images.push_back({"checker/" + std::to_string(i), noisy_checkerboard(n, rng)});
    labels.push_back("checker");
  }
  const DescriptorConfig cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const auto desc = describe_batch(images, cfg);

  // Even positions of each class train, odd positions test.
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < images.size(); ++i) ((i / 2) % 2 == 0 ? train : test).push_back(i);
  Eigen::MatrixXd X(Eigen::Index(train.size()), Eigen::Index(cfg.length()));
  std::vector<std::string> y;
  for (std::size_t r = 0; r < train.size(); ++r) {
    X.row(Eigen::Index(r)) = Eigen::Map<const Eigen::RowVectorXd>(desc[train[r]].values.data(), X.cols());
    y.push_back(labels[train[r]]);
  }
  const KLTransform kl = kl_fit(X, 2);
  const LDAModel lda = lda_fit(kl_apply_rows(kl, X), y);
  std::size_t correct = 0;
  for (auto i : test) {
    const Eigen::VectorXd z = kl_apply(kl, desc[i].values);
    correct += lda_predict(lda, std::span<const double>(z.data(), std::size_t(z.size()))) == labels[i];
  }
  record(5, "synthetic ramps vs checkerboards end to end",
         correct == test.size() ? Outcome::Pass : Outcome::Fail,
         fmt("%zu/%zu held-out correct, %zu KL dims, %.0f s", correct, test.size(), kl.retained(),
             seconds_since(t0)));
}

// ---- 6, 7 ------------------------------------------------------------------------

std::optional<fs::path> env_path(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return fs::path(v);
}

std::vector<CacheRow> extract(const std::vector<DatasetEntry>& entries, const DescriptorConfig& cfg,
                              const std::string& cache_name) {
  const auto cache_dir = env_path("PPTEX_ACCEPTANCE_CACHE_DIR");
  if (cache_dir && fs::exists(*cache_dir / cache_name)) {
    auto rows = read_cache(*cache_dir / cache_name);
    if (rows.size() == entries.size() && !rows.empty() && rows.front().values.size() == cfg.length()) return rows;
  }
  SystemCache systems(cfg.solver);
  std::vector<CacheRow> rows(entries.size());
  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<std::size_t> done{0};
  parallel_for(entries.size(), default_thread_count(), [&](std::size_t i) {
    const auto& e = entries[i];
    const ImageField f = read_image(e.path);
    rows[i] = {e.id, e.label, e.group, describe(f, cfg, systems.get(f.width(), f.height()), e.id).values};
    const auto k = ++done;
    if (k % 50 == 0) std::fprintf(stderr, "  %s: %zu/%zu (%.0f s)\n", cache_name.c_str(), k, entries.size(), seconds_since(t0));
  });
  if (cache_dir) {
    fs::create_directories(*cache_dir);
    write_cache(*cache_dir / cache_name, rows);
  }
  return rows;
}

// Keeps only the frame-0 blocks: the plain CLBP descriptor.
std::vector<CacheRow> frame_zero_only(const std::vector<CacheRow>& rows, const DescriptorConfig& cfg) {
  const auto layout = descriptor_layout(cfg);
  std::vector<CacheRow> out;
  for (const auto& r : rows) {
    CacheRow c{r.id, r.label, r.group, {}};
    for (const auto& b : layout)
      if (b.frame == 0) c.values.insert(c.values.end(), r.values.begin() + std::ptrdiff_t(b.offset),
                                        r.values.begin() + std::ptrdiff_t(b.offset + b.size));
    out.push_back(std::move(c));
  }
  return out;
}

void datasets(bool& any_ran) {
  const auto uiuc = env_path("PPTEX_UIUC_ROOT");
  const auto kth = env_path("PPTEX_KTH_ROOT");
  const DescriptorConfig cfg;

  std::optional<std::vector<CacheRow>> uiuc_rows;
  if (uiuc) {
    uiuc_rows = extract(index_uiuc(*uiuc), cfg, "uiuc.csv");
  }

  if (!uiuc) {
    record(6, "K=50 descriptor at least as accurate as K=0 on a UIUC subset", Outcome::Skip,
           "PPTEX_UIUC_ROOT not set; UIUC images unavailable");
  } else {
    any_ran = true;
    std::set<std::string> keep;
    for (const auto& r : *uiuc_rows) {
      if (keep.size() == kSubsetClasses) break;
      keep.insert(r.label);
    }
    std::vector<CacheRow> subset;
    for (const auto& r : *uiuc_rows)
      if (keep.count(r.label)) subset.push_back(r);
    BenchmarkOptions opt;
    const double full = run_benchmark(subset, opt).mean_accuracy;
    const double plain = run_benchmark(frame_zero_only(subset, cfg), opt).mean_accuracy;
    record(6, "K=50 descriptor at least as accurate as K=0 on a UIUC subset",
           full >= plain ? Outcome::Pass : Outcome::Fail,
           fmt("%zu classes, 10 splits: K=50 %s, K=0 %s", keep.size(), percent(full).c_str(), percent(plain).c_str()));
  }

  std::string detail;
  bool ok = true;
  if (uiuc) {
    const double acc = 100.0 * run_benchmark(*uiuc_rows, BenchmarkOptions{}).mean_accuracy;
    ok = ok && std::abs(acc - kUiucTarget) <= kUiucBand;
    detail += fmt("UIUC %.1f%% (target %.1f +/- %.1f)", acc, kUiucTarget, kUiucBand);
  } else {
    detail += "UIUC unavailable";
  }
  if (kth) {
    const auto rows = extract(index_kth_tips2b(*kth), cfg, "kth2b.csv");
    BenchmarkOptions opt;
    opt.protocol = Protocol::Kth2b;
    const double acc = 100.0 * run_benchmark(rows, opt).mean_accuracy;
    ok = ok && std::abs(acc - kKthTarget) <= kKthBand;
    detail += fmt("; KTH-TIPS-2b %.1f%% (target %.1f +/- %.1f)", acc, kKthTarget, kKthBand);
  } else {
    detail += "; KTH-TIPS-2b unavailable";
  }
  if (!uiuc && !kth) {
    record(7, "published accuracies reproduced", Outcome::Skip, "PPTEX_UIUC_ROOT and PPTEX_KTH_ROOT not set");
  } else {
    any_ran = true;
    // Both benchmarks are required for a pass; a missing one keeps the gate open.
    record(7, "published accuracies reproduced", !ok ? Outcome::Fail : (uiuc && kth) ? Outcome::Pass : Outcome::Skip,
           detail);
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "--core";
  if (mode != "--core" && mode != "--datasets" && mode != "--all") {
    std::fprintf(stderr, "usage: acceptance [--core | --datasets | --all]\n");
    return 2;
  }
  bool datasets_ran = false;
  try {
    if (mode != "--datasets") {
      solver_oracle();
      conservation_and_contraction();
      riu2_exhaustive();
      descriptor_structure();
      synthetic_end_to_end();
    }
    if (mode != "--core") datasets(datasets_ran);
  } catch (const std::exception& e) {
    std::printf("[FAIL] aborted: %s\n", e.what());
    return 1;
  }

  std::size_t pass = 0, fail = 0, skip = 0;
  for (const auto& g : g_gates)
    (g.outcome == Outcome::Pass ? pass : g.outcome == Outcome::Fail ? fail : skip)++;
  std::printf("summary: %zu passed, %zu failed, %zu skipped\n", pass, fail, skip);
  if (fail) return 1;
  if (mode == "--datasets" && !datasets_ran) return 77;
  return 0;
}
