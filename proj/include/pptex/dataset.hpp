#pragma once

// Benchmark ingestion and train/test protocols.
//
// KTH-TIPS-2b layout:  <root>/<material>/sample_<a|b|c|d>/<image>
// UIUC layout:         <root>/<class>/<image>
//
// Items are sorted by relative path (byte order), never by directory
// iteration order. Ids are relative paths with '/' separators.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pptex/error.hpp"
#include "pptex/image_field.hpp"
#include "pptex/image_io.hpp"
#include "pptex/parallel.hpp"

namespace pptex {

/// An indexed but not yet decoded dataset image.
struct DatasetEntry {
  std::string id;
  std::string label;
  std::string group;  // KTH sample letter, empty for UIUC
  std::filesystem::path path;
};

struct DatasetItem {
  std::string id;
  std::string label;
  std::string group;
  ImageField field;
};

template <class T>
concept LabeledItem = requires(const T& t) {
  { t.id } -> std::convertible_to<std::string>;
  { t.label } -> std::convertible_to<std::string>;
  { t.group } -> std::convertible_to<std::string>;
};

struct KthLayout {
  std::optional<std::size_t> classes = 11;
  std::optional<std::size_t> per_sample = 108;
};

struct UiucLayout {
  std::optional<std::size_t> classes = 25;
  std::optional<std::size_t> per_class = 40;
};

inline constexpr const char* kKthGroups = "abcd";

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm" || ext == ".ppm" ||
         ext == ".pnm";
}

inline bool is_hidden(const std::filesystem::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

inline std::vector<std::filesystem::path> sorted_children(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (!is_hidden(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

inline std::vector<std::filesystem::path> image_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : sorted_children(dir))
    if (std::filesystem::is_regular_file(p) && is_image_file(p)) out.push_back(p);
  return out;
}

// "sample_a", "sample-b", "samplec" -> letter; empty when unrecognized.
inline std::string kth_sample_letter(const std::string& dirname) {
  std::string s = dirname;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (s.rfind("sample", 0) != 0) return {};
  std::string rest = s.substr(6);
  if (!rest.empty() && (rest.front() == '_' || rest.front() == '-')) rest.erase(0, 1);
  if (rest.size() == 1 && std::string(kKthGroups).find(rest) != std::string::npos) return rest;
  return {};
}

inline void check_root(const std::filesystem::path& root, const char* what) {
  if (!std::filesystem::is_directory(root))
    throw IoError(std::string(what) + ": dataset root is not a directory: " + root.string());
}

[[noreturn]] inline void ingestion_failure(const char* what, const std::vector<std::string>& problems) {
  std::string msg = std::string(what) + ": dataset layout check failed";
  for (const auto& p : problems) msg += "\n  " + p;
  throw IoError(msg);
}

}  // namespace detail

inline std::vector<DatasetEntry> index_kth_tips2b(const std::filesystem::path& root,
                                                  const KthLayout& layout = {}) {
  detail::check_root(root, "KTH-TIPS-2b");
  std::vector<DatasetEntry> entries;
  std::vector<std::string> problems;
  std::size_t classes = 0;
  for (const auto& cls : detail::sorted_children(root)) {
    if (!std::filesystem::is_directory(cls)) continue;
    ++classes;
    const std::string label = cls.filename().string();
    std::set<std::string> seen;
    for (const auto& sample : detail::sorted_children(cls)) {
      if (!std::filesystem::is_directory(sample)) continue;
      const std::string letter = detail::kth_sample_letter(sample.filename().string());
      if (letter.empty()) {
        problems.push_back("unexpected directory " + label + "/" + sample.filename().string());
        continue;
      }
      seen.insert(letter);
      const auto files = detail::image_files(sample);
      if (layout.per_sample && files.size() != *layout.per_sample)
        problems.push_back(label + "/" + sample.filename().string() + ": " + std::to_string(files.size()) +
                           " images, expected " + std::to_string(*layout.per_sample));
      for (const auto& f : files)
        entries.push_back({std::filesystem::relative(f, root).generic_string(), label, letter, f});
    }
    for (const char* g = kKthGroups; *g; ++g)
      if (!seen.count(std::string(1, *g)))
        problems.push_back(label + ": missing sample_" + std::string(1, *g));
  }
  if (classes == 0) problems.push_back("no class directories under " + root.string());
  if (layout.classes && classes != *layout.classes)
    problems.push_back(std::to_string(classes) + " class directories, expected " +
                       std::to_string(*layout.classes));
  if (!problems.empty()) detail::ingestion_failure("KTH-TIPS-2b", problems);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return entries;
}

inline std::vector<DatasetEntry> index_uiuc(const std::filesystem::path& root, const UiucLayout& layout = {}) {
  detail::check_root(root, "UIUC");
  std::vector<DatasetEntry> entries;
  std::vector<std::string> problems;
  std::size_t classes = 0;
  for (const auto& cls : detail::sorted_children(root)) {
    if (!std::filesystem::is_directory(cls)) continue;
    ++classes;
    const std::string label = cls.filename().string();
    const auto files = detail::image_files(cls);
    if (files.empty() || (layout.per_class && files.size() != *layout.per_class))
      problems.push_back("class " + label + ": " + std::to_string(files.size()) + " images, expected " +
                         (layout.per_class ? std::to_string(*layout.per_class) : std::string("at least 1")));
    for (const auto& f : files)
      entries.push_back({std::filesystem::relative(f, root).generic_string(), label, {}, f});
  }
  if (classes == 0) problems.push_back("no class directories under " + root.string());
  if (layout.classes && classes != *layout.classes)
    problems.push_back(std::to_string(classes) + " class directories, expected " +
                       std::to_string(*layout.classes));
  if (!problems.empty()) detail::ingestion_failure("UIUC", problems);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return entries;
}

/// Decodes every entry (in parallel); output order follows the entries.
inline std::vector<DatasetItem> load_entries(const std::vector<DatasetEntry>& entries,
                                             std::size_t threads = default_thread_count()) {
  std::vector<DatasetItem> items(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& e = entries[i];
    items[i] = {e.id, e.label, e.group, read_image(e.path)};
  });
  return items;
}

inline std::vector<DatasetItem> load_kth_tips2b(const std::filesystem::path& root, const KthLayout& layout = {}) {
  return load_entries(index_kth_tips2b(root, layout));
}

inline std::vector<DatasetItem> load_uiuc(const std::filesystem::path& root, const UiucLayout& layout = {}) {
  return load_entries(index_uiuc(root, layout));
}

struct SplitPlan {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  int round = 0;
  std::optional<std::uint64_t> seed;
};

/// Round r (1..4) trains on KTH sample "abcd"[r-1] and tests on the others.
template <LabeledItem Item>
SplitPlan split_kth(const std::vector<Item>& items, int round) {
  if (round < 1 || round > 4) throw ConfigError("split_kth: round must be 1..4, got " + std::to_string(round));
  const std::string train_group(1, kKthGroups[round - 1]);
  SplitPlan plan;
  plan.round = round;
  for (const auto& it : items) {
    if (std::string(it.group).empty())
      throw InputError("split_kth: item '" + std::string(it.id) + "' has no sample group");
    (it.group == train_group ? plan.train_ids : plan.test_ids).push_back(it.id);
  }
  if (plan.train_ids.empty()) throw InputError("split_kth: no items in sample " + train_group);
  return plan;
}

namespace detail {

// Uniform integer in [0, range) from raw mt19937_64 output by rejection, so
// the sequence is identical on every standard library.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t range) {
  const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % range + 1) % range;
  for (;;) {
    const std::uint64_t x = rng();
    if (x <= limit) return x % range;
  }
}

}  // namespace detail

/// Random per-class half split. The generator is std::mt19937_64 seeded with
/// `seed`; classes are visited in sorted label order and, within a class,
/// items in input order. Each class draws `train_per_class` items by a
/// partial Fisher-Yates shuffle (swap position i with i + draw(m - i)).
/// train_per_class == 0 means half of each class, rounded down.
template <LabeledItem Item>
SplitPlan split_uiuc(const std::vector<Item>& items, std::uint64_t seed, std::size_t train_per_class = 0) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i) by_class[items[i].label].push_back(i);
  if (by_class.empty()) throw InputError("split_uiuc: no items");

  std::mt19937_64 rng(seed);
  std::vector<char> is_train(items.size(), 0);
  for (auto& [label, idx] : by_class) {
    const std::size_t k = train_per_class ? train_per_class : idx.size() / 2;
    if (k == 0 || k >= idx.size())
      throw InputError("split_uiuc: class '" + label + "' has " + std::to_string(idx.size()) +
                       " items, cannot take " + std::to_string(k) + " for training");
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + std::size_t(detail::bounded_draw(rng, idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < k; ++i) is_train[idx[i]] = 1;
  }

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t i = 0; i < items.size(); ++i)
    (is_train[i] ? plan.train_ids : plan.test_ids).push_back(items[i].id);
  return plan;
}

/// True when train and test are disjoint and together cover exactly `items`.
template <LabeledItem Item>
bool is_partition(const SplitPlan& plan, const std::vector<Item>& items) {
  std::multiset<std::string> all;
  for (const auto& it : items) all.insert(it.id);
  std::multiset<std::string> got(plan.train_ids.begin(), plan.train_ids.end());
  got.insert(plan.test_ids.begin(), plan.test_ids.end());
  std::set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
  for (const auto& id : plan.test_ids)
    if (train.count(id)) return false;
  return got == all;
}

}  // namespace pptex
