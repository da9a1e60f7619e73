#pragma once

// Multi-frame CLBP descriptor: the image is evolved for K steps and every
// frame u_0..u_K is encoded with each CLBP kind over each (P, R) pair. The
// normalized (P+2)-bin histograms are concatenated kind-major, pair-middle,
// time-minor:
//
//   [S,(P1,R1),k=0] [S,(P1,R1),k=1] ... [S,(P1,R1),k=K] [S,(P2,R2),k=0] ...
//   ... [M,(Pn,Rn),k=K]

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pptex/clbp.hpp"
#include "pptex/error.hpp"
#include "pptex/image_field.hpp"
#include "pptex/parallel.hpp"
#include "pptex/pde.hpp"

namespace pptex {

struct NeighborhoodPair {
  int P = 8;
  double R = 1.0;
  friend bool operator==(const NeighborhoodPair&, const NeighborhoodPair&) = default;
};

struct DescriptorConfig {
  SolverConfig solver;
  std::vector<NeighborhoodPair> pairs{{8, 1.0}, {16, 2.0}, {24, 3.0}, {24, 4.0}};
  std::vector<LbpKind> kinds{LbpKind::Sign, LbpKind::Magnitude};

  std::size_t bins_per_frame() const noexcept {
    std::size_t s = 0;
    for (const auto& p : pairs) s += std::size_t(p.P) + 2;
    return s;
  }
  std::size_t frames() const noexcept { return solver.steps + 1; }
  std::size_t length() const noexcept { return bins_per_frame() * kinds.size() * frames(); }

  /// Largest border margin over all pairs.
  std::size_t margin() const noexcept {
    std::size_t m = 0;
    for (const auto& p : pairs) m = std::max(m, static_cast<std::size_t>(std::ceil(p.R)));
    return m;
  }

  void validate() const {
    solver.validate();
    if (pairs.empty()) throw ConfigError("DescriptorConfig: no (P,R) pairs");
    if (kinds.empty()) throw ConfigError("DescriptorConfig: no CLBP kinds");
    for (const auto& p : pairs) (void)build_spec(p.P, p.R);
  }
};

struct DescriptorVector {
  std::vector<double> values;
  std::string source_id;
};

/// Location of one histogram block inside a descriptor.
struct BlockInfo {
  std::size_t offset = 0;
  std::size_t size = 0;
  LbpKind kind = LbpKind::Sign;
  NeighborhoodPair pair;
  std::size_t frame = 0;
};

inline std::vector<BlockInfo> descriptor_layout(const DescriptorConfig& config) {
  std::vector<BlockInfo> blocks;
  std::size_t offset = 0;
  for (LbpKind kind : config.kinds)
    for (const auto& pr : config.pairs)
      for (std::size_t k = 0; k < config.frames(); ++k) {
        const std::size_t size = std::size_t(pr.P) + 2;
        blocks.push_back({offset, size, kind, pr, k});
        offset += size;
      }
  return blocks;
}

namespace detail {

inline void check_descriptor_input(const ImageField& image, const DescriptorConfig& config) {
  const std::size_t m = config.margin();
  if (image.width() < 2 * m + 1 || image.height() < 2 * m + 1)
    throw InputError("describe: " + std::to_string(image.width()) + "x" +
                     std::to_string(image.height()) + " image is too small for border margin " +
                     std::to_string(m));
}

}  // namespace detail

/// Descriptor of one image against a prebuilt system of matching size.
inline DescriptorVector describe(const ImageField& image, const DescriptorConfig& config,
                                 const PseudoParabolicSystem& system, std::string source_id = {}) {
  detail::check_descriptor_input(image, config);
  std::vector<NeighborhoodSpec> specs;
  specs.reserve(config.pairs.size());
  for (const auto& p : config.pairs) specs.push_back(build_spec(p.P, p.R));

  const std::size_t frames = config.frames();
  // Block offset of (pair, frame) within one kind section.
  std::vector<std::size_t> pair_offset(config.pairs.size());
  std::size_t acc = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    pair_offset[i] = acc;
    acc += specs[i].bins() * frames;
  }
  const std::size_t kind_stride = acc;

  DescriptorVector out{std::vector<double>(config.length(), 0.0), std::move(source_id)};
  auto store = [&](const LbpHistogram& h, std::size_t pair_index, std::size_t k) {
    for (std::size_t ki = 0; ki < config.kinds.size(); ++ki) {
      if (config.kinds[ki] != h.kind) continue;
      const std::size_t base = ki * kind_stride + pair_offset[pair_index] + k * h.bins.size();
      std::copy(h.bins.begin(), h.bins.end(), out.values.begin() + std::ptrdiff_t(base));
    }
  };

  ImageField frame = image;
  std::vector<double> scratch;
  for (std::size_t k = 0; k < frames; ++k) {
    if (k > 0) frame = evolve_step(frame, system, scratch);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      auto [s, m] = clbp_histograms(frame, specs[i]);
      store(s, i, k);
      store(m, i, k);
    }
  }
  return out;
}

inline DescriptorVector describe(const ImageField& image, const DescriptorConfig& config,
                                 std::string source_id = {}) {
  config.validate();
  detail::check_descriptor_input(image, config);
  const auto system = assemble_system(image.width(), image.height(), config.solver);
  return describe(image, config, system, std::move(source_id));
}

struct NamedImage {
  std::string id;
  ImageField field;
};

/// Thread-safe get-or-assemble cache of systems keyed by image size.
class SystemCache {
 public:
  explicit SystemCache(SolverConfig config) : config_(config) { config_.validate(); }

  const PseudoParabolicSystem& get(std::size_t width, std::size_t height) {
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard lock(mutex_);
      auto& slot = entries_[{width, height}];
      if (!slot) slot = std::make_shared<Entry>();
      entry = slot;
    }
    // Assembly happens outside the map lock; other sizes proceed meanwhile.
    std::call_once(entry->once, [&] {
      entry->system = std::make_unique<PseudoParabolicSystem>(width, height, config_);
    });
    return *entry->system;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::once_flag once;
    std::unique_ptr<PseudoParabolicSystem> system;
  };
  SolverConfig config_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<Entry>> entries_;
};

/// Describes every image, sharing one factorization per image size. Output
/// order matches input order.
inline std::vector<DescriptorVector> describe_batch(const std::vector<NamedImage>& images,
                                                    const DescriptorConfig& config,
                                                    std::size_t threads = default_thread_count()) {
  config.validate();
  for (const auto& im : images) detail::check_descriptor_input(im.field, config);

  SystemCache systems(config.solver);
  std::vector<DescriptorVector> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const auto& im = images[i];
    out[i] = describe(im.field, config, systems.get(im.field.width(), im.field.height()), im.id);
  });
  return out;
}

}  // namespace pptex
