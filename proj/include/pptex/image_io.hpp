#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "pptex/error.hpp"
#include "pptex/image_field.hpp"

namespace pptex {

/// Luminance 0.299 R + 0.587 G + 0.114 B of interleaved RGB samples, unrounded.
inline ImageField to_grayscale(std::span<const double> rgb, std::size_t width, std::size_t height) {
  ImageField out(width, height);
  detail::require(rgb.size() == 3 * out.size(), "to_grayscale: expected 3*width*height samples");
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
  return out;
}

/// Decodes PNG/PGM/PPM/JPEG (8- or 16-bit). Color images go through
/// to_grayscale; alpha is ignored. Samples are used as stored.
inline ImageField read_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot read image: " + path.string());
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot decode image: " + path.string());
  if (m.depth() != CV_8U && m.depth() != CV_16U)
    throw IoError("unsupported sample depth in " + path.string());
  cv::Mat samples;
  m.convertTo(samples, CV_64F);
  const std::size_t w = std::size_t(m.cols), h = std::size_t(m.rows);
  const int ch = m.channels();
  if (ch == 1) {
    std::vector<double> v(w * h);
    for (std::size_t y = 0; y < h; ++y) {
      const double* row = samples.ptr<double>(int(y));
      std::copy(row, row + w, v.begin() + std::ptrdiff_t(y * w));
    }
    return ImageField(w, h, std::move(v));
  }
  if (ch != 3 && ch != 4) throw IoError("unsupported channel count in " + path.string());
  std::vector<double> rgb(3 * w * h);
  for (std::size_t y = 0; y < h; ++y) {
    const double* row = samples.ptr<double>(int(y));
    for (std::size_t x = 0; x < w; ++x) {
      const double* px = row + x * std::size_t(ch);  // OpenCV stores B, G, R[, A]
      double* o = rgb.data() + 3 * (y * w + x);
      o[0] = px[2];
      o[1] = px[1];
      o[2] = px[0];
    }
  }
  return to_grayscale(rgb, w, h);
}

/// Binary PGM (P5). maxval <= 255 writes one byte per sample, otherwise two
/// bytes big-endian.
inline void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
                      std::span<const std::uint16_t> samples, std::uint16_t maxval) {
  detail::require(samples.size() == width * height, "write_pgm: sample count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  std::vector<unsigned char> bytes;
  if (maxval <= 255) {
    bytes.reserve(samples.size());
    for (auto s : samples) bytes.push_back(static_cast<unsigned char>(s));
  } else {
    bytes.reserve(2 * samples.size());
    for (auto s : samples) {
      bytes.push_back(static_cast<unsigned char>(s >> 8));
      bytes.push_back(static_cast<unsigned char>(s & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// Writes 8-bit gray (channels == 1) or RGB (channels == 3) as binary PNM.
inline void write_pnm8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                       int channels, std::span<const std::uint8_t> samples) {
  detail::require(channels == 1 || channels == 3, "write_pnm8: channels must be 1 or 3");
  detail::require(samples.size() == width * height * std::size_t(channels), "write_pnm8: size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << (channels == 1 ? "P5\n" : "P6\n") << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(samples.data()), std::streamsize(samples.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

struct FrameRange {
  double min = 0.0;
  double max = 0.0;
};

/// Exports frames as frame_0000.pgm ... with 16-bit linear quantization over
/// the global min/max of the whole sequence, plus frames.txt holding that
/// range: value = min + q / 65535 * (max - min).
inline FrameRange export_frames(const std::vector<ImageField>& frames,
                                const std::filesystem::path& out_dir) {
  detail::require(!frames.empty(), "export_frames: no frames");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) throw IoError("cannot create directory " + out_dir.string());

  FrameRange range{frames.front().values()[0], frames.front().values()[0]};
  for (const auto& f : frames)
    for (double v : f.values()) {
      range.min = std::min(range.min, v);
      range.max = std::max(range.max, v);
    }
  const double span = range.max - range.min;

  std::vector<std::uint16_t> q;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    q.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
      q[i] = span > 0.0 ? static_cast<std::uint16_t>(std::lround((f.values()[i] - range.min) / span * 65535.0))
                        : std::uint16_t{0};
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", k);
    write_pgm(out_dir / name, f.width(), f.height(), q, 65535);
  }

  std::ofstream meta(out_dir / "frames.txt", std::ios::trunc);
  if (!meta) throw IoError("cannot write " + (out_dir / "frames.txt").string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "min %.17g\nmax %.17g\nframes %zu\nlevels 65535\n", range.min,
                range.max, frames.size());
  meta << buf;
  if (!meta) throw IoError("write failed for " + (out_dir / "frames.txt").string());
  return range;
}

}  // namespace pptex
