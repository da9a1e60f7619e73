#pragma once

// Text container for a fitted PipelineModel. Layout (one record per line,
// numbers in shortest round-trip form, separated by single spaces):
//
//   pptex-model 1
//   kl <D> <d>
//   mean <D numbers>
//   variance <d numbers>
//   basis <D numbers>                 (d lines, one basis row each)
//   lda <c> <d>
//   ridge <number>
//   class <label>                     (c lines, label is the rest of the line)
//   mean <d numbers>                  (c lines, class means in class order)
//   factor <d numbers>                (d lines, rows of the lower Cholesky factor)
//   end

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pptex/error.hpp"
#include "pptex/ml.hpp"

namespace pptex {

inline constexpr const char* kModelMagic = "pptex-model";
inline constexpr int kModelVersion = 1;

namespace detail {

template <class Row>
void write_numbers(std::ostream& out, const char* tag, const Row& row) {
  out << tag;
  char buf[64];
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, double(row(i)));
    out << ' ';
    out.write(buf, end - buf);
  }
  out << '\n';
}

class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  std::istringstream line(const std::string& tag) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of file, wanted '" + tag + "'");
    ++line_no_;
    std::istringstream ss(text);
    std::string got;
    ss >> got;
    if (got != tag) fail("expected '" + tag + "', found '" + got + "'");
    return ss;
  }

  Eigen::VectorXd numbers(const std::string& tag, Eigen::Index count) {
    auto ss = line(tag);
    Eigen::VectorXd v(count);
    std::string tok;
    for (Eigen::Index i = 0; i < count; ++i) {
      if (!(ss >> tok)) fail("too few numbers after '" + tag + "'");
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v(i));
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("bad number '" + tok + "'");
    }
    if (ss >> tok) fail("too many numbers after '" + tag + "'");
    return v;
  }

  std::string rest(const std::string& tag) {
    auto ss = line(tag);
    std::string r;
    std::getline(ss, r);
    if (!r.empty() && r.front() == ' ') r.erase(0, 1);
    return r;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("model line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void write_model(std::ostream& out, const PipelineModel& p) {
  const auto& kl = p.kl;
  const auto& lda = p.lda;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "kl " << kl.mean.size() << ' ' << kl.basis.rows() << '\n';
  detail::write_numbers(out, "mean", kl.mean);
  detail::write_numbers(out, "variance", kl.explained_variance);
  for (Eigen::Index i = 0; i < kl.basis.rows(); ++i) detail::write_numbers(out, "basis", kl.basis.row(i));
  out << "lda " << lda.classes.size() << ' ' << lda.class_means.cols() << '\n';
  Eigen::VectorXd ridge(1);
  ridge(0) = lda.ridge;
  detail::write_numbers(out, "ridge", ridge);
  for (const auto& c : lda.classes) {
    if (c.find('\n') != std::string::npos) throw InputError("write_model: class label contains newline");
    out << "class " << c << '\n';
  }
  for (Eigen::Index i = 0; i < lda.class_means.rows(); ++i)
    detail::write_numbers(out, "mean", lda.class_means.row(i));
  for (Eigen::Index i = 0; i < lda.covariance_factor.rows(); ++i)
    detail::write_numbers(out, "factor", lda.covariance_factor.row(i));
  out << "end\n";
}

inline PipelineModel read_model(std::istream& in) {
  detail::ModelReader r(in);
  PipelineModel p;
  {
    auto ss = r.line(kModelMagic);
    int version = 0;
    if (!(ss >> version) || version != kModelVersion)
      r.fail("unsupported model version (this build reads version " + std::to_string(kModelVersion) + ")");
  }
  Eigen::Index D = 0, d = 0;
  {
    auto ss = r.line("kl");
    if (!(ss >> D >> d) || D < 1 || d < 1) r.fail("bad kl dimensions");
  }
  p.kl.mean = r.numbers("mean", D);
  p.kl.explained_variance = r.numbers("variance", d);
  p.kl.basis.resize(d, D);
  for (Eigen::Index i = 0; i < d; ++i) p.kl.basis.row(i) = r.numbers("basis", D).transpose();

  Eigen::Index c = 0, dl = 0;
  {
    auto ss = r.line("lda");
    if (!(ss >> c >> dl) || c < 1 || dl != d) r.fail("bad lda dimensions");
  }
  p.lda.ridge = r.numbers("ridge", 1)(0);
  for (Eigen::Index i = 0; i < c; ++i) p.lda.classes.push_back(r.rest("class"));
  p.lda.class_means.resize(c, d);
  for (Eigen::Index i = 0; i < c; ++i) p.lda.class_means.row(i) = r.numbers("mean", d).transpose();
  p.lda.covariance_factor.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) p.lda.covariance_factor.row(i) = r.numbers("factor", d).transpose();
  (void)r.line("end");
  return p;
}

inline void save_model(const std::filesystem::path& path, const PipelineModel& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_model: cannot open " + path.string());
  write_model(out, p);
  if (!out) throw IoError("save_model: write failed for " + path.string());
}

inline PipelineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open " + path.string());
  return read_model(in);
}

}  // namespace pptex
