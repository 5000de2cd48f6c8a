#pragma once
// Text persistence for datasets: a version line, a metadata header, then one
// line per record. Complex values are stored as adjacent re/im doubles with
// shortest-round-trip formatting, so write/read/write is byte-identical.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/tasks.hpp"
#include "csilab/text_io.hpp"

namespace csilab {

namespace detail {

inline constexpr std::string_view kDatasetMagic = "csilab_dataset v1";

inline void append_site_line(std::string& out, const Site& s) {
  out += "target_site " + s.id + " " + format_double(s.position.x()) + " " +
         format_double(s.position.y()) + " " + std::to_string(s.array.num_elements) + " " +
         format_double(s.array.spacing) + " " + format_double(s.array.orientation) + " " +
         format_double(s.carrier_wavelength) + "\n";
}

/// Pull-based whitespace tokenizer over one line.
class LineTokens {
 public:
  LineTokens(std::string_view line, std::size_t line_no) : rest_(line), line_no_(line_no) {}

  std::string_view next() {
    while (!rest_.empty() && rest_.front() == ' ') rest_.remove_prefix(1);
    if (rest_.empty())
      throw IoError("line " + std::to_string(line_no_) + ": unexpected end of line");
    const std::size_t sp = rest_.find(' ');
    std::string_view tok = rest_.substr(0, sp);
    rest_ = sp == std::string_view::npos ? std::string_view{} : rest_.substr(sp + 1);
    return tok;
  }

  double real() { return parse_double(next()); }
  long long integer() { return parse_int(next()); }
  std::uint64_t u64() { return parse_u64(next()); }

  bool done() {
    while (!rest_.empty() && rest_.front() == ' ') rest_.remove_prefix(1);
    return rest_.empty();
  }

  void expect_done() {
    if (!done()) throw IoError("line " + std::to_string(line_no_) + ": trailing fields");
  }

 private:
  std::string_view rest_;
  std::size_t line_no_;
};

/// Iterates lines of a loaded file, tracking the line number for messages.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ > text_.size()) return false;
    const std::size_t eol = text_.find('\n', pos_);
    if (eol == std::string_view::npos) {
      line = text_.substr(pos_);
      pos_ = text_.size() + 1;
      return !line.empty();
    }
    line = text_.substr(pos_, eol - pos_);
    pos_ = eol + 1;
    return true;
  }

  std::string_view require(const std::string& what) {
    std::string_view line;
    if (!next(line)) throw IoError("truncated file: expected " + what);
    ++line_no_;
    return line;
  }

  std::size_t line_no() const { return line_no_; }

  void expect_end() {
    std::string_view line;
    if (next(line)) throw IoError("trailing content after final record");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

inline std::string expect_kv(LineReader& in, const std::string& key) {
  const std::string_view line = in.require("'" + key + "' line");
  if (line.substr(0, key.size()) != key || line.size() <= key.size() ||
      line[key.size()] != ' ')
    throw IoError("line " + std::to_string(in.line_no()) + ": expected '" + key + " ...'");
  return std::string(line.substr(key.size() + 1));
}

inline Site parse_site_line(const std::string& payload, std::size_t line_no) {
  LineTokens t(payload, line_no);
  Site s;
  s.id = std::string(t.next());
  s.position.x() = t.real();
  s.position.y() = t.real();
  s.array.num_elements = static_cast<int>(t.integer());
  s.array.spacing = t.real();
  s.array.orientation = t.real();
  s.carrier_wavelength = t.real();
  t.expect_done();
  return s;
}

inline void append_reals(std::string& out, const VecR& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out += " " + format_double(v[i]);
}

inline void append_complexes(std::string& out, const VecC& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out += " " + format_double(v[i].real()) + " " + format_double(v[i].imag());
}

inline void check_magic(LineReader& in) {
  const std::string_view line = in.require("version header");
  if (line != kDatasetMagic) {
    if (line.substr(0, 15) == "csilab_dataset ")
      throw IoError("unsupported dataset version '" + std::string(line.substr(15)) +
                    "' (expected v1)");
    throw IoError("not a dataset file (bad magic line)");
  }
}

}  // namespace detail

inline void save_dataset(const std::string& path, const StaticDataset& ds) {
  const int m = ds.target_site.array.num_elements;
  std::string out;
  out.reserve(ds.records.size() * 32 * (static_cast<std::size_t>(ds.feature_dim) +
                                        static_cast<std::size_t>(m) * 2 + 4));
  out += std::string(detail::kDatasetMagic) + "\n";
  out += "kind static\n";
  out += "config_hash " + format_hex64(ds.config_hash) + "\n";
  out += "seed " + std::to_string(ds.seed) + "\n";
  detail::append_site_line(out, ds.target_site);
  out += "codebook_oversampling " + std::to_string(ds.target_codebook.oversampling) + "\n";
  out += "feature_dim " + std::to_string(ds.feature_dim) + "\n";
  out += "record_count " + std::to_string(ds.records.size()) + "\n";
  out += "schema features[" + std::to_string(ds.feature_dim) + "] target h_target_re_im[" +
         std::to_string(2 * m) + "] user_pos[2] hash\n";
  for (const StaticRecord& r : ds.records) {
    out += "record";
    detail::append_reals(out, r.features);
    out += " " + std::to_string(r.target);
    detail::append_complexes(out, r.h_target);
    out += " " + format_double(r.user_pos.x()) + " " + format_double(r.user_pos.y());
    out += " " + std::to_string(r.hash) + "\n";
  }
  write_file(path, out);
}

inline StaticDataset load_static_dataset(const std::string& path) {
  const std::string text = read_file(path);
  detail::LineReader in(text);
  detail::check_magic(in);
  const std::string kind = detail::expect_kv(in, "kind");
  if (kind != "static") throw IoError("dataset kind is '" + kind + "', expected 'static'");

  StaticDataset ds;
  ds.config_hash = parse_hex64(detail::expect_kv(in, "config_hash"));
  ds.seed = parse_u64(detail::expect_kv(in, "seed"));
  ds.target_site = detail::parse_site_line(detail::expect_kv(in, "target_site"), in.line_no());
  const int q = static_cast<int>(parse_int(detail::expect_kv(in, "codebook_oversampling")));
  ds.target_codebook = build_dft_codebook(ds.target_site.array.num_elements, q);
  ds.feature_dim = static_cast<int>(parse_int(detail::expect_kv(in, "feature_dim")));
  const auto count = static_cast<std::size_t>(parse_int(detail::expect_kv(in, "record_count")));
  detail::expect_kv(in, "schema");

  const int m = ds.target_site.array.num_elements;
  ds.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string_view line = in.require("record " + std::to_string(i));
    detail::LineTokens t(line, in.line_no());
    if (t.next() != "record")
      throw IoError("line " + std::to_string(in.line_no()) + ": expected a record");
    StaticRecord r;
    r.features.resize(ds.feature_dim);
    for (int f = 0; f < ds.feature_dim; ++f) r.features[f] = t.real();
    r.target = static_cast<int>(t.integer());
    r.h_target.resize(m);
    for (int e = 0; e < m; ++e) {
      const double re = t.real();
      const double im = t.real();
      r.h_target[e] = cplx(re, im);
    }
    r.user_pos.x() = t.real();
    r.user_pos.y() = t.real();
    r.hash = t.u64();
    t.expect_done();
    ds.records.push_back(std::move(r));
  }
  in.expect_end();
  return ds;
}

inline void save_dataset(const std::string& path, const SequenceDataset& ds) {
  const int m = ds.target_site.array.num_elements;
  std::string out;
  out += std::string(detail::kDatasetMagic) + "\n";
  out += "kind sequence\n";
  out += "config_hash " + format_hex64(ds.config_hash) + "\n";
  out += "seed " + std::to_string(ds.seed) + "\n";
  detail::append_site_line(out, ds.target_site);
  out += "codebook_oversampling " + std::to_string(ds.target_codebook.oversampling) + "\n";
  out += "feature_dim " + std::to_string(ds.feature_dim) + "\n";
  out += "l_in " + std::to_string(ds.l_in) + "\n";
  out += "l_out " + std::to_string(ds.l_out) + "\n";
  out += "delay_min " + std::to_string(ds.delay_min) + "\n";
  out += "delay_max " + std::to_string(ds.delay_max) + "\n";
  out += "record_count " + std::to_string(ds.records.size()) + "\n";
  out += "schema inputs[" + std::to_string(ds.l_in) + "x" + std::to_string(ds.feature_dim) +
         "] delay targets[" + std::to_string(ds.l_out) + "] h_targets_re_im[" +
         std::to_string(ds.l_out) + "x" + std::to_string(2 * m) + "] measured_pos[2] hash\n";
  for (const SequenceRecord& r : ds.records) {
    out += "record";
    for (Eigen::Index row = 0; row < r.inputs.rows(); ++row)
      for (Eigen::Index col = 0; col < r.inputs.cols(); ++col)
        out += " " + format_double(r.inputs(row, col));
    out += " " + std::to_string(r.delay);
    for (int tgt : r.targets) out += " " + std::to_string(tgt);
    for (const VecC& h : r.h_targets) detail::append_complexes(out, h);
    out += " " + format_double(r.measured_pos.x()) + " " + format_double(r.measured_pos.y());
    out += " " + std::to_string(r.hash) + "\n";
  }
  write_file(path, out);
}

inline SequenceDataset load_sequence_dataset(const std::string& path) {
  const std::string text = read_file(path);
  detail::LineReader in(text);
  detail::check_magic(in);
  const std::string kind = detail::expect_kv(in, "kind");
  if (kind != "sequence") throw IoError("dataset kind is '" + kind + "', expected 'sequence'");

  SequenceDataset ds;
  ds.config_hash = parse_hex64(detail::expect_kv(in, "config_hash"));
  ds.seed = parse_u64(detail::expect_kv(in, "seed"));
  ds.target_site = detail::parse_site_line(detail::expect_kv(in, "target_site"), in.line_no());
  const int q = static_cast<int>(parse_int(detail::expect_kv(in, "codebook_oversampling")));
  ds.target_codebook = build_dft_codebook(ds.target_site.array.num_elements, q);
  ds.feature_dim = static_cast<int>(parse_int(detail::expect_kv(in, "feature_dim")));
  ds.l_in = static_cast<int>(parse_int(detail::expect_kv(in, "l_in")));
  ds.l_out = static_cast<int>(parse_int(detail::expect_kv(in, "l_out")));
  ds.delay_min = static_cast<int>(parse_int(detail::expect_kv(in, "delay_min")));
  ds.delay_max = static_cast<int>(parse_int(detail::expect_kv(in, "delay_max")));
  const auto count = static_cast<std::size_t>(parse_int(detail::expect_kv(in, "record_count")));
  detail::expect_kv(in, "schema");

  const int m = ds.target_site.array.num_elements;
  ds.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string_view line = in.require("record " + std::to_string(i));
    detail::LineTokens t(line, in.line_no());
    if (t.next() != "record")
      throw IoError("line " + std::to_string(in.line_no()) + ": expected a record");
    SequenceRecord r;
    r.inputs.resize(ds.l_in, ds.feature_dim);
    for (int row = 0; row < ds.l_in; ++row)
      for (int col = 0; col < ds.feature_dim; ++col) r.inputs(row, col) = t.real();
    r.delay = static_cast<int>(t.integer());
    for (int s = 0; s < ds.l_out; ++s) r.targets.push_back(static_cast<int>(t.integer()));
    for (int s = 0; s < ds.l_out; ++s) {
      VecC h(m);
      for (int e = 0; e < m; ++e) {
        const double re = t.real();
        const double im = t.real();
        h[e] = cplx(re, im);
      }
      r.h_targets.push_back(std::move(h));
    }
    r.measured_pos.x() = t.real();
    r.measured_pos.y() = t.real();
    r.hash = t.u64();
    t.expect_done();
    ds.records.push_back(std::move(r));
  }
  in.expect_end();
  return ds;
}

}  // namespace csilab
