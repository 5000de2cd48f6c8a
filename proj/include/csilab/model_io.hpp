#pragma once
// Text checkpoints: a version line, the architecture header, then the packed
// parameter vector one decimal per line in pack order (row-major weights).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csilab/dataset_io.hpp"
#include "csilab/gru.hpp"
#include "csilab/mlp.hpp"
#include "csilab/text_io.hpp"

namespace csilab {

namespace detail {

inline constexpr std::string_view kModelMagic = "csilab_model v1";

inline std::string head_name(OutputHead head) {
  return head == OutputHead::kSoftmax ? "softmax" : "log_spectrum";
}

inline OutputHead head_from_name(const std::string& s) {
  if (s == "softmax") return OutputHead::kSoftmax;
  if (s == "log_spectrum") return OutputHead::kLogSpectrum;
  throw IoError("unknown output head '" + s + "'");
}

inline void check_model_magic(LineReader& in) {
  const std::string_view line = in.require("version header");
  if (line != kModelMagic) {
    if (line.substr(0, 13) == "csilab_model ")
      throw IoError("unsupported checkpoint version '" + std::string(line.substr(13)) +
                    "' (expected v1)");
    throw IoError("not a model checkpoint (bad magic line)");
  }
}

inline void append_params(std::string& out, const VecR& params) {
  out += "params " + std::to_string(params.size()) + "\n";
  for (Eigen::Index i = 0; i < params.size(); ++i) out += format_double(params[i]) + "\n";
}

inline VecR read_params(LineReader& in) {
  const auto n = static_cast<Eigen::Index>(parse_int(expect_kv(in, "params")));
  if (n < 0) throw IoError("negative parameter count");
  VecR params(n);
  for (Eigen::Index i = 0; i < n; ++i)
    params[i] = parse_double(in.require("parameter " + std::to_string(i)));
  in.expect_end();
  return params;
}

}  // namespace detail

inline void save_model(const std::string& path, const MlpModel& model, std::uint64_t seed,
                       std::uint64_t config_hash = 0) {
  std::string out;
  out += std::string(detail::kModelMagic) + "\n";
  out += "kind mlp\n";
  out += "head " + detail::head_name(model.head) + "\n";
  std::string dims;
  for (int d : model.layer_dims) dims += (dims.empty() ? "" : " ") + std::to_string(d);
  out += "dims " + dims + "\n";
  out += "seed " + std::to_string(seed) + "\n";
  out += "config_hash " + format_hex64(config_hash) + "\n";
  detail::append_params(out, mlp_pack(model));
  write_file(path, out);
}

inline MlpModel load_mlp(const std::string& path, std::uint64_t* seed_out = nullptr) {
  const std::string text = read_file(path);
  detail::LineReader in(text);
  detail::check_model_magic(in);
  const std::string kind = detail::expect_kv(in, "kind");
  if (kind != "mlp") throw IoError("checkpoint kind is '" + kind + "', expected 'mlp'");
  const OutputHead head = detail::head_from_name(detail::expect_kv(in, "head"));

  std::vector<int> dims;
  {
    detail::LineTokens t(detail::expect_kv(in, "dims"), in.line_no());
    while (!t.done()) dims.push_back(static_cast<int>(t.integer()));
  }
  if (dims.size() < 2) throw IoError("mlp checkpoint needs at least two dims");
  const std::uint64_t seed = parse_u64(detail::expect_kv(in, "seed"));
  if (seed_out != nullptr) *seed_out = seed;
  parse_hex64(detail::expect_kv(in, "config_hash"));

  MlpModel model = make_mlp(dims, head, 0);
  const VecR params = detail::read_params(in);
  if (params.size() != model.num_params())
    throw IoError("parameter count " + std::to_string(params.size()) + " does not match dims (" +
                  std::to_string(model.num_params()) + " expected)");
  mlp_unpack(model, params);
  return model;
}

inline void save_model(const std::string& path, const GruSeq2Seq& model, std::uint64_t seed,
                       std::uint64_t config_hash = 0) {
  std::string out;
  out += std::string(detail::kModelMagic) + "\n";
  out += "kind gru\n";
  out += "head " + detail::head_name(model.head) + "\n";
  out += "dims " + std::to_string(model.feature_dim()) + " " + std::to_string(model.hidden_dim()) +
         " " + std::to_string(model.output_dim()) + "\n";
  out += "seed " + std::to_string(seed) + "\n";
  out += "config_hash " + format_hex64(config_hash) + "\n";
  detail::append_params(out, gru_pack(model));
  write_file(path, out);
}

inline GruSeq2Seq load_gru(const std::string& path, std::uint64_t* seed_out = nullptr) {
  const std::string text = read_file(path);
  detail::LineReader in(text);
  detail::check_model_magic(in);
  const std::string kind = detail::expect_kv(in, "kind");
  if (kind != "gru") throw IoError("checkpoint kind is '" + kind + "', expected 'gru'");
  const OutputHead head = detail::head_from_name(detail::expect_kv(in, "head"));

  detail::LineTokens t(detail::expect_kv(in, "dims"), in.line_no());
  const int feature = static_cast<int>(t.integer());
  const int hidden = static_cast<int>(t.integer());
  const int output = static_cast<int>(t.integer());
  t.expect_done();
  const std::uint64_t seed = parse_u64(detail::expect_kv(in, "seed"));
  if (seed_out != nullptr) *seed_out = seed;
  parse_hex64(detail::expect_kv(in, "config_hash"));

  GruSeq2Seq model = make_gru(feature, hidden, output, head, 0);
  const VecR params = detail::read_params(in);
  if (params.size() != model.num_params())
    throw IoError("parameter count " + std::to_string(params.size()) + " does not match dims (" +
                  std::to_string(model.num_params()) + " expected)");
  gru_unpack(model, params);
  return model;
}

}  // namespace csilab
