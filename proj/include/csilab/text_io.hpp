#pragma once
// Line-oriented nested key/value text format used for configs, datasets, and
// checkpoints, plus decimal float formatting and CSV helpers. Floats are
// printed with shortest-round-trip precision so write/read/write is
// bit-stable.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "csilab/common.hpp"

namespace csilab {

inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("not a decimal number: '" + std::string(s) + "'");
  return x;
}

inline long long parse_int(std::string_view s) {
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("not an integer: '" + std::string(s) + "'");
  return x;
}

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("not an unsigned integer: '" + std::string(s) + "'");
  return x;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw IoError("not a boolean: '" + std::string(s) + "'");
}

inline std::uint64_t parse_hex64(std::string_view s) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x, 16);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("not a hex integer: '" + std::string(s) + "'");
  return x;
}

inline std::string format_hex64(std::uint64_t x) {
  char buf[17] = "0000000000000000";
  char tmp[17];
  const auto res = std::to_chars(tmp, tmp + sizeof tmp, x, 16);
  const auto len = static_cast<std::size_t>(res.ptr - tmp);
  for (std::size_t i = 0; i < len; ++i) buf[16 - len + i] = tmp[i];
  return std::string(buf, 16);
}

/// Ordered tree of `key value` scalars and `key { ... }` blocks. Order is
/// preserved so serialization is deterministic.
struct TextNode {
  struct Entry;
  std::vector<Entry> entries;

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, long long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  TextNode& add_block(const std::string& key);

  bool has(const std::string& key) const;
  int count(const std::string& key) const;
  const std::string& value(const std::string& key) const;
  const TextNode& block(const std::string& key) const;
  std::vector<const TextNode*> blocks(const std::string& key) const;
};

struct TextNode::Entry {
  std::string key;
  bool is_block = false;
  std::string value;
  TextNode child;
};

inline void TextNode::add(const std::string& key, const std::string& value) {
  Entry e;
  e.key = key;
  e.value = value;
  entries.push_back(std::move(e));
}

inline TextNode& TextNode::add_block(const std::string& key) {
  Entry e;
  e.key = key;
  e.is_block = true;
  entries.push_back(std::move(e));
  return entries.back().child;
}

inline bool TextNode::has(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return true;
  return false;
}

inline int TextNode::count(const std::string& key) const {
  int n = 0;
  for (const auto& e : entries)
    if (e.key == key) ++n;
  return n;
}

inline const std::string& TextNode::value(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key && !e.is_block) return e.value;
  throw IoError("missing value '" + key + "'");
}

inline const TextNode& TextNode::block(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key && e.is_block) return e.child;
  throw IoError("missing block '" + key + "'");
}

inline std::vector<const TextNode*> TextNode::blocks(const std::string& key) const {
  std::vector<const TextNode*> out;
  for (const auto& e : entries)
    if (e.key == key && e.is_block) out.push_back(&e.child);
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline void serialize_node(const TextNode& node, std::string& out, int depth) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  for (const auto& e : node.entries) {
    if (e.is_block) {
      out += indent + e.key + " {\n";
      serialize_node(e.child, out, depth + 1);
      out += indent + "}\n";
    } else {
      out += indent + e.key;
      if (!e.value.empty()) out += " " + e.value;
      out += "\n";
    }
  }
}

}  // namespace detail

inline std::string serialize_text(const TextNode& root) {
  std::string out;
  detail::serialize_node(root, out, 0);
  return out;
}

/// Parses the nested format. Lines starting with '#' are comments; a bare '}'
/// closes the innermost block.
inline TextNode parse_text(std::string_view text) {
  TextNode root;
  std::vector<TextNode*> stack = {&root};
  std::vector<int> opened = {0};
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line == "}") {
      if (stack.size() == 1) throw IoError("line " + std::to_string(line_no) + ": unmatched '}'");
      stack.pop_back();
      opened.pop_back();
      continue;
    }
    const std::size_t sp = line.find_first_of(" \t");
    const std::string key(line.substr(0, sp));
    const std::string_view rest = sp == std::string_view::npos
                                      ? std::string_view{}
                                      : detail::trim(line.substr(sp + 1));
    if (rest == "{") {
      stack.push_back(&stack.back()->add_block(key));
      opened.push_back(line_no);
    } else if (!rest.empty() && rest.back() == '{') {
      throw IoError("line " + std::to_string(line_no) + ": '{' must end its own 'key {' line");
    } else {
      stack.back()->add(key, std::string(rest));
    }
  }
  if (stack.size() != 1)
    throw IoError("unterminated block opened at line " + std::to_string(opened.back()));
  return root;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// RFC-4180 quoting: fields containing commas, quotes, or newlines are quoted
/// and embedded quotes doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ",";
    out += csv_field(fields[i]);
  }
  out += "\n";
  return out;
}

/// Comment line stamped at the top of every report so each artifact records
/// which config and master seed produced it.
inline std::string report_stamp(std::uint64_t config_hash, std::uint64_t master_seed) {
  return "# config_hash=" + format_hex64(config_hash) +
         " master_seed=" + std::to_string(master_seed) + "\n";
}

}  // namespace csilab
