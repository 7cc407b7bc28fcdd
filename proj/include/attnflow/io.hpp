#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attnflow/common.hpp"

namespace attnflow::io {

/// Decimal with 17 significant digits; round-trips every finite double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Ordered key=value block written at the top of every output file.
class HeaderBlock {
 public:
  HeaderBlock& set(std::string key, std::string value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = std::move(value);
        return *this;
      }
    entries_.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  HeaderBlock& set(std::string key, double value) { return set(std::move(key), fmt17(value)); }
  HeaderBlock& set(std::string key, std::uint64_t value) {
    return set(std::move(key), std::to_string(value));
  }
  HeaderBlock& set(std::string key, int value) { return set(std::move(key), std::to_string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Writes `<prefix>key=value` lines.
  void write(std::ostream& os, std::string_view prefix = "") const {
    for (const auto& [k, v] : entries_) os << prefix << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Key whose line is excluded from content digests.
inline constexpr std::string_view kTimestampKey = "created";

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// FNV-1a 64-bit digest over the text, skipping any line that carries the
/// timestamp key (with or without a leading "# ").
inline std::uint64_t content_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    std::string_view body = line;
    if (body.starts_with("# ")) body.remove_prefix(2);
    const bool skip = body.starts_with(kTimestampKey) && body.size() > kTimestampKey.size() &&
                      body[kTimestampKey.size()] == '=';
    if (!skip) {
      for (char c : line) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
      h ^= '\n';
      h *= 0x100000001b3ULL;
    }
    pos = end + 1;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes to `<path>.tmp` then renames over `path`.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = s.find(sep, pos);
    out.emplace_back(s.substr(pos, end == std::string_view::npos ? s.size() - pos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("trailing characters in number '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw FormatError("not a number: '" + s + "'");
  } catch (const std::out_of_range&) {
    throw FormatError("number out of range: '" + s + "'");
  }
}

inline long long parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw FormatError("trailing characters in integer '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw FormatError("not an integer: '" + s + "'");
  } catch (const std::out_of_range&) {
    throw FormatError("integer out of range: '" + s + "'");
  }
}

/// Reads leading key=value lines (optionally prefixed by "# ") and stops at the
/// first line without '=', which is consumed and handed back through
/// `first_body_line`.
inline std::map<std::string, std::string> read_header(std::istream& is, std::string& first_body_line,
                                                     bool& has_body_line) {
  std::map<std::string, std::string> kv;
  std::string line;
  has_body_line = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view body = line;
    if (body.starts_with("# ")) body.remove_prefix(2);
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      first_body_line = line;
      has_body_line = true;
      break;
    }
    kv.emplace(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
  }
  return kv;
}

inline const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing header key '" + key + "'");
  return it->second;
}

}  // namespace attnflow::io
