#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rankvocab {

// Error taxonomy mirrored by the C API status codes.
class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

bool parse_double(std::string_view s, double* out);
bool parse_int(std::string_view s, int64_t* out);

/// %.Ng formatting; N=17 round-trips doubles exactly.
std::string format_g(double v, int digits = 12);

uint64_t fnv1a64(std::string_view s);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// Flat key=value config text. '#' starts a comment, blank lines allowed.
using KvMap = std::map<std::string, std::string>;
KvMap parse_kv_text(const std::string& text);
KvMap parse_kv_file(const std::string& path);
std::string dump_kv(const KvMap& kv);

/// Value for `key`; throws InvalidArgument when absent.
const std::string& kv_lookup(const KvMap& kv, const std::string& key);

bool kv_bool(const KvMap& kv, const std::string& key, bool fallback);
double kv_double(const KvMap& kv, const std::string& key, double fallback);
int64_t kv_int(const KvMap& kv, const std::string& key, int64_t fallback);

}  // namespace rankvocab
