#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lesionquant {

/// `key = value` lines; `#` starts a comment; blank lines are ignored.
/// Keys may repeat, order is preserved.
struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

std::vector<KeyValue> parse_key_values(std::string_view text);
std::vector<KeyValue> read_key_values(const std::filesystem::path& path);

// Conversions throw Config errors naming the key and line.
double kv_double(const KeyValue& kv);
long kv_int(const KeyValue& kv);
bool kv_bool(const KeyValue& kv);
std::vector<double> kv_doubles(const KeyValue& kv);  ///< whitespace or comma separated

std::string trim(std::string_view s);

}  // namespace lesionquant
