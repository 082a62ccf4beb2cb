#include "keyvalue.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace lesionquant {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<KeyValue> parse_key_values(std::string_view text) {
    std::vector<KeyValue> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
        KeyValue kv{trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), line_no};
        if (kv.key.empty()) throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

std::vector<KeyValue> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

namespace {

[[noreturn]] void bad(const KeyValue& kv, const char* what) {
    throw Error(ErrorCode::Config,
                "line " + std::to_string(kv.line) + ": " + kv.key + ": expected " + what + ", got '" + kv.value + "'");
}

}  // namespace

double kv_double(const KeyValue& kv) {
    double v = 0.0;
    const char* b = kv.value.data();
    const char* e = b + kv.value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) bad(kv, "a number");
    return v;
}

long kv_int(const KeyValue& kv) {
    long v = 0;
    const char* b = kv.value.data();
    const char* e = b + kv.value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) bad(kv, "an integer");
    return v;
}

bool kv_bool(const KeyValue& kv) {
    if (kv.value == "true" || kv.value == "1" || kv.value == "yes" || kv.value == "on") return true;
    if (kv.value == "false" || kv.value == "0" || kv.value == "no" || kv.value == "off") return false;
    bad(kv, "a boolean");
}

std::vector<double> kv_doubles(const KeyValue& kv) {
    std::vector<double> out;
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        out.push_back(kv_double(KeyValue{kv.key, tok, kv.line}));
        tok.clear();
    };
    for (char c : kv.value) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            tok += c;
    }
    flush();
    return out;
}

}  // namespace lesionquant
