#pragma once

#include "powerdiag/error.hpp"

#include <charconv>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace powerdiag::text {

/// 17 significant digits: every double survives a write/read cycle.
[[nodiscard]] inline std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    if (ec != std::errc{}) throw Error(ErrorKind::InvalidArgument, "cannot format value");
    return std::string(buf, end);
}

[[nodiscard]] inline std::string_view trim(std::string_view s) noexcept {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Strict decimal parse; accepts "nan"/"inf" spellings produced by format_real.
[[nodiscard]] inline bool parse_real(std::string_view s, double& out) noexcept {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    if (s == "nan") { out = std::nan(""); return true; }
    if (s == "inf") { out = HUGE_VAL; return true; }
    if (s == "-inf") { out = -HUGE_VAL; return true; }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

[[nodiscard]] inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

[[nodiscard]] inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Writes to a sibling temporary and renames over the target, so readers
/// never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorKind::IoError, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::IoError, "cannot rename onto " + path.string());
    }
}


/// Flat `key = value` configuration. `#` starts a comment; blank lines are
/// skipped; a repeated key keeps its last value.
[[nodiscard]] inline std::map<std::string, std::string> parse_key_values(std::string_view src) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    for (auto raw : split(src, '\n')) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        auto line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": expected key = value", line_no);
        }
        auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": empty key", line_no);
        }
        out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

[[nodiscard]] inline double require_real(std::string_view key, std::string_view value) {
    double out = 0.0;
    if (!parse_real(value, out)) {
        throw Error(ErrorKind::ParseError,
                    "key '" + std::string(key) + "': not a number: '" + std::string(value) + "'");
    }
    return out;
}

[[nodiscard]] inline std::uint64_t require_count(std::string_view key, std::string_view value) {
    value = trim(value);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorKind::ParseError, "key '" + std::string(key) +
                                               "': not a non-negative integer: '" +
                                               std::string(value) + "'");
    }
    return out;
}

}  // namespace powerdiag::text
