#pragma once

// Two-column paired-sample CSV: header `x,v`, one pair per row.

#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"
#include "powerdiag/text.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace powerdiag {

[[nodiscard]] inline std::vector<PairedSample> parse_pairs_csv(std::string_view csv) {
    std::vector<PairedSample> out;
    std::size_t line_no = 0;
    bool seen_header = false;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        auto line = text::trim(csv.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            if (eol == csv.size()) break;
            continue;
        }
        if (!seen_header) {
            if (line != "x,v") {
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(line_no) + ": expected header 'x,v'", line_no);
            }
            seen_header = true;
            continue;
        }
        auto fields = text::split(line, ',');
        PairedSample p;
        if (fields.size() != 2 || !text::parse_real(fields[0], p.x) ||
            !text::parse_real(fields[1], p.v)) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": expected two decimal fields",
                        line_no);
        }
        if (!std::isfinite(p.x) || !std::isfinite(p.v)) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": non-finite value", line_no);
        }
        out.push_back(p);
        if (eol == csv.size()) break;
    }
    if (!seen_header) throw Error(ErrorKind::ParseError, "missing header 'x,v'", 1);
    return out;
}

[[nodiscard]] inline std::string write_pairs_csv(std::span<const PairedSample> pairs) {
    std::string out = "x,v\n";
    out.reserve(out.size() + pairs.size() * 48);
    for (const auto& p : pairs) {
        out += text::format_real(p.x);
        out += ',';
        out += text::format_real(p.v);
        out += '\n';
    }
    return out;
}

}  // namespace powerdiag
