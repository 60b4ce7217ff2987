// Copyright 2026 The icontrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pulse-train exchange format.
//
//   duration_s,rabi_hz,phase_rad
//   1.0000000000000000e-04,2500,0.78539816339744828
//
// One row per segment, first-in-time first. Values are written with 17
// significant digits so that write -> read reproduces every double exactly.

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icontrol/su2.hpp"

namespace icontrol {

inline constexpr std::string_view kPulseCsvHeader = "duration_s,rabi_hz,phase_rad";

/// Decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view text, const std::string& context) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw std::invalid_argument(context + ": cannot parse number '" + std::string(text) + "'");
    return v;
}

inline std::string write_pulse_csv(const PulseTrain& train) {
    std::string out(kPulseCsvHeader);
    out += '\n';
    for (const auto& s : train.segments()) {
        out += format_double(s.duration());
        out += ',';
        out += format_double(s.rabi_hz());
        out += ',';
        out += format_double(s.phase());
        out += '\n';
    }
    return out;
}

inline PulseTrain read_pulse_csv(std::string_view text, std::string label = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::vector<PulseSegment> segs;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = "pulse csv line " + std::to_string(lineno);
        if (!header_seen) {
            if (line != kPulseCsvHeader)
                throw std::invalid_argument(where + ": expected header '" +
                                            std::string(kPulseCsvHeader) + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (;;) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 3)
            throw std::invalid_argument(where + ": expected 3 fields, got " +
                                        std::to_string(fields.size()));
        try {
            segs.push_back(PulseSegment::from_hz(parse_double(fields[0], where),
                                                 parse_double(fields[1], where),
                                                 parse_double(fields[2], where)));
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            throw std::invalid_argument(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
        }
    }
    if (!header_seen) throw std::invalid_argument("pulse csv: missing header");
    if (segs.empty()) throw std::invalid_argument("pulse csv: no segments");
    return PulseTrain(std::move(segs), std::move(label));
}

inline PulseTrain load_pulse_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open pulse file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return read_pulse_csv(ss.str(), path);
}

}  // namespace icontrol
