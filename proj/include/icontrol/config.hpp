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


// INI-style configuration with layered overrides.
//
//   # comment
//   [section]
//   key = value
//
// Sections may repeat (e.g. several [band] blocks). Values are resolved in
// the order: command-line override, environment, file, built-in default.
// The environment name of section.key is ICONTROL_<SECTION>_<KEY> in upper
// case, with '.' and '-' mapped to '_'.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icontrol/pulse_csv.hpp"

namespace icontrol {

/// Bad configuration: syntax, unknown key or an unusable value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

struct ConfigSection {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, ConfigEntry>> entries;

    ConfigEntry* find(std::string_view key) {
        for (auto& [k, e] : entries)
            if (k == key) return &e;
        return nullptr;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace detail

class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, std::string source = "<config>") {
        Config cfg;
        cfg.source_ = std::move(source);
        std::istringstream in{std::string(text)};
        std::string raw;
        int line = 0;
        ConfigSection* current = nullptr;
        while (std::getline(in, raw)) {
            ++line;
            std::string_view s = raw;
            if (const auto hash = s.find_first_of("#;"); hash != std::string_view::npos) s = s.substr(0, hash);
            s = detail::trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') cfg.fail(line, "unterminated section header");
                const auto name = detail::trim(s.substr(1, s.size() - 2));
                if (name.empty()) cfg.fail(line, "empty section name");
                cfg.sections_.push_back({detail::lower(name), line, {}});
                current = &cfg.sections_.back();
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string_view::npos) cfg.fail(line, "expected 'key = value'");
            const std::string key = detail::lower(detail::trim(s.substr(0, eq)));
            if (key.empty()) cfg.fail(line, "missing key before '='");
            if (!current) cfg.fail(line, "key '" + key + "' outside of any [section]");
            if (current->find(key)) cfg.fail(line, "duplicate key '" + key + "' in [" + current->name + "]");
            current->entries.push_back({key, {std::string(detail::trim(s.substr(eq + 1))), line, false}});
        }
        return cfg;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file " + path.string());
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str(), path.string());
    }

    const std::string& source() const { return source_; }
    std::vector<ConfigSection>& sections() { return sections_; }
    const std::vector<ConfigSection>& sections() const { return sections_; }

    /// The single section called `name`, or null. Repeats are an error.
    ConfigSection* unique(std::string_view name) {
        ConfigSection* hit = nullptr;
        for (auto& s : sections_) {
            if (s.name != name) continue;
            if (hit) fail(s.line, "section [" + s.name + "] may appear only once");
            hit = &s;
        }
        return hit;
    }

    std::vector<ConfigSection*> all(std::string_view name) {
        std::vector<ConfigSection*> out;
        for (auto& s : sections_)
            if (s.name == name) out.push_back(&s);
        return out;
    }

    bool has_section(std::string_view name) const {
        return std::any_of(sections_.begin(), sections_.end(), [&](const auto& s) { return s.name == name; });
    }

    /// Throws for the first key that no reader asked for.
    void check_all_used() const {
        for (const auto& s : sections_)
            for (const auto& [k, e] : s.entries)
                if (!e.used) fail(e.line, "unknown key '" + k + "' in [" + s.name + "]");
    }

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
    }

private:
    std::string source_;
    std::vector<ConfigSection> sections_;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

inline std::string env_name(std::string_view section, std::string_view key) {
    std::string n = "ICONTROL_";
    for (std::string_view part : {section, std::string_view("_"), key})
        for (char c : part) n += (c == '.' || c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return n;
}

/// Typed, layered lookup over a Config. Every resolved value is recorded so
/// the effective configuration can be written back out.
class Settings {
public:
    explicit Settings(Config cfg = {}, EnvLookup env = process_env, std::filesystem::path base_dir = {})
        : cfg_(std::move(cfg)), env_(std::move(env)), base_dir_(std::move(base_dir)) {}

    /// `section.key=value` from the command line.
    void add_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        const auto dot = assignment.rfind('.', eq);
        if (eq == std::string::npos || dot == std::string::npos || dot == 0 || dot + 1 >= eq)
            throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
        set_override(detail::lower(assignment.substr(0, dot)), detail::lower(assignment.substr(dot + 1, eq - dot - 1)),
                     std::string(detail::trim(assignment.substr(eq + 1))));
    }
    void set_override(const std::string& section, const std::string& key, std::string value) {
        overrides_[{section, key}] = std::move(value);
    }

    Config& config() { return cfg_; }
    const std::filesystem::path& base_dir() const { return base_dir_; }

    bool has(const std::string& section, const std::string& key) {
        return lookup(section, key, false).has_value();
    }

    std::string get_string(const std::string& section, const std::string& key, const std::string& def) {
        return resolve(section, key, def).first;
    }

    double get_double(const std::string& section, const std::string& key, double def) {
        const auto [v, where] = resolve(section, key, format_double(def));
        try {
            const double d = parse_double(v, where);
            if (!std::isfinite(d)) throw std::invalid_argument("");
            return d;
        } catch (const std::invalid_argument&) {
            throw ConfigError(where + ": " + section + "." + key + " expects a finite number, got '" + v + "'");
        }
    }

    long get_int(const std::string& section, const std::string& key, long def) {
        const auto [v, where] = resolve(section, key, std::to_string(def));
        long out = 0;
        const auto* end = v.data() + v.size();
        const auto [ptr, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc{} || ptr != end || v.empty())
            throw ConfigError(where + ": " + section + "." + key + " expects an integer, got '" + v + "'");
        return out;
    }

    bool get_bool(const std::string& section, const std::string& key, bool def) {
        const auto [v, where] = resolve(section, key, def ? "true" : "false");
        const std::string l = detail::lower(v);
        if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
        if (l == "false" || l == "no" || l == "off" || l == "0") return false;
        throw ConfigError(where + ": " + section + "." + key + " expects true or false, got '" + v + "'");
    }

    /// Comma-separated numbers.
    std::vector<double> get_list(const std::string& section, const std::string& key, const std::vector<double>& def) {
        std::string d;
        for (std::size_t i = 0; i < def.size(); ++i) d += (i ? "," : "") + format_double(def[i]);
        const auto [v, where] = resolve(section, key, d);
        std::vector<double> out;
        if (detail::trim(v).empty()) return out;
        std::string_view rest = v;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = rest.substr(0, comma);
            try {
                out.push_back(parse_double(item, where));
            } catch (const std::invalid_argument&) {
                throw ConfigError(where + ": " + section + "." + key + " expects a comma-separated list of numbers, got '" +
                                  v + "'");
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    std::vector<std::string> get_words(const std::string& section, const std::string& key,
                                       const std::string& def = "") {
        const std::string v = get_string(section, key, def);
        std::vector<std::string> out;
        std::string_view rest = v;
        if (detail::trim(rest).empty()) return out;
        while (true) {
            const auto comma = rest.find(',');
            out.emplace_back(detail::trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    /// One of `choices`; the value is compared case-insensitively.
    std::string get_choice(const std::string& section, const std::string& key, const std::string& def,
                           const std::vector<std::string>& choices) {
        const auto [v, where] = resolve(section, key, def);
        const std::string l = detail::lower(v);
        if (std::find(choices.begin(), choices.end(), l) != choices.end()) {
            resolved_[{section, key}] = l;
            return l;
        }
        std::string list;
        for (const auto& c : choices) list += (list.empty() ? "" : "|") + c;
        throw ConfigError(where + ": " + section + "." + key + " must be one of " + list + ", got '" + v + "'");
    }

    /// File path; relative paths are taken relative to the config file.
    std::filesystem::path get_path(const std::string& section, const std::string& key) {
        const auto [v, where] = resolve(section, key, "");
        if (v.empty()) throw ConfigError(where + ": " + section + "." + key + " is required");
        std::filesystem::path p(v);
        if (p.is_relative() && !base_dir_.empty() && !overrides_.count({section, key})) p = base_dir_ / p;
        p = std::filesystem::absolute(p).lexically_normal();
        resolved_[{section, key}] = p.string();
        return p;
    }

    /// Effective values as INI text: scalar sections in name order, then
    /// repeated sections from the file in their original order.
    std::string effective_ini(const std::vector<std::string>& repeated = {}) const {
        std::ostringstream out;
        std::string current;
        for (const auto& [sk, v] : resolved_) {
            if (sk.first != current) {
                out << (current.empty() ? "" : "\n") << "[" << sk.first << "]\n";
                current = sk.first;
            }
            out << sk.second << " = " << v << "\n";
        }
        for (const auto& s : cfg_.sections()) {
            if (std::find(repeated.begin(), repeated.end(), s.name) == repeated.end()) continue;
            out << "\n[" << s.name << "]\n";
            for (const auto& [k, e] : s.entries) out << k << " = " << e.value << "\n";
        }
        return out.str();
    }

    const std::map<std::pair<std::string, std::string>, std::string>& resolved() const { return resolved_; }

private:
    // Value and a description of where it came from.
    std::optional<std::pair<std::string, std::string>> lookup(const std::string& section, const std::string& key,
                                                              bool mark) {
        if (auto it = overrides_.find({section, key}); it != overrides_.end())
            return std::pair{it->second, std::string("--set " + section + "." + key)};
        const std::string ev = env_name(section, key);
        if (env_)
            if (auto v = env_(ev)) return std::pair{*v, "environment " + ev};
        if (ConfigSection* s = cfg_.unique(section))
            if (ConfigEntry* e = s->find(key)) {
                if (mark) e->used = true;
                return std::pair{e->value, cfg_.source() + ":" + std::to_string(e->line)};
            }
        return std::nullopt;
    }

    std::pair<std::string, std::string> resolve(const std::string& section, const std::string& key,
                                                const std::string& def) {
        // A file value shadowed by an override still counts as read.
        if (ConfigSection* s = cfg_.unique(section))
            if (ConfigEntry* e = s->find(key)) e->used = true;
        auto hit = lookup(section, key, true);
        auto out = hit ? *hit : std::pair{def, std::string("default")};
        resolved_[{section, key}] = out.first;
        return out;
    }

    Config cfg_;
    EnvLookup env_;
    std::filesystem::path base_dir_;
    std::map<std::pair<std::string, std::string>, std::string> overrides_;
    std::map<std::pair<std::string, std::string>, std::string> resolved_;
};

}  // namespace icontrol
