#pragma once

// Line-based `key = value` configuration with a fixed key registry.  Every
// experiment knob has a registered default; assignments to unknown keys are
// rejected so typos fail loudly.  The resolved state echoes back out in
// registration order, and re-parsing that echo reproduces the state exactly
// (values are kept as the literal strings that were assigned).

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semalign/common.hpp"

namespace semalign {

/// Raised for malformed files, unknown keys, and values that fail validation.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a command's input file (dataset, checkpoint, labels) is absent.
struct ArtifactError : std::runtime_error {
    explicit ArtifactError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

}  // namespace detail

class ConfigMap {
public:
    /// Registers a key with its default. Call order fixes the echo order.
    void define(const std::string& key, const std::string& default_value) {
        if (index_.count(key)) throw std::logic_error("duplicate config key: " + key);
        index_[key] = entries_.size();
        entries_.push_back({key, default_value});
    }

    bool known(const std::string& key) const { return index_.count(key) != 0; }

    void set(const std::string& key, std::string value) {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
        entries_[it->second].value = std::move(value);
    }

    /// Applies one `key=value` or `key = value` assignment.
    void assign(std::string_view text, const std::string& where) {
        const std::size_t eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(where + ": expected key = value, got '" + std::string(text) + "'");
        const std::string key(detail::trim(text.substr(0, eq)));
        const std::string value(detail::trim(text.substr(eq + 1)));
        if (key.empty()) throw ConfigError(where + ": empty key");
        set(key, value);
    }

    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ArtifactError("cannot open config file '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string_view s = detail::trim(line);
            if (s.empty() || s.front() == '#') continue;
            assign(s, path + ":" + std::to_string(lineno));
        }
    }

    const std::string& get(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
        return entries_[it->second].value;
    }

    double get_double(const std::string& key) const {
        try {
            return parse_double(get(key));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key '" + key + "' is not a number: '" + get(key) + "'");
        }
    }

    long long get_int(const std::string& key) const {
        try {
            return parse_int(get(key));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key '" + key + "' is not an integer: '" + get(key) + "'");
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1" || v == "on") return true;
        if (v == "false" || v == "0" || v == "off") return false;
        throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
    }

    /// Comma-separated list of numbers; blanks between commas are rejected.
    std::vector<double> get_double_list(const std::string& key) const {
        const std::string& v = get(key);
        std::vector<double> out;
        std::string_view rest = v;
        while (!rest.empty()) {
            const std::size_t comma = rest.find(',');
            const std::string_view item = detail::trim(rest.substr(0, comma));
            if (item.empty())
                throw ConfigError("config key '" + key + "' has an empty list item");
            try {
                out.push_back(parse_double(item));
            } catch (const std::invalid_argument&) {
                throw ConfigError("config key '" + key + "' has a bad list item '" +
                                  std::string(item) + "'");
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    void write(std::ostream& os) const {
        for (const Entry& e : entries_) os << e.key << " = " << e.value << '\n';
    }

    std::string to_string() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

private:
    struct Entry {
        std::string key;
        std::string value;
    };
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace semalign
