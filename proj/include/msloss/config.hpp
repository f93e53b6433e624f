#pragma once

// Run configuration: a UTF-8 key/value document with dotted keys.
//
//     # comment
//     method = ms
//     hp.alpha = 2
//     data.synth.classes = 8
//
// Unknown keys and malformed values are errors.

#include "msloss/core.hpp"
#include "msloss/eval.hpp"
#include "msloss/losses.hpp"
#include "msloss/trainer.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace msloss {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DataSource { synthetic, file };

struct RunConfig {
    TrainConfig train;
    DataSource source = DataSource::synthetic;
    SynthSpec synth;
    std::string data_path;
    std::string test_path;
    std::string query_path;
    std::string gallery_path;
    std::string out;

    // gradcheck
    int gradcheck_instances = 50;
    int gradcheck_e2e_instances = 20;
    double gradcheck_h = 1e-6;
    double gradcheck_tolerance = 1e-4;
    std::string gradcheck_corrupt = "none";

    // dump-weights
    std::string dump_scenario = "S";
    int dump_points = 11;

    // ablate; empty means every method
    std::vector<Method> ablate_methods;

    bool output_timing = false;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("bad value for '" + std::string(key) + "': '" + std::string(text) + "'");
    return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw ConfigError("bad boolean for '" + std::string(key) + "': '" + std::string(text) + "'");
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i)
            out += ',';
        out += f(xs[i]);
    }
    return out;
}

inline std::vector<std::string_view> split_list(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        parts.push_back(trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                               : comma - pos)));
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return parts;
}

struct ConfigKey {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, ConfigKey, std::less<>>& config_keys() {
    using K = std::string_view;
    static const std::map<std::string, ConfigKey, std::less<>> keys = [] {
        std::map<std::string, ConfigKey, std::less<>> k;
        auto real = [&](const char* name, auto field) {
            k[name] = {[field, name](RunConfig& c, K v) { field(c) = parse_number<double>(name, v); },
                       [field](const RunConfig& c) { return format_double(field(c)); }};
        };
        auto integer = [&](const char* name, auto field) {
            k[name] = {[field, name](RunConfig& c, K v) { field(c) = parse_number<int>(name, v); },
                       [field](const RunConfig& c) { return std::to_string(field(c)); }};
        };
        auto text = [&](const char* name, auto field) {
            k[name] = {[field](RunConfig& c, K v) { field(c) = std::string(v); },
                       [field](const RunConfig& c) { return std::string(field(c)); }};
        };

        k["method"] = {[](RunConfig& c, K v) { c.train.method = parse_method(v); },
                       [](const RunConfig& c) { return std::string(method_name(c.train.method)); }};
        k["seed"] = {[](RunConfig& c, K v) { c.train.seed = parse_number<std::uint64_t>("seed", v); },
                     [](const RunConfig& c) { return std::to_string(c.train.seed); }};
        integer("epochs", [](auto& c) -> auto& { return c.train.epochs; });
        integer("train.iters_per_epoch", [](auto& c) -> auto& { return c.train.iters_per_epoch; });

        real("hp.alpha", [](auto& c) -> auto& { return c.train.hp.alpha; });
        real("hp.beta", [](auto& c) -> auto& { return c.train.hp.beta; });
        real("hp.lambda", [](auto& c) -> auto& { return c.train.hp.lambda; });
        real("hp.epsilon", [](auto& c) -> auto& { return c.train.hp.epsilon; });
        real("hp.margin", [](auto& c) -> auto& { return c.train.hp.margin; });

        integer("batch.classes", [](auto& c) -> auto& { return c.train.batch.classes; });
        integer("batch.m", [](auto& c) -> auto& { return c.train.batch.per_class; });
        integer("model.l", [](auto& c) -> auto& { return c.train.embedding_dim; });

        real("opt.lr", [](auto& c) -> auto& { return c.train.adam.lr; });
        real("opt.beta1", [](auto& c) -> auto& { return c.train.adam.beta1; });
        real("opt.beta2", [](auto& c) -> auto& { return c.train.adam.beta2; });
        real("opt.eps", [](auto& c) -> auto& { return c.train.adam.eps; });

        k["data.source"] = {[](RunConfig& c, K v) {
                                if (v == "synthetic")
                                    c.source = DataSource::synthetic;
                                else if (v == "file")
                                    c.source = DataSource::file;
                                else
                                    throw ConfigError("data.source must be 'synthetic' or 'file'");
                            },
                            [](const RunConfig& c) {
                                return std::string(c.source == DataSource::synthetic ? "synthetic" : "file");
                            }};
        integer("data.synth.classes", [](auto& c) -> auto& { return c.synth.classes; });
        integer("data.synth.per_class", [](auto& c) -> auto& { return c.synth.per_class; });
        integer("data.synth.dim", [](auto& c) -> auto& { return c.synth.dim; });
        real("data.synth.noise", [](auto& c) -> auto& { return c.synth.noise; });
        k["data.synth.seed"] = {
            [](RunConfig& c, K v) { c.synth.seed = parse_number<std::uint64_t>("data.synth.seed", v); },
            [](const RunConfig& c) { return std::to_string(c.synth.seed); }};
        text("data.path", [](auto& c) -> auto& { return c.data_path; });
        text("data.test_path", [](auto& c) -> auto& { return c.test_path; });
        text("data.query_path", [](auto& c) -> auto& { return c.query_path; });
        text("data.gallery_path", [](auto& c) -> auto& { return c.gallery_path; });

        k["eval.ks"] = {[](RunConfig& c, K v) {
                            c.train.ks.clear();
                            for (auto part : split_list(v)) {
                                const int kv = parse_number<int>("eval.ks", part);
                                if (kv < 1)
                                    throw ConfigError("eval.ks entries must be >= 1");
                                c.train.ks.push_back(kv);
                            }
                        },
                        [](const RunConfig& c) {
                            return join<int>(c.train.ks, [](const int& x) { return std::to_string(x); });
                        }};

        text("out", [](auto& c) -> auto& { return c.out; });

        integer("gradcheck.instances", [](auto& c) -> auto& { return c.gradcheck_instances; });
        integer("gradcheck.e2e_instances", [](auto& c) -> auto& { return c.gradcheck_e2e_instances; });
        real("gradcheck.h", [](auto& c) -> auto& { return c.gradcheck_h; });
        real("gradcheck.tolerance", [](auto& c) -> auto& { return c.gradcheck_tolerance; });
        k["gradcheck.corrupt"] = {[](RunConfig& c, K v) {
                                      if (v != "none")
                                          (void)parse_method(v);
                                      c.gradcheck_corrupt = std::string(v);
                                  },
                                  [](const RunConfig& c) { return c.gradcheck_corrupt; }};

        k["dump.scenario"] = {[](RunConfig& c, K v) {
                                  if (v != "S" && v != "P" && v != "N")
                                      throw ConfigError("dump.scenario must be S, P or N");
                                  c.dump_scenario = std::string(v);
                              },
                              [](const RunConfig& c) { return c.dump_scenario; }};
        integer("dump.points", [](auto& c) -> auto& { return c.dump_points; });

        k["ablate.methods"] = {[](RunConfig& c, K v) {
                                   c.ablate_methods.clear();
                                   for (auto part : split_list(v))
                                       c.ablate_methods.push_back(parse_method(part));
                               },
                               [](const RunConfig& c) {
                                   if (c.ablate_methods.empty())
                                       return std::string("all");
                                   return join<Method>(c.ablate_methods, [](const Method& m) {
                                       return std::string(method_name(m));
                                   });
                               }};
        k["output.timing"] = {[](RunConfig& c, K v) { c.output_timing = parse_bool("output.timing", v); },
                              [](const RunConfig& c) {
                                  return std::string(c.output_timing ? "true" : "false");
                              }};
        return k;
    }();
    return keys;
}

}  // namespace detail

/// Applies one key/value assignment.
inline void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
    const auto& keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end())
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    if (key == "ablate.methods" && value == "all") {
        config.ablate_methods.clear();
        return;
    }
    it->second.set(config, value);
}

inline void validate(const RunConfig& config) {
    try {
        config.train.hp.validate();
        config.train.batch.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (config.train.embedding_dim < 2)
        throw ConfigError("model.l must be >= 2");
    if (config.train.epochs < 0)
        throw ConfigError("epochs must be >= 0");
    if (config.train.ks.empty())
        throw ConfigError("eval.ks must not be empty");
    if (!(config.train.adam.lr > 0.0))
        throw ConfigError("opt.lr must be > 0");
    if (config.source == DataSource::file && config.data_path.empty())
        throw ConfigError("data.source = file requires data.path");
    if (config.query_path.empty() != config.gallery_path.empty())
        throw ConfigError("data.query_path and data.gallery_path go together");
    if (config.gradcheck_instances < 1 || config.gradcheck_e2e_instances < 0)
        throw ConfigError("gradcheck instance counts out of range");
    if (!(config.gradcheck_h >= 1e-6 && config.gradcheck_h <= 1e-3))
        throw ConfigError("gradcheck.h must lie in [1e-6, 1e-3]");
    if (config.dump_points < 2)
        throw ConfigError("dump.points must be >= 2");
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = detail::trim(line);
        if (text.empty() || text.front() == '#')
            continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        try {
            set_config_value(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate(config);
    return config;
}

inline RunConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    return parse_config(in);
}

/// Every key with its effective value, in key order.
inline std::vector<std::pair<std::string, std::string>> effective_config(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, entry] : detail::config_keys())
        out.emplace_back(key, entry.get(config));
    return out;
}

}  // namespace msloss
