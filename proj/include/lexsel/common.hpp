#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lexsel {

// Error taxonomy mirrored by CLI exit codes: config=2, data/analysis=3, numeric=4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct analysis_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::optional<int64_t> parse_int(std::string_view s) {
    s = trim(s);
    int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

// Shortest decimal string that parses back to the same double, so table
// round-trips are bit-exact.
inline std::string format_real(double x) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

// Fit controls shared by the gradient-based model fits.
struct FitConfig {
    double prior_rate = 1.0;      // Exponential prior rate on cutpoint gaps
    double smoothing = 1e-4;      // L2 penalty on location parameters
    double learning_rate = 0.05;
    double tolerance = 1e-8;      // objective-change convergence threshold
    int patience = 25;            // iterations the change must stay below tolerance
    int max_iters = 5000;
    uint64_t seed = 0;
};

struct FitDiagnostics {
    std::vector<double> objective_trace;
    double final_objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

}  // namespace lexsel
