#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mflab/errors.hpp"

namespace mflab::harness {

inline constexpr const char* kToolVersion = "mflab 0.1.0";
inline constexpr int kFormatVersion = 1;

// Flat key = value experiment description. '#' starts a comment; keys are
// unique; unknown keys are rejected against the per-experiment schema.
struct ExperimentSpec {
    std::string experiment;
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
};

ExperimentSpec parse_spec_text(const std::string& text);
ExperimentSpec parse_spec_file(const std::string& path);

// Schema check only (run() validates again before executing).
void validate_spec(const ExperimentSpec& spec);

std::vector<std::string> list_experiments();
std::string describe_experiment(const std::string& kind);

// FNV-1a over the canonical sorted key=value lines; formatting and comments
// do not affect it.
std::uint64_t spec_hash(const ExperimentSpec& spec);
std::string spec_hash_hex(const ExperimentSpec& spec);

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// 17 significant digits, C locale, LF endings.
std::string format_double(double x);
void write_csv(const std::string& path, const ResultTable& table, const std::string& hash_hex);

struct CsvFile {
    std::string hash_hex;
    ResultTable table;
};
CsvFile read_csv(const std::string& path);

struct RunOutput {
    std::vector<std::string> files;   // paths written, deterministic order
};

RunOutput run(const ExperimentSpec& spec, const std::string& out_dir, bool quiet = true);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};

// Least squares on (log x, log y); rejects nonpositive data.
RateFit fit_rate(const ResultTable& table, const std::string& x_col, const std::string& y_col);

}  // namespace mflab::harness
