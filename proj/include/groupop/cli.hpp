#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "groupop/core.hpp"

namespace groupop::cli {

/// Raised for malformed or inconsistent configurations (exit status 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string kind;  // simulate | ensemble | moments | accuracy | sweep2g | sweep3g | emergence
    ModelParams params;
    /// Row-major a_IJ(0); empty means all zeros.
    std::vector<double> init;
    std::int64_t steps = 1000;
    std::int64_t runs = 1000;
    std::uint64_t seed = 1;
    std::int64_t sample_every = 1;
    std::filesystem::path out = "out";
    bool deviations = true;
    int threads = 0;

    // accuracy
    std::vector<int> compare_gossip{0, 2};
    bool second_moments = false;
    bool mean_normalised = false;

    // sweeps
    double gap_first = 0.05;
    double gap_last = 2.0;
    double gap_step = 0.05;
    std::int64_t t_star = 1000;

    // emergence
    int seeds = 20;
    double hierarchy_gap = 0.5;
    double flat_gap = 0.2;
    double seed_fraction = 0.7;

    InitialCondition initial_condition() const;
};

/// Reads a JSON object; unknown keys and wrong types are errors.
ExperimentConfig parse_config(const std::string& json_text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every problem with the configuration, empty when runnable.
std::vector<std::string> check_config(const ExperimentConfig& config);

/// Runs the experiment, writes its files under config.out and a summary to
/// out. Returns the exit status.
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Full command line entry point.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Rows of (i, j, a_ij, group_i, group_j).
void emit_matrix_heatmap_data(const OpinionMatrix& matrix, const GroupLayout& layout,
                              const std::filesystem::path& path);

/// Plain CSV table: header row then numeric rows.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
Table read_csv(const std::filesystem::path& path);

/// 17 significant digits, enough to read back the same double.
std::string format_number(double v);

}  // namespace groupop::cli
