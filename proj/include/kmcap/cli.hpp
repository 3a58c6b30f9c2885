#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kmcap/fading.hpp"

namespace kmcap::cli {

/// Fully resolved run configuration (config file values overridden by flags).
struct RunConfig {
    std::string command;  // hos | metrics | validate | convergence
    std::string model = "iid-km";
    std::vector<double> kappa{1.0};
    std::vector<double> mu{1.0};
    std::vector<double> omega_db{0.0};  // per band (kappa-mu models)
    double gamma_bar_db = 0.0;          // aggregate SNR (shadowed models)
    double m = 1.0;
    int M = 1;
    std::optional<double> rho;
    std::string rho_matrix_file;
    std::optional<double> xi;
    std::optional<double> beta;
    std::vector<int> orders{1};
    double snr_start_db = 0.0, snr_stop_db = 0.0, snr_step_db = 1.0;
    bool snr_sweep = false;
    double tol = 1e-5;
    long long samples = 1000000;
    std::uint64_t seed = 1;
    std::string out_path;      // empty = stdout
    std::string format = "csv";  // csv | json
    std::vector<std::string> regimes{"exact", "high", "low"};
    bool report_peak = false;
};

/// Flat key = value config file (# comments). Unknown keys are an error.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Apply a key/value pair onto the config; throws on unknown keys/bad values.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

void validate(const RunConfig& cfg);

/// SNR grid in dB (single point when no sweep was requested).
std::vector<double> snr_grid(const RunConfig& cfg);

/// Model at a given SNR point (dB). The swept parameter is omega (per band;
/// band 1 for i.n.i.d.) or gamma_bar for shadowed models.
fading::ChannelModel make_model(const RunConfig& cfg, double snr_db);

/// One emitted record (CSV row / JSON object).
struct Record {
    std::string model;
    double snr_db = 0.0;
    int n = 0;
    std::string regime;
    double value = 0.0;
    long long terms = 0;
    double tail = 0.0;
    std::string notes;
};

void write_csv(std::ostream& os, const std::vector<Record>& recs);
void write_json(std::ostream& os, const std::vector<Record>& recs);

/// Entry points per subcommand; return process exit codes
/// (0 ok, 1 validation failure, 2 usage/config error, 3 numerical failure).
int cmd_hos(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_metrics(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_convergence(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full argv driver used by the binary.
int run_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kmcap::cli
