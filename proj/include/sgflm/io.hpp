#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sgflm/experiments.hpp"
#include "sgflm/fit.hpp"
#include "sgflm/function_space.hpp"
#include "sgflm/inference.hpp"
#include "sgflm/lattice.hpp"
#include "sgflm/model.hpp"
#include "sgflm/simulate.hpp"

namespace sgflm::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Stamped on every output file: CSVs get a leading `# ...` comment line,
/// JSON files a "provenance" object.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;

    json to_json() const;
    std::string csv_comment() const;
};

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view text);

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

/// Reads a comma separated file, skipping `#` lines. Returns the header
/// fields and the numeric rows. Throws DataError on malformed content.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const fs::path& path);

void write_function_csv(const fs::path& path, const FunctionGrid& f, const Provenance& prov);
FunctionGrid read_function_csv(const fs::path& path);

json lattice_to_json(const LatticeSpec& spec);
LatticeSpec lattice_from_json(const json& j);

json theta_to_json(const Theta& theta, bool include_eta = true);
Theta theta_from_json(const json& j);

json dataset_meta_to_json(const Dataset& d);

/// Writes <stem>_scores.csv, <stem>_responses.csv and <stem>_meta.json.
void write_dataset(const fs::path& dir, const std::string& stem, const Dataset& d,
                   const Provenance& prov);
Dataset read_dataset(const fs::path& scores_csv, const fs::path& responses_csv,
                     const fs::path& meta_json);

/// Writes every replicate plus manifest.json listing them.
void write_case(const fs::path& dir, const MCCase& mc, const Provenance& prov,
                const json& resolved_config);
/// Reads the replicates listed in dir/manifest.json; throws DataError when
/// anything is missing or inconsistent.
std::vector<Dataset> read_case(const fs::path& dir);

json fit_to_json(const FitResult& fit, double alpha_raw, const Provenance& prov);
/// Recovers model, p and theta_hat from a fit JSON document.
FitResult fit_from_json(const json& j);

void write_band_csv(const fs::path& path, const ConfidenceBand& band, const Provenance& prov,
                    const Eigen::VectorXd* truth = nullptr);

json sandwich_summary(const SandwichMatrices& sw);

/// Summary table: one row per metric, one column per (model, eta).
void write_table1_csv(const fs::path& path, std::span<const MCReport> reports,
                      const Provenance& prov);

/// One JSON object per case and eta.
void write_cases_jsonl(std::ostream& out, const MCReport& report);

json sim_config_to_json(const SimConfig& sim);
json fit_config_to_json(const FitConfig& fit);

} // namespace sgflm::io
