#pragma once

// File interchange: headered CSV with a leading time column, JSON with
// explicit shape arrays (row-major), and a raw binary feature matrix. All
// writers are atomic (temp file + rename). Readers throw DataError on
// malformed input.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "switchode/ctmc.hpp"
#include "switchode/denoise.hpp"
#include "switchode/model.hpp"
#include "switchode/model_select.hpp"
#include "switchode/simulate.hpp"

namespace switchode::io {

using denoise::PsiFeatures;
using simulate::ObservationSet;

void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

// Values are written with 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);
CsvTable read_csv(const std::string& path);

// Rows are (n*h, series.row(n)); value columns named <prefix>0..<prefix>{p-1}.
void write_series_csv(const std::string& path, const Eigen::MatrixXd& series, double h,
                      const std::string& prefix);

// Series CSV with uniform time grid starting at 0; returns the values and the
// grid step through h_out.
Eigen::MatrixXd read_series_csv(const std::string& path, double* h_out);

ObservationSet read_observations_csv(const std::string& path);

// Bare parameter object: {"k","p","m","sigma2","q":{"shape","data"},
// "theta":{"shape","data"}}. read_params_json also accepts an envelope with a
// "params" member.
void write_params_json(const std::string& path, const ModelParams& params);
void write_fit_json(const std::string& path, const ModelParams& params, double lambda,
                    bool converged, int iterations, double loglik);
ModelParams read_params_json(const std::string& path);

void write_path_json(const std::string& path, const ctmc::PathSample& sample);
ctmc::PathSample read_path_json(const std::string& path);

// psi matrix as little-endian float64, row-major, beside a JSON descriptor
// {"rows","cols","p","m","h","data"} where "data" names the .bin file.
void write_psi(const std::string& json_path, const std::string& bin_path,
               const PsiFeatures& psi);
PsiFeatures read_psi(const std::string& json_path);

void write_selection_csv(const std::string& path, const select::SelectionReport& report);
void write_selection_json(const std::string& path, const select::SelectionReport& report);

}  // namespace switchode::io
