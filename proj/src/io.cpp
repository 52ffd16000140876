#include "switchode/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "switchode/errors.hpp"

namespace switchode::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json load_json(const std::string& path) {
    std::string text = read_text(path);
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw DataError(path + ": invalid JSON");
    return doc;
}

Eigen::MatrixXd matrix_from_json(const json& node, const std::string& what) {
    if (!node.is_object() || !node.contains("shape") || !node.contains("data"))
        throw DataError(what + ": expected {shape, data}");
    auto shape = node["shape"].get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw DataError(what + ": shape must have 2 entries");
    auto data = node["data"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1])
        throw DataError(what + ": data length does not match shape");
    Eigen::MatrixXd out(shape[0], shape[1]);
    for (Eigen::Index r = 0; r < shape[0]; ++r)
        for (Eigen::Index c = 0; c < shape[1]; ++c) out(r, c) = data[r * shape[1] + c];
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& mat) {
    std::vector<double> data;
    data.reserve(mat.size());
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
        for (Eigen::Index c = 0; c < mat.cols(); ++c) data.push_back(mat(r, c));
    return json{{"shape", {mat.rows(), mat.cols()}}, {"data", data}};
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw DataError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols())
        throw ValueError("write_csv: header size does not match column count");
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out += ',';
            out += format_value(values(r, c));
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

CsvTable read_csv(const std::string& path) {
    std::string text = read_text(path);
    CsvTable table;
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream cells(line);
        std::string cell;
        if (first) {
            while (std::getline(cells, cell, ',')) table.header.push_back(cell);
            if (table.header.empty()) throw DataError(path + ": empty header");
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(cells, cell, ',')) {
            const char* s = cell.c_str();
            char* end = nullptr;
            double v = std::strtod(s, &end);
            if (end == s || *end != '\0')
                throw DataError(path + ": bad numeric cell '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != table.header.size())
            throw DataError(path + ": row width differs from header");
        rows.push_back(std::move(row));
    }
    if (first) throw DataError(path + ": empty file");
    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rows[r][c];
    return table;
}

void write_series_csv(const std::string& path, const Eigen::MatrixXd& series, double h,
                      const std::string& prefix) {
    std::vector<std::string> header{"t"};
    for (Eigen::Index c = 0; c < series.cols(); ++c)
        header.push_back(prefix + std::to_string(c));
    Eigen::MatrixXd values(series.rows(), series.cols() + 1);
    for (Eigen::Index r = 0; r < series.rows(); ++r) values(r, 0) = h * static_cast<double>(r);
    values.rightCols(series.cols()) = series;
    write_csv(path, header, values);
}

Eigen::MatrixXd read_series_csv(const std::string& path, double* h_out) {
    CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "t")
        throw DataError(path + ": first column must be t");
    if (table.values.cols() < 2) throw DataError(path + ": no value columns");
    if (table.values.rows() < 2) throw DataError(path + ": need at least 2 rows");
    double h = table.values(1, 0) - table.values(0, 0);
    if (!(h > 0.0)) throw DataError(path + ": time column must increase");
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        double expected = table.values(0, 0) + h * static_cast<double>(r);
        if (std::abs(table.values(r, 0) - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
            throw DataError(path + ": time grid is not uniform");
    }
    if (h_out) *h_out = h;
    return table.values.rightCols(table.values.cols() - 1);
}

ObservationSet read_observations_csv(const std::string& path) {
    ObservationSet obs;
    obs.y = read_series_csv(path, &obs.h);
    return obs;
}

namespace {

json params_to_json(const ModelParams& params) {
    const int k = params.k(), p = params.p(), m = params.m();
    std::vector<double> theta_data;
    theta_data.reserve(static_cast<std::size_t>(k) * p * p * m);
    for (int l = 0; l < k; ++l) {
        const Eigen::MatrixXd& state = params.theta.state(l);
        for (int i = 0; i < p; ++i)
            for (int col = 0; col < p * m; ++col) theta_data.push_back(state(i, col));
    }
    return json{{"k", k},
                {"p", p},
                {"m", m},
                {"sigma2", params.sigma2},
                {"q", matrix_to_json(params.q.q())},
                {"theta", {{"shape", {k, p, p, m}}, {"data", theta_data}}}};
}

ModelParams params_from_json(const json& doc, const std::string& path) {
    for (const char* key : {"k", "p", "m", "sigma2", "q", "theta"})
        if (!doc.contains(key)) throw DataError(path + ": missing key " + key);
    const int k = doc["k"].get<int>(), p = doc["p"].get<int>(), m = doc["m"].get<int>();
    if (k < 1 || p < 1 || m < 1) throw DataError(path + ": bad dimensions");

    Eigen::MatrixXd q = matrix_from_json(doc["q"], path + ": q");
    if (q.rows() != k || q.cols() != k) throw DataError(path + ": q shape mismatch");

    const json& th = doc["theta"];
    if (!th.contains("shape") || !th.contains("data"))
        throw DataError(path + ": theta must have shape and data");
    auto shape = th["shape"].get<std::vector<int>>();
    if (shape != std::vector<int>{k, p, p, m}) throw DataError(path + ": theta shape");
    auto data = th["data"].get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(k) * p * p * m)
        throw DataError(path + ": theta data length");

    ThetaTensor theta(k, p, m);
    std::size_t idx = 0;
    for (int l = 0; l < k; ++l)
        for (int i = 0; i < p; ++i)
            for (int col = 0; col < p * m; ++col) theta.state(l)(i, col) = data[idx++];

    double sigma2 = doc["sigma2"].get<double>();
    try {
        return ModelParams(ctmc::RateMatrix::make(q, /*require_irreducible=*/false),
                           std::move(theta), sigma2);
    } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace

void write_params_json(const std::string& path, const ModelParams& params) {
    write_text_atomic(path, params_to_json(params).dump(2) + "\n");
}

void write_fit_json(const std::string& path, const ModelParams& params, double lambda,
                    bool converged, int iterations, double loglik) {
    json doc{{"lambda", lambda},
             {"converged", converged},
             {"iterations", iterations},
             {"loglik", loglik},
             {"params", params_to_json(params)}};
    write_text_atomic(path, doc.dump(2) + "\n");
}

ModelParams read_params_json(const std::string& path) {
    json doc = load_json(path);
    if (doc.contains("params")) return params_from_json(doc["params"], path);
    return params_from_json(doc, path);
}

void write_path_json(const std::string& path, const ctmc::PathSample& sample) {
    json doc{{"T", sample.T},
             {"jump_times", sample.jump_times},
             {"states", sample.states}};
    write_text_atomic(path, doc.dump(2) + "\n");
}

ctmc::PathSample read_path_json(const std::string& path) {
    json doc = load_json(path);
    for (const char* key : {"T", "jump_times", "states"})
        if (!doc.contains(key)) throw DataError(path + ": missing key " + key);
    ctmc::PathSample sample;
    sample.T = doc["T"].get<double>();
    sample.jump_times = doc["jump_times"].get<std::vector<double>>();
    sample.states = doc["states"].get<std::vector<int>>();
    // states[i] holds from jump_times[i]; the first entry is the start time 0.
    if (sample.states.size() != sample.jump_times.size())
        throw DataError(path + ": need one state per jump time");
    if (sample.jump_times.empty() || sample.jump_times.front() != 0.0)
        throw DataError(path + ": jump times must start at 0");
    for (std::size_t i = 1; i < sample.jump_times.size(); ++i) {
        if (!(sample.jump_times[i] > sample.jump_times[i - 1]) ||
            !(sample.jump_times[i] < sample.T))
            throw DataError(path + ": jump times must increase within (0, T)");
    }
    return sample;
}

void write_psi(const std::string& json_path, const std::string& bin_path,
               const PsiFeatures& psi) {
    // Eigen stores column-major; emit row-major explicitly.
    std::string raw;
    raw.reserve(static_cast<std::size_t>(psi.psi.size()) * sizeof(double));
    for (Eigen::Index r = 0; r < psi.psi.rows(); ++r)
        for (Eigen::Index c = 0; c < psi.psi.cols(); ++c) {
            double v = psi.psi(r, c);
            char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            raw.append(bytes, sizeof(double));
        }
    write_text_atomic(bin_path, raw);
    json doc{{"rows", psi.psi.rows()}, {"cols", psi.psi.cols()}, {"p", psi.p},
             {"m", psi.m},           {"h", psi.h},
             {"data", std::filesystem::path(bin_path).filename().string()}};
    write_text_atomic(json_path, doc.dump(2) + "\n");
}

PsiFeatures read_psi(const std::string& json_path) {
    json doc = load_json(json_path);
    for (const char* key : {"rows", "cols", "p", "m", "h", "data"})
        if (!doc.contains(key)) throw DataError(json_path + ": missing key " + key);
    PsiFeatures psi;
    psi.p = doc["p"].get<int>();
    psi.m = doc["m"].get<int>();
    psi.h = doc["h"].get<double>();
    Eigen::Index rows = doc["rows"].get<Eigen::Index>();
    Eigen::Index cols = doc["cols"].get<Eigen::Index>();
    if (cols != static_cast<Eigen::Index>(psi.p) * psi.m)
        throw DataError(json_path + ": cols must equal p*m");

    std::filesystem::path bin =
        std::filesystem::path(json_path).parent_path() / doc["data"].get<std::string>();
    std::string raw = read_text(bin.string());
    if (raw.size() != static_cast<std::size_t>(rows) * cols * sizeof(double))
        throw DataError(bin.string() + ": size does not match descriptor");
    psi.psi.resize(rows, cols);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            std::memcpy(&psi.psi(r, c), raw.data() + offset, sizeof(double));
            offset += sizeof(double);
        }
    return psi;
}

void write_selection_csv(const std::string& path, const select::SelectionReport& report) {
    std::string out = "k,m,lambda,bic,loglik,nnz,converged,iterations\n";
    for (const auto& cell : report.cells) {
        out += std::to_string(cell.k) + ',' + std::to_string(cell.m) + ',' +
               format_value(cell.lambda) + ',' + format_value(cell.bic) + ',' +
               format_value(cell.loglik) + ',' + std::to_string(cell.nnz) + ',' +
               (cell.converged ? "1," : "0,") + std::to_string(cell.iterations) + '\n';
    }
    write_text_atomic(path, out);
}

void write_selection_json(const std::string& path, const select::SelectionReport& report) {
    json doc{{"k", report.k_best},
             {"m", report.m_best},
             {"lambda", report.lambda_best},
             {"bic", report.bic_best},
             {"cells", report.cells.size()},
             {"dropped_cells", report.dropped_cells},
             {"failures", report.failures}};
    write_text_atomic(path, doc.dump(2) + "\n");
}

}  // namespace switchode::io
