#include "cfx/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cfx/error.hpp"
#include "cfx/rng.hpp"

namespace cfx {

void Dataset::validate() const {
    if (xs.empty()) throw InputError("dataset is empty");
    if (xs.size() != ys.size()) throw InputError("dataset features/labels length mismatch");
    int d = dim();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != d)
            throw InputError("dataset row " + std::to_string(i) + " has dimension " +
                             std::to_string(xs[i].size()) + ", expected " + std::to_string(d));
        if (!xs[i].allFinite())
            throw InputError("dataset row " + std::to_string(i) + " has non-finite values");
        if (ys[i] != 0 && ys[i] != 1)
            throw InputError("dataset row " + std::to_string(i) + " has label " +
                             std::to_string(ys[i]));
    }
}

int syn_linear_label(double x1, double x2) { return x1 + x2 > 6.0 ? 1 : 0; }

int syn_nonlinear_label(double x1, double x2) {
    return x2 > 3.0 + 1.5 * std::sin(std::numbers::pi * x1 / 3.0) ? 1 : 0;
}

static Dataset gen_uniform(int n, std::uint64_t seed, int (*label)(double, double),
                           const char* provenance) {
    if (n < 4) throw InputError("synthetic dataset needs n >= 4");
    Dataset ds;
    ds.feature_names = {"x1", "x2"};
    ds.provenance = provenance;
    SplitMix64 rng(seed);
    ds.xs.reserve(n);
    ds.ys.reserve(n);
    for (int i = 0; i < n; ++i) {
        double x1 = rng.uniform(0.0, 6.0);
        double x2 = rng.uniform(0.0, 6.0);
        Eigen::VectorXd x(2);
        x << x1, x2;
        ds.xs.push_back(std::move(x));
        ds.ys.push_back(label(x1, x2));
    }
    return ds;
}

Dataset gen_syn_linear(int n, std::uint64_t seed) {
    return gen_uniform(n, seed, syn_linear_label, "synthetic-linear");
}

Dataset gen_syn_nonlinear(int n, std::uint64_t seed) {
    return gen_uniform(n, seed, syn_nonlinear_label, "synthetic-nonlinear");
}

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
        std::size_t start = cell.find_first_not_of(' ');
        cells.push_back(start == std::string::npos ? "" : cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("csv is empty: " + path);
    std::vector<std::string> header = split_line(line);
    std::ptrdiff_t label_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
    if (label_idx < 0)
        throw InputError("csv " + path + " has no column '" + label_column + "'");

    Dataset ds;
    ds.provenance = "csv:" + path;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (static_cast<std::ptrdiff_t>(i) != label_idx)
            ds.feature_names.push_back(header[i]);

    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw InputError("csv " + path + " row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        Eigen::VectorXd x(ds.feature_names.size());
        int xi = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<std::ptrdiff_t>(c) == label_idx) {
                ds.ys.push_back(cells[c] == positive_label ? 1 : 0);
                continue;
            }
            char* endp = nullptr;
            double v = std::strtod(cells[c].c_str(), &endp);
            if (cells[c].empty() || endp == cells[c].c_str() || *endp != '\0' ||
                !std::isfinite(v))
                throw InputError("csv " + path + " row " + std::to_string(row) +
                                 ", column '" + header[c] + "': cannot parse '" +
                                 cells[c] + "' as a finite number");
            x[xi++] = v;
        }
        ds.xs.push_back(std::move(x));
    }
    if (ds.xs.empty()) throw InputError("csv has a header but no rows: " + path);
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open for writing: " + path);
    for (const auto& name : ds.feature_names) out << name << ",";
    out << "label\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.xs[i][j]);
            out << buf << ",";
        }
        out << ds.ys[i] << "\n";
    }
}

static Dataset take_rows(const Dataset& src, const std::vector<int>& idx,
                         std::size_t begin, std::size_t end) {
    Dataset out;
    out.feature_names = src.feature_names;
    out.provenance = src.provenance;
    for (std::size_t k = begin; k < end; ++k) {
        out.xs.push_back(src.xs[idx[k]]);
        out.ys.push_back(src.ys[idx[k]]);
    }
    return out;
}

SplitSet split_dataset(const Dataset& ds, std::uint64_t seed) {
    ds.validate();
    std::size_t n = ds.size();
    if (n < 8) throw InputError("split needs at least 8 rows, got " + std::to_string(n));
    SplitMix64 rng(seed);
    std::vector<int> idx = shuffled_indices(n, rng);
    std::size_t quarter = n / 4;
    std::size_t train_n = n - 2 * quarter;
    SplitSet out;
    out.train = take_rows(ds, idx, 0, train_n);
    out.query = take_rows(ds, idx, train_n, train_n + quarter);
    out.eval = take_rows(ds, idx, train_n + quarter, n);
    return out;
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size())
        throw InputError("normalizer expects dimension " + std::to_string(mean.size()) +
                         ", got " + std::to_string(x.size()));
    return (x - mean).cwiseQuotient(std);
}

Eigen::VectorXd Normalizer::inverse(const Eigen::VectorXd& xhat) const {
    if (xhat.size() != mean.size())
        throw InputError("normalizer expects dimension " + std::to_string(mean.size()) +
                         ", got " + std::to_string(xhat.size()));
    return xhat.cwiseProduct(std) + mean;
}

Normalizer fit_normalizer(const std::vector<Eigen::VectorXd>& xs) {
    if (xs.empty()) throw InputError("fit_normalizer: empty reference");
    const int d = static_cast<int>(xs[0].size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& x : xs) {
        if (x.size() != d) throw InputError("fit_normalizer: ragged reference rows");
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& x : xs) var += (x - mean).cwiseAbs2();
    var /= static_cast<double>(xs.size());
    Normalizer norm;
    norm.mean = std::move(mean);
    norm.std = var.cwiseSqrt().cwiseMax(1e-6);
    return norm;
}

Normalizer fit_normalizer(const Dataset& reference) {
    reference.validate();
    return fit_normalizer(reference.xs);
}

Dataset rebalance(const Dataset& ds, double ratio, std::uint64_t seed) {
    ds.validate();
    if (!(ratio >= 1.0)) throw ConfigError("rebalance ratio must be >= 1");
    std::size_t c1 = 0;
    for (int y : ds.ys) c1 += y;
    std::size_t c0 = ds.size() - c1;
    if (c0 == 0 || c1 == 0) return ds;
    int minority = c1 <= c0 ? 1 : 0;
    std::size_t minority_n = minority == 1 ? c1 : c0;
    std::size_t majority_n = ds.size() - minority_n;
    auto target = static_cast<std::size_t>(std::floor(static_cast<double>(majority_n) / ratio));
    target = std::max<std::size_t>(1, target);
    if (target >= minority_n) return ds;

    std::vector<int> minority_rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.ys[i] == minority) minority_rows.push_back(static_cast<int>(i));
    SplitMix64 rng(seed);
    std::vector<int> pick = sample_without_replacement(minority_rows.size(), target, rng);
    std::vector<char> keep(ds.size(), 0);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.ys[i] != minority) keep[i] = 1;
    for (int p : pick) keep[minority_rows[p]] = 1;

    Dataset out;
    out.feature_names = ds.feature_names;
    out.provenance = ds.provenance;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!keep[i]) continue;
        out.xs.push_back(ds.xs[i]);
        out.ys.push_back(ds.ys[i]);
    }
    return out;
}

static std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

static double parse_hex(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw ConfigError(std::string("normalizer file: missing ") + what);
    char* endp = nullptr;
    double v = std::strtod(tok.c_str(), &endp);
    if (endp != tok.c_str() + tok.size() || !std::isfinite(v))
        throw ConfigError("normalizer file: bad value '" + tok + "'");
    return v;
}

std::string save_normalizer(const Normalizer& norm) {
    if (norm.mean.size() == 0 || norm.mean.size() != norm.std.size())
        throw InputError("save_normalizer: inconsistent dimensions");
    std::ostringstream out;
    out << "cfx-norm 1\n";
    out << "dim " << norm.mean.size() << "\n";
    out << "mean";
    for (Eigen::Index i = 0; i < norm.mean.size(); ++i) out << " " << hex_double(norm.mean[i]);
    out << "\nstd";
    for (Eigen::Index i = 0; i < norm.std.size(); ++i) out << " " << hex_double(norm.std[i]);
    out << "\n";
    return out.str();
}

Normalizer load_normalizer_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "cfx-norm" || version != "1")
        throw ConfigError("normalizer file: bad header");
    std::string tok;
    if (!(in >> tok) || tok != "dim") throw ConfigError("normalizer file: expected dim");
    long d = 0;
    if (!(in >> d) || d < 1) throw ConfigError("normalizer file: bad dim");
    Normalizer norm;
    norm.mean.resize(d);
    norm.std.resize(d);
    if (!(in >> tok) || tok != "mean") throw ConfigError("normalizer file: expected mean");
    for (long i = 0; i < d; ++i) norm.mean[i] = parse_hex(in, "mean entry");
    if (!(in >> tok) || tok != "std") throw ConfigError("normalizer file: expected std");
    for (long i = 0; i < d; ++i) {
        norm.std[i] = parse_hex(in, "std entry");
        if (norm.std[i] <= 0.0) throw ConfigError("normalizer file: std must be positive");
    }
    return norm;
}

void save_normalizer_file(const Normalizer& norm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << save_normalizer(norm);
    if (!out) throw InputError("failed writing '" + path + "'");
}

Normalizer load_normalizer_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open normalizer file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_normalizer_from_string(buf.str());
}

}  // namespace cfx
