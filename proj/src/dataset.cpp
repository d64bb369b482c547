#include "rdsa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rdsa/error.hpp"
#include "rdsa/rng.hpp"

namespace rdsa {

namespace {

[[noreturn]] void data_error(ErrorCode code, const std::string& msg) {
    throw Error(ErrorKind::data, code, msg);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const char* begin = raw.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    // allow surrounding whitespace, nothing else
    const char* p = end;
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    const char* q = begin;
    while (*q == ' ' || *q == '\t') ++q;
    if (end == q || *p != '\0') {
        data_error(ErrorCode::non_numeric_cell, "non-numeric cell at row " + std::to_string(row) +
                                                    ", column " + std::to_string(col) + ": '" +
                                                    raw + "'");
    }
    return v;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

Dataset load_csv_impl(const std::filesystem::path& path,
                      const std::vector<FeatureMeta>* schema, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) data_error(ErrorCode::io_failure, "cannot open " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line)) data_error(ErrorCode::empty_file, "empty file: " + path.string());
    std::vector<std::string> header = split_line(header_line);
    for (auto& h : header) h = trim(h);
    if (header.empty()) data_error(ErrorCode::empty_file, "header row has no columns: " + path.string());

    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_col = i;
    if (label_col == header.size())
        data_error(ErrorCode::missing_column, "label column '" + label_column + "' not found in " + path.string());

    std::vector<FeatureMeta> meta;
    std::vector<std::size_t> feature_cols;
    if (schema) {
        meta = *schema;
        feature_cols.resize(meta.size());
        for (std::size_t i = 0; i < meta.size(); ++i) {
            auto it = std::find(header.begin(), header.end(), meta[i].name);
            if (it == header.end())
                data_error(ErrorCode::missing_column,
                           "column '" + meta[i].name + "' not found in " + path.string());
            feature_cols[i] = static_cast<std::size_t>(it - header.begin());
            meta[i].index = i;
        }
        if (header.size() != meta.size() + 1)
            data_error(ErrorCode::missing_column,
                       "header of " + path.string() + " does not match schema plus label column");
    } else {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i == label_col) continue;
            meta.push_back({header[i], true, idx++});
            feature_cols.push_back(i);
        }
    }
    if (meta.empty()) data_error(ErrorCode::missing_column, "no feature columns in " + path.string());

    std::vector<double> values;
    std::vector<int> labels;
    std::string line;
    std::size_t row = 0;
    int max_label = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            data_error(ErrorCode::non_numeric_cell,
                       "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(header.size()));
        for (std::size_t f = 0; f < feature_cols.size(); ++f)
            values.push_back(parse_cell(cells[feature_cols[f]], row, feature_cols[f]));
        const double raw_label = parse_cell(cells[label_col], row, label_col);
        const double rounded = std::round(raw_label);
        if (!std::isfinite(raw_label) || std::fabs(raw_label - rounded) > 1e-9 || rounded < 0)
            data_error(ErrorCode::non_numeric_cell,
                       "label at row " + std::to_string(row) + " is not a class index");
        labels.push_back(static_cast<int>(rounded));
        max_label = std::max(max_label, labels.back());
        ++row;
    }
    if (row == 0) data_error(ErrorCode::empty_file, "no data rows in " + path.string());

    Dataset d;
    d.meta = std::move(meta);
    d.labels = std::move(labels);
    d.num_classes = std::max(2, max_label + 1);
    d.features = Matrix(row, d.meta.size());
    std::copy(values.begin(), values.end(), d.features.data());
    d.validate();
    return d;
}

// Semi-definite Cholesky: returns lower-triangular L with A = L L^T.
// Zero pivots (within tolerance) zero out their column, so PSD-but-singular
// matrices are accepted; negative pivots are rejected.
Matrix cholesky_psd(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix l(n, n, 0.0);
    const double tol = 1e-10;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d < -tol)
            throw Error(ErrorKind::data, ErrorCode::not_positive_semi_definite,
                        "correlation matrix is not positive semi-definite (pivot " +
                            std::to_string(d) + " at " + std::to_string(j) + ")");
        if (d <= tol) {
            l(j, j) = 0.0;
            continue;
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.meta = d.meta;
    out.num_classes = d.num_classes;
    out.features = Matrix(rows.size(), d.num_features());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = d.features.row(rows[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels[i] = d.labels[rows[i]];
    }
    return out;
}

}  // namespace

std::vector<std::size_t> Dataset::continuous_indices() const {
    std::vector<std::size_t> out;
    for (const auto& m : meta)
        if (m.continuous) out.push_back(m.index);
    return out;
}

void Dataset::validate() const {
    if (meta.size() != features.cols())
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                    "meta length does not equal feature-matrix width");
    if (labels.size() != features.rows())
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                    "label count does not equal row count");
    if (num_classes < 2)
        throw Error(ErrorKind::logic, ErrorCode::bad_config, "num_classes must be >= 2");
    for (std::size_t i = 0; i < meta.size(); ++i)
        if (meta[i].index != i)
            throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                        "feature indices must be contiguous from 0");
    for (std::size_t i = 0; i < features.size(); ++i)
        if (!std::isfinite(features.data()[i]))
            throw Error(ErrorKind::data, ErrorCode::non_finite_value,
                        "feature matrix contains a non-finite value");
    for (int label : labels)
        if (label < 0 || label >= num_classes)
            throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                        "label out of range [0, num_classes)");
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureMeta>& schema,
                 const std::string& label_column) {
    return load_csv_impl(path, &schema, label_column);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    return load_csv_impl(path, nullptr, label_column);
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot write " + path.string());
    for (const auto& m : d.meta) out << m.name << ',';
    out << "label\n";
    char buf[32];
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t c = 0; c < d.num_features(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", d.features(r, c));
            out << buf << ',';
        }
        out << d.labels[r] << '\n';
    }
}

std::pair<Dataset, ZScoreStats> zscore_normalize(const Dataset& d, const Dataset& stats_source) {
    if (stats_source.size() < 2)
        throw Error(ErrorKind::data, ErrorCode::too_few_samples,
                    "zscore stats source needs at least 2 samples");
    if (stats_source.num_features() != d.num_features())
        throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                    "stats source feature count differs from dataset");

    const std::size_t f = d.num_features();
    const std::size_t n = stats_source.size();
    ZScoreStats stats;
    stats.mean.assign(f, 0.0);
    stats.stddev.assign(f, 0.0);
    stats.applied.assign(f, false);

    Dataset out = d;
    for (std::size_t j = 0; j < f; ++j) {
        if (!d.meta[j].continuous) continue;
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += stats_source.features(r, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double dlt = stats_source.features(r, j) - mean;
            ss += dlt * dlt;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        stats.mean[j] = mean;
        stats.stddev[j] = sd;
        if (sd == 0.0) {
            stats.degenerate.push_back(j);
            continue;
        }
        stats.applied[j] = true;
        for (std::size_t r = 0; r < d.size(); ++r)
            out.features(r, j) = (d.features(r, j) - mean) / sd;
    }
    return {std::move(out), std::move(stats)};
}

Dataset zscore_invert(const Dataset& d, const ZScoreStats& stats) {
    Dataset out = d;
    for (std::size_t j = 0; j < d.num_features(); ++j) {
        if (!stats.applied[j]) continue;
        for (std::size_t r = 0; r < d.size(); ++r)
            out.features(r, j) = d.features(r, j) * stats.stddev[j] + stats.mean[j];
    }
    return out;
}

std::vector<FeatureMeta> detect_continuous(const Dataset& d, std::size_t threshold) {
    if (threshold < 2)
        throw Error(ErrorKind::config, ErrorCode::bad_config, "continuity threshold must be >= 2");
    std::vector<FeatureMeta> out = d.meta;
    for (std::size_t j = 0; j < d.num_features(); ++j) {
        std::set<double> distinct;
        for (std::size_t r = 0; r < d.size(); ++r) {
            distinct.insert(d.features(r, j));
            if (distinct.size() >= threshold) break;
        }
        out[j].continuous = distinct.size() >= threshold;
    }
    return out;
}

Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw Error(ErrorKind::data, ErrorCode::fraction_out_of_range,
                    "subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
    const std::size_t n = d.size();
    std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    k = std::min(std::max<std::size_t>(k, 1), n);

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    // partial Fisher-Yates: the first k entries are the sample
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return take_rows(d, idx);
}

Dataset synthesize_correlated(std::size_t n, std::size_t f, int k, const Matrix& correlation,
                              const std::vector<double>& class_shift, std::uint64_t seed) {
    if (f < 2) throw Error(ErrorKind::config, ErrorCode::bad_config, "need at least 2 features");
    if (k < 2) throw Error(ErrorKind::config, ErrorCode::bad_config, "need at least 2 classes");
    if (n < 1) throw Error(ErrorKind::config, ErrorCode::bad_config, "need at least 1 sample");
    if (correlation.rows() != f || correlation.cols() != f)
        throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                    "correlation matrix must be f x f");
    if (class_shift.size() != f)
        throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                    "class_shift must have one entry per feature");
    for (std::size_t i = 0; i < f; ++i) {
        if (std::fabs(correlation(i, i) - 1.0) > 1e-9)
            throw Error(ErrorKind::data, ErrorCode::not_positive_semi_definite,
                        "correlation matrix must have unit diagonal");
        for (std::size_t j = 0; j < i; ++j)
            if (std::fabs(correlation(i, j) - correlation(j, i)) > 1e-9)
                throw Error(ErrorKind::data, ErrorCode::not_positive_semi_definite,
                            "correlation matrix must be symmetric");
    }
    const Matrix chol = cholesky_psd(correlation);

    Dataset d;
    d.num_classes = k;
    d.meta.resize(f);
    for (std::size_t j = 0; j < f; ++j) d.meta[j] = {"f" + std::to_string(j), true, j};
    d.features = Matrix(n, f);
    d.labels.resize(n);

    Rng rng(seed);
    std::vector<double> z(f);
    for (std::size_t r = 0; r < n; ++r) {
        const int label = static_cast<int>(r % static_cast<std::size_t>(k));
        d.labels[r] = label;
        for (std::size_t j = 0; j < f; ++j) z[j] = rng.gaussian();
        auto row = d.features.row(r);
        for (std::size_t i = 0; i < f; ++i) {
            double acc = label * class_shift[i];
            for (std::size_t j = 0; j <= i; ++j) acc += chol(i, j) * z[j];
            row[i] = acc;
        }
    }
    return d;
}

SplitBundle split_dataset(const Dataset& d, double train_fraction, double validation_fraction,
                          std::uint64_t seed) {
    if (train_fraction <= 0.0 || validation_fraction < 0.0 ||
        train_fraction + validation_fraction >= 1.0)
        throw Error(ErrorKind::config, ErrorCode::bad_config,
                    "split fractions must satisfy train > 0, validation >= 0, train+validation < 1");
    const std::size_t n = d.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    const auto n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(n));
    const auto n_val = static_cast<std::size_t>(validation_fraction * static_cast<double>(n));
    if (n_train == 0 || n - n_train - n_val == 0)
        throw Error(ErrorKind::config, ErrorCode::bad_config, "split produces an empty subset");

    SplitBundle b;
    b.train = take_rows(d, {idx.begin(), idx.begin() + n_train});
    b.validation = take_rows(d, {idx.begin() + n_train, idx.begin() + n_train + n_val});
    b.test = take_rows(d, {idx.begin() + n_train + n_val, idx.end()});
    return b;
}

Matrix identity_correlation(std::size_t f) {
    Matrix m(f, f, 0.0);
    for (std::size_t i = 0; i < f; ++i) m(i, i) = 1.0;
    return m;
}

Matrix equicorrelation(std::size_t f, double rho) {
    Matrix m(f, f, rho);
    for (std::size_t i = 0; i < f; ++i) m(i, i) = 1.0;
    return m;
}

}  // namespace rdsa
