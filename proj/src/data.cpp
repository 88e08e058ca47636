#include "enhope/data.hpp"

#include "enhope/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_map>

namespace enhope {

void Dataset::validate() const {
    if (labels.empty()) throw Error(ErrorKind::data, "dataset is empty");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error(ErrorKind::data, "feature rows (" + std::to_string(features.rows()) +
                                         ") and labels (" + std::to_string(labels.size()) + ") disagree");
    }
    if (class_count < 2) throw Error(ErrorKind::data, "class_count must be at least 2");
    if (features.cols() < 1) throw Error(ErrorKind::data, "feature dimension is zero");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw Error(ErrorKind::data, "label out of range at row " + std::to_string(i));
        }
    }
    if (!features.allFinite()) throw Error(ErrorKind::data, "non-finite feature value");
}

std::vector<std::size_t> Dataset::class_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(class_count), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    return sizes;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.features = gather_rows(features, rows);
    out.labels = gather_labels(labels, rows);
    out.class_count = class_count;
    out.class_names = class_names;
    return out;
}

NormMode parse_norm_mode(const std::string& text) {
    if (text == "none") return NormMode::none;
    if (text == "minmax01") return NormMode::minmax01;
    if (text == "zscore") return NormMode::zscore;
    throw Error(ErrorKind::config, "unknown normalization mode '" + text + "'");
}

std::string to_string(NormMode mode) {
    switch (mode) {
    case NormMode::none: return "none";
    case NormMode::minmax01: return "minmax01";
    case NormMode::zscore: return "zscore";
    }
    return "none";
}

NormStats NormStats::identity(std::size_t dim) {
    NormStats s;
    s.mode = NormMode::none;
    s.offsets = Vector::Zero(static_cast<Eigen::Index>(dim));
    s.scales = Vector::Ones(static_cast<Eigen::Index>(dim));
    return s;
}

Matrix NormStats::apply(const Matrix& features) const {
    if (features.cols() != offsets.size()) {
        throw Error(ErrorKind::dimension, "normalization expects " + std::to_string(offsets.size()) +
                                              " features, got " + std::to_string(features.cols()));
    }
    if (mode == NormMode::none) return features;
    Matrix out = features.rowwise() - offsets.transpose();
    out.array().rowwise() /= scales.transpose().array();
    return out;
}

Matrix NormStats::invert(const Matrix& normalized) const {
    if (normalized.cols() != offsets.size()) {
        throw Error(ErrorKind::dimension, "normalization dimension mismatch");
    }
    if (mode == NormMode::none) return normalized;
    Matrix out = normalized.array().rowwise() * scales.transpose().array();
    out.rowwise() += offsets.transpose();
    return out;
}

std::pair<Dataset, NormStats> normalize(const Dataset& ds, NormMode mode) {
    const auto dim = ds.features.cols();
    NormStats stats = NormStats::identity(static_cast<std::size_t>(dim));
    stats.mode = mode;
    if (mode == NormMode::minmax01) {
        stats.offsets = ds.features.colwise().minCoeff().transpose();
        Vector range = ds.features.colwise().maxCoeff().transpose() - stats.offsets;
        stats.scales = range.unaryExpr([](double r) { return r > 0.0 ? r : 1.0; });
    } else if (mode == NormMode::zscore) {
        stats.offsets = ds.features.colwise().mean().transpose();
        Matrix centered = ds.features.rowwise() - stats.offsets.transpose();
        Vector var = centered.colwise().squaredNorm().transpose() / static_cast<double>(ds.features.rows());
        stats.scales = var.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 1.0; });
    }
    Dataset out = ds;
    out.features = stats.apply(ds.features);
    return {std::move(out), std::move(stats)};
}

Split stratified_split(const Dataset& ds, double holdout_frac, std::uint64_t seed) {
    if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
        throw Error(ErrorKind::config, "holdout fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }

    std::mt19937_64 rng(seed);
    Split split;
    split.holdout_frac = holdout_frac;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw Error(ErrorKind::data, "class " + std::to_string(c) +
                                             " has fewer than 2 samples; cannot hold out validation data");
        }
        auto holdout = static_cast<std::size_t>(std::llround(holdout_frac * static_cast<double>(members.size())));
        holdout = std::clamp<std::size_t>(holdout, 1, members.size() - 1);
        std::shuffle(members.begin(), members.end(), rng);
        split.validation.insert(split.validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(holdout));
        split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(holdout), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

// ---------------------------------------------------------------- IDX

namespace {

struct GzReader {
    explicit GzReader(const std::filesystem::path& path) : path_(path.string()) {
        file_ = gzopen(path_.c_str(), "rb");
        if (!file_) throw Error(ErrorKind::io, "cannot open " + path_);
        gzbuffer(file_, 1 << 16);
    }
    ~GzReader() {
        if (file_) gzclose(file_);
    }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read(void* dst, std::size_t bytes, const char* what) {
        auto* out = static_cast<unsigned char*>(dst);
        std::size_t done = 0;
        while (done < bytes) {
            auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - done, 1u << 30));
            int got = gzread(file_, out + done, chunk);
            if (got <= 0) {
                throw Error(ErrorKind::format, path_ + ": truncated " + what + " at byte offset " +
                                                   std::to_string(offset_ + done));
            }
            done += static_cast<std::size_t>(got);
        }
        offset_ += bytes;
    }

    std::uint32_t read_be32(const char* what) {
        unsigned char b[4];
        read(b, 4, what);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    std::size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    gzFile file_ = nullptr;
    std::size_t offset_ = 0;
};

void expect_magic(GzReader& in, std::uint32_t expected) {
    auto magic = in.read_be32("magic number");
    if (magic != expected) {
        std::ostringstream msg;
        msg << in.path() << ": bad magic 0x" << std::hex << magic << " (expected 0x" << expected
            << ") at byte offset 0";
        throw Error(ErrorKind::format, msg.str());
    }
}

} // namespace

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
    GzReader images(image_path);
    expect_magic(images, 0x00000803);
    const auto count = images.read_be32("image count");
    const auto rows = images.read_be32("row count");
    const auto cols = images.read_be32("column count");

    GzReader labels(label_path);
    expect_magic(labels, 0x00000801);
    const auto label_count = labels.read_be32("label count");
    if (label_count != count) {
        throw Error(ErrorKind::format, "count mismatch: " + images.path() + " has " + std::to_string(count) +
                                           " images but " + labels.path() + " has " +
                                           std::to_string(label_count) + " labels (header byte offset 4)");
    }
    if (count == 0) throw Error(ErrorKind::data, images.path() + ": no images");

    const std::size_t dim = std::size_t{rows} * cols;
    Dataset ds;
    ds.features.resize(count, static_cast<Eigen::Index>(dim));
    std::vector<unsigned char> buffer(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        images.read(buffer.data(), dim, "pixel data");
        for (std::size_t j = 0; j < dim; ++j) {
            ds.features(i, static_cast<Eigen::Index>(j)) = buffer[j] / 255.0;
        }
    }

    std::vector<unsigned char> raw(count);
    labels.read(raw.data(), count, "label data");
    ds.labels.assign(raw.begin(), raw.end());
    int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
    ds.class_count = std::max(2, max_label + 1);
    for (int c = 0; c < ds.class_count; ++c) ds.class_names.push_back(std::to_string(c));
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_record(const std::string& line, char delim, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) throw Error(ErrorKind::format, "line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());

    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> line_numbers;
    std::vector<std::string> header;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_record(line, options.delimiter, line_no);
        if (options.has_header && header.empty()) {
            header = std::move(fields);
            continue;
        }
        records.push_back(std::move(fields));
        line_numbers.push_back(line_no);
    }
    if (records.empty()) throw Error(ErrorKind::data, path.string() + ": empty file");

    const std::size_t width = header.empty() ? records.front().size() : header.size();
    if (width < 2) throw Error(ErrorKind::data, path.string() + ": need at least one feature and a label column");

    std::size_t label_col = 0;
    if (const auto* name = std::get_if<std::string>(&options.label_column)) {
        auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) throw Error(ErrorKind::config, "label column '" + *name + "' not found in header");
        label_col = static_cast<std::size_t>(it - header.begin());
    } else {
        int idx = std::get<int>(options.label_column);
        if (idx < 0) idx += static_cast<int>(width);
        if (idx < 0 || idx >= static_cast<int>(width)) throw Error(ErrorKind::config, "label column index out of range");
        label_col = static_cast<std::size_t>(idx);
    }

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(width - 1));
    std::unordered_map<std::string, int> coding;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != width) {
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_numbers[r]) + ": ragged row (" +
                                               std::to_string(rec.size()) + " fields, expected " +
                                               std::to_string(width) + ")");
        }
        Eigen::Index col = 0;
        for (std::size_t f = 0; f < width; ++f) {
            if (f == label_col) continue;
            std::string cell = trim(rec[f]);
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(value)) {
                throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_numbers[r]) +
                                                   ": non-numeric feature '" + cell + "' in column " +
                                                   std::to_string(f));
            }
            ds.features(static_cast<Eigen::Index>(r), col++) = value;
        }
        std::string key = trim(rec[label_col]);
        auto [it, inserted] = coding.emplace(key, static_cast<int>(ds.class_names.size()));
        if (inserted) ds.class_names.push_back(key);
        ds.labels.push_back(it->second);
    }
    ds.class_count = static_cast<int>(ds.class_names.size());
    if (ds.class_count < 2) throw Error(ErrorKind::data, path.string() + ": need at least 2 classes");
    ds.validate();
    return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, bool with_header) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    if (with_header) {
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out << "x" << j << ',';
        out << "label\n";
    }
    char buf[64];
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, ds.features(i, j));
            out.write(buf, end - buf);
            out << ',';
        }
        const auto label = ds.labels[static_cast<std::size_t>(i)];
        if (static_cast<std::size_t>(label) < ds.class_names.size()) {
            out << ds.class_names[static_cast<std::size_t>(label)] << '\n';
        } else {
            out << label << '\n';
        }
    }
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

} // namespace enhope
