#pragma once

#include "enhope/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace enhope {

/// Labeled feature vectors. `class_names[c]` is the original label text for
/// class id `c` (decimal digits for IDX data).
struct Dataset {
    Matrix features;
    Labels labels;
    int class_count = 0;
    std::vector<std::string> class_names;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

    /// Throws Error(data) if any invariant is broken.
    void validate() const;

    /// Number of samples per class id.
    std::vector<std::size_t> class_sizes() const;

    Dataset subset(const std::vector<std::size_t>& rows) const;
};

enum class NormMode : std::uint32_t { none = 0, minmax01 = 1, zscore = 2 };

NormMode parse_norm_mode(const std::string& text);
std::string to_string(NormMode mode);

/// Per-feature affine normalization x' = (x - offset) / scale.
struct NormStats {
    NormMode mode = NormMode::none;
    Vector offsets;
    Vector scales;

    static NormStats identity(std::size_t dim);

    Matrix apply(const Matrix& features) const;
    Matrix invert(const Matrix& normalized) const;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    double holdout_frac = 0.0;
};

/// Reads an IDX image/label pair (MNIST layout). Files may be gzip-compressed.
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);

struct CsvOptions {
    /// Column name (requires a header) or zero-based index; negative index
    /// counts from the end (-1 is the last column).
    std::variant<std::string, int> label_column = -1;
    bool has_header = false;
    char delimiter = ',';
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes features with round-trip precision and the label text as the last column.
void write_csv(const Dataset& ds, const std::filesystem::path& path, bool with_header = true);

std::pair<Dataset, NormStats> normalize(const Dataset& ds, NormMode mode);

/// Per-class holdout of round(frac * class size) samples, at least one when
/// the class has two or more, never the whole class.
Split stratified_split(const Dataset& ds, double holdout_frac, std::uint64_t seed);

} // namespace enhope
