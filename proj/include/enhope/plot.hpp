#pragma once

#include "enhope/matrix.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace enhope {

/// Rows of an embedding CSV: y1..yh, label, is_exemplar.
struct EmbeddingTable {
    Matrix coords;
    std::vector<std::string> labels;
    std::vector<bool> is_exemplar;

    std::size_t size() const { return labels.size(); }
};

/// Data rows come first, exemplar rows after them. Labels are written through
/// `class_names` when it covers the label, otherwise as the integer id.
std::string format_embedding_csv(const Matrix& points, const Labels& labels, const Matrix& exemplars,
                                 const Labels& exemplar_labels, const std::vector<std::string>& class_names);

EmbeddingTable parse_embedding_csv(const std::string& text, const std::string& source = "<memory>");
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);

struct PlotOptions {
    int width = 800;
    int height = 800;
    double point_radius = 2.0;
    double ring_radius = 7.0;
    std::string title;
};

/// 12-entry palette; class i uses color i % 12 and marker shape i / 12.
const std::vector<std::string>& plot_palette();

/// Scatter plot of the first two coordinates (a 1-D embedding is drawn on a
/// horizontal line). Classes are ordered by first appearance.
std::string render_svg(const EmbeddingTable& table, const PlotOptions& options = {});

void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace enhope
