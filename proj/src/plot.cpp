#include "enhope/plot.hpp"

#include "enhope/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace enhope {

namespace {

void put_number(std::string& out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

std::vector<std::string> split_line(const std::string& line, const std::string& source, std::size_t line_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                fields.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back();
        } else {
            fields.back() += ch;
        }
    }
    if (quoted) throw Error(ErrorKind::data, source + ":" + std::to_string(line_no) + ": unterminated quote");
    return fields;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, end);
}

// Shape cycles every 12 classes: circle, square, triangle, diamond.
void marker(std::ostringstream& out, int shape, double x, double y, double r, const std::string& color) {
    switch (shape % 4) {
    case 0:
        out << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r) << "\" fill=\"" << color
            << "\"/>\n";
        break;
    case 1:
        out << "<rect x=\"" << fmt(x - r) << "\" y=\"" << fmt(y - r) << "\" width=\"" << fmt(2 * r) << "\" height=\""
            << fmt(2 * r) << "\" fill=\"" << color << "\"/>\n";
        break;
    case 2:
        out << "<polygon points=\"" << fmt(x) << ',' << fmt(y - r) << ' ' << fmt(x + r) << ',' << fmt(y + r) << ' '
            << fmt(x - r) << ',' << fmt(y + r) << "\" fill=\"" << color << "\"/>\n";
        break;
    default:
        out << "<polygon points=\"" << fmt(x) << ',' << fmt(y - r) << ' ' << fmt(x + r) << ',' << fmt(y) << ' '
            << fmt(x) << ',' << fmt(y + r) << ' ' << fmt(x - r) << ',' << fmt(y) << "\" fill=\"" << color << "\"/>\n";
    }
}

} // namespace

std::string format_embedding_csv(const Matrix& points, const Labels& labels, const Matrix& exemplars,
                                 const Labels& exemplar_labels, const std::vector<std::string>& class_names) {
    if (static_cast<std::size_t>(points.rows()) != labels.size() ||
        static_cast<std::size_t>(exemplars.rows()) != exemplar_labels.size()) {
        throw Error(ErrorKind::dimension, "embedding rows and labels differ in length");
    }
    if (exemplars.rows() > 0 && exemplars.cols() != points.cols()) {
        throw Error(ErrorKind::dimension, "exemplar embedding width differs from data embedding");
    }
    auto name = [&](int label) {
        if (label >= 0 && static_cast<std::size_t>(label) < class_names.size()) {
            return quote_if_needed(class_names[static_cast<std::size_t>(label)]);
        }
        return std::to_string(label);
    };

    std::string out;
    for (Eigen::Index j = 0; j < points.cols(); ++j) out += "y" + std::to_string(j + 1) + ",";
    out += "label,is_exemplar\n";
    auto rows = [&](const Matrix& Y, const Labels& L, char flag) {
        for (Eigen::Index i = 0; i < Y.rows(); ++i) {
            for (Eigen::Index j = 0; j < Y.cols(); ++j) {
                put_number(out, Y(i, j));
                out += ',';
            }
            out += name(L[static_cast<std::size_t>(i)]);
            out += ',';
            out += flag;
            out += '\n';
        }
    };
    rows(points, labels, '0');
    rows(exemplars, exemplar_labels, '1');
    return out;
}

EmbeddingTable parse_embedding_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw Error(ErrorKind::data, source + ": empty embedding CSV");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line, source, line_no);
    const std::size_t width = header.size();
    if (width < 3 || header[width - 2] != "label" || header[width - 1] != "is_exemplar") {
        throw Error(ErrorKind::data, source + ":1: header must be y1,...,yh,label,is_exemplar");
    }
    const std::size_t h = width - 2;
    for (std::size_t j = 0; j < h; ++j) {
        if (header[j] != "y" + std::to_string(j + 1)) {
            throw Error(ErrorKind::data, source + ":1: expected column y" + std::to_string(j + 1));
        }
    }

    EmbeddingTable table;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line, source, line_no);
        const std::string where = source + ":" + std::to_string(line_no);
        if (fields.size() != width) {
            throw Error(ErrorKind::data, where + ": expected " + std::to_string(width) + " fields, found " +
                                             std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < h; ++j) {
            const auto& f = fields[j];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
                throw Error(ErrorKind::data, where + ": column " + std::to_string(j + 1) + " is not a finite number");
            }
            values.push_back(v);
        }
        table.labels.push_back(fields[h]);
        const auto& flag = fields[h + 1];
        if (flag == "1") {
            table.is_exemplar.push_back(true);
        } else if (flag == "0" || flag.empty()) {
            table.is_exemplar.push_back(false);
        } else {
            throw Error(ErrorKind::data, where + ": is_exemplar must be 0 or 1");
        }
    }
    table.coords.resize(static_cast<Eigen::Index>(table.labels.size()), static_cast<Eigen::Index>(h));
    std::copy(values.begin(), values.end(), table.coords.data());
    return table;
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_embedding_csv(text.str(), path.string());
}

const std::vector<std::string>& plot_palette() {
    static const std::vector<std::string> palette = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
        "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#843c39",
    };
    return palette;
}

std::string render_svg(const EmbeddingTable& table, const PlotOptions& options) {
    if (options.width < 100 || options.height < 100) throw Error(ErrorKind::config, "plot must be at least 100x100");
    const auto& palette = plot_palette();
    const std::string ring_color = "#ff0000";

    // Classes in order of first appearance, so labels need not be integers.
    std::vector<std::string> classes;
    std::map<std::string, int> class_of;
    for (const auto& label : table.labels) {
        if (class_of.emplace(label, static_cast<int>(classes.size())).second) classes.push_back(label);
    }

    const Eigen::Index n = table.coords.rows();
    auto coord = [&](Eigen::Index i, Eigen::Index j) { return j < table.coords.cols() ? table.coords(i, j) : 0.0; };
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (n > 0) {
        xmin = xmax = coord(0, 0);
        ymin = ymax = coord(0, 1);
        for (Eigen::Index i = 1; i < n; ++i) {
            xmin = std::min(xmin, coord(i, 0));
            xmax = std::max(xmax, coord(i, 0));
            ymin = std::min(ymin, coord(i, 1));
            ymax = std::max(ymax, coord(i, 1));
        }
    }
    if (xmax - xmin <= 0) xmin -= 1, xmax += 1;
    if (ymax - ymin <= 0) ymin -= 1, ymax += 1;

    const double legend_width = 140.0;
    const double margin = 20.0;
    const double plot_w = options.width - legend_width - 2 * margin;
    const double plot_h = options.height - 2 * margin;
    auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * plot_w; };
    auto py = [&](double y) { return margin + (ymax - y) / (ymax - ymin) * plot_h; };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
        << "\" viewBox=\"0 0 " << options.width << ' ' << options.height << "\">\n";
    if (!options.title.empty()) out << "<title>" << xml_escape(options.title) << "</title>\n";

    out << "<g id=\"points\">\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        if (table.is_exemplar[static_cast<std::size_t>(i)]) continue;
        const int c = class_of.at(table.labels[static_cast<std::size_t>(i)]);
        marker(out, c / 12, px(coord(i, 0)), py(coord(i, 1)), options.point_radius, palette[c % 12]);
    }
    out << "</g>\n<g id=\"exemplars\">\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!table.is_exemplar[static_cast<std::size_t>(i)]) continue;
        out << "<circle cx=\"" << fmt(px(coord(i, 0))) << "\" cy=\"" << fmt(py(coord(i, 1))) << "\" r=\""
            << fmt(options.ring_radius) << "\" fill=\"none\" stroke=\"" << ring_color << "\" stroke-width=\"2\"/>\n";
    }
    out << "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    const double lx = options.width - legend_width + 10.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const double ly = margin + 10.0 + 18.0 * static_cast<double>(c);
        out << "<g class=\"legend-entry\">\n";
        marker(out, static_cast<int>(c) / 12, lx, ly, 5.0, palette[c % 12]);
        out << "<text x=\"" << fmt(lx + 12) << "\" y=\"" << fmt(ly + 4) << "\">" << xml_escape(classes[c])
            << "</text>\n</g>\n";
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

} // namespace enhope
