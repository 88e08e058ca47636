#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enhope/error.hpp"
#include "enhope/plot.hpp"

#include <regex>
#include <set>

using namespace enhope;

namespace {

std::set<std::string> fills(const std::string& svg) {
    std::set<std::string> out;
    const std::regex re("fill=\"(#[0-9a-f]{6})\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
        out.insert((*it)[1]);
    }
    return out;
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

} // namespace

TEST_CASE("embedding CSV format and parse") {
    Matrix Y(3, 2), Ye(1, 2);
    Y << 0.5, -1, 2, 3, 1e-9, 4;
    Ye << 0.25, 0.75;
    const std::string csv = format_embedding_csv(Y, {0, 1, 0}, Ye, {1}, {"a", "b,c"});
    CHECK(csv.substr(0, csv.find('\n')) == "y1,y2,label,is_exemplar");
    CHECK(count(csv, "\n") == 5);
    CHECK(csv.find("\"b,c\",1\n") != std::string::npos);

    const EmbeddingTable t = parse_embedding_csv(csv);
    CHECK(t.size() == 4);
    CHECK(t.coords(2, 0) == 1e-9);
    CHECK(t.labels[1] == "b,c");
    CHECK(t.is_exemplar == std::vector<bool>{false, false, false, true});
}

TEST_CASE("malformed embedding CSV") {
    CHECK_THROWS_AS(parse_embedding_csv(""), Error);
    CHECK_THROWS_AS(parse_embedding_csv("a,b\n"), Error);
    CHECK_THROWS_WITH_AS(parse_embedding_csv("y1,y2,label,is_exemplar\n1,2,a,0\n1,x,a,0\n"), doctest::Contains(":3"), Error);
    CHECK_THROWS_AS(parse_embedding_csv("y1,y2,label,is_exemplar\n1,2,a\n"), Error);
    CHECK_THROWS_AS(parse_embedding_csv("y1,y2,label,is_exemplar\n1,2,a,2\n"), Error);
}

TEST_CASE("two classes give two fill colors and ring markers") {
    const auto t = parse_embedding_csv("y1,y2,label,is_exemplar\n0,0,a,0\n1,1,b,0\n0.5,0,a,0\n0,0,a,1\n1,1,b,1\n");
    const std::string svg = render_svg(t);
    CHECK(fills(svg).size() == 2);
    CHECK(count(svg, "fill=\"none\"") == 2);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg == render_svg(t));
}

TEST_CASE("no exemplar rows means no rings") {
    const auto t = parse_embedding_csv("y1,y2,label,is_exemplar\n0,0,a,0\n1,1,b,0\n");
    CHECK(count(render_svg(t), "fill=\"none\"") == 0);
}

TEST_CASE("ten classes give ten legend entries; classes past twelve change shape") {
    std::string csv = "y1,y2,label,is_exemplar\n";
    for (int c = 0; c < 10; ++c) csv += std::to_string(c) + "," + std::to_string(c * c) + "," + std::to_string(c) + ",0\n";
    CHECK(count(render_svg(parse_embedding_csv(csv)), "class=\"legend-entry\"") == 10);

    for (int c = 10; c < 14; ++c) csv += std::to_string(c) + ",0," + std::to_string(c) + ",0\n";
    const std::string svg = render_svg(parse_embedding_csv(csv));
    CHECK(count(svg, "class=\"legend-entry\"") == 14);
    CHECK(fills(svg).size() == 12);
    CHECK(count(svg, "<rect") == 4);  // classes 12 and 13: one point and one legend swatch each
}

TEST_CASE("one-dimensional embeddings and degenerate extents render") {
    const auto t = parse_embedding_csv("y1,label,is_exemplar\n3,a,0\n3,b,0\n");
    const std::string svg = render_svg(t);
    CHECK(svg.find("nan") == std::string::npos);
    CHECK(plot_palette().size() == 12);
}
