#include <doctest.h>

#include <stdexcept>
#include <string>

#include <cstdio>
#include <fstream>

#include "mcinet/figure.hpp"

using namespace mcinet;
using train::ComparisonReport;

namespace {

ComparisonReport sample_report() {
    ComparisonReport r;
    r.rows.push_back({"resnet18", 0.9841, 0.95, 11000000, 60.0});
    r.rows.push_back({"googlenet", 0.9762, 0.94, 6000000, 90.0});
    r.rows.push_back({"vgg16", 0.9603, 0.93, 138000000, 200.0});
    r.rows.push_back({"alexnet", 0.9444, 0.91, 62000000, 30.0});
    return r;
}

} // namespace

TEST_CASE("comparison SVG structure") {
    const std::string svg = figure::comparison_svg(sample_report());
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    // one bar and one percent label per architecture
    std::size_t rects = 0;
    for (std::size_t pos = 0; (pos = svg.find("<rect", pos)) != std::string::npos; ++pos) ++rects;
    CHECK(rects >= 4);
    CHECK(svg.find("resnet18") != std::string::npos);
    CHECK(svg.find("alexnet") != std::string::npos);
    CHECK(svg.find("98.41") != std::string::npos);
    CHECK(svg.find("94.44") != std::string::npos);
}

TEST_CASE("SVG generation is deterministic and timing-independent") {
    ComparisonReport a = sample_report();
    ComparisonReport b = sample_report();
    b.rows[0].train_seconds = 1234.0;
    CHECK(figure::comparison_svg(a) == figure::comparison_svg(b));
}

TEST_CASE("taller accuracy draws a taller bar") {
    ComparisonReport r;
    r.rows.push_back({"a", 1.0, 1.0, 1, 0.0});
    r.rows.push_back({"b", 0.5, 0.5, 1, 0.0});
    const std::string svg = figure::comparison_svg(r);
    // bar heights appear as height="..." on the data rects; the full-accuracy
    // bar must be strictly taller
    std::vector<double> heights;
    for (std::size_t pos = 0; (pos = svg.find("height=\"", pos)) != std::string::npos;) {
        pos += 8;
        heights.push_back(std::atof(svg.c_str() + pos));
    }
    REQUIRE(heights.size() >= 2);
    // the last two height attributes belong to the two bars, drawn in row order
    const double ha = heights[heights.size() - 2], hb = heights.back();
    CHECK(ha > hb);
}

TEST_CASE("emit writes the file") {
    const char* path = "tf_fig.svg";
    figure::emit_comparison_figure(sample_report(), path);
    std::ifstream f(path);
    REQUIRE(f.good());
    std::string first;
    std::getline(f, first);
    CHECK(first.find("<svg") != std::string::npos);
    f.close();
    std::remove(path);
}
