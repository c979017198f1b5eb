#include <doctest.h>

#include <stdexcept>
#include <string>

#include "mcinet/zoo.hpp"

using namespace mcinet;
using namespace mcinet::graph;

TEST_CASE("architecture names roundtrip") {
    using zoo::ArchitectureId;
    CHECK(zoo::arch_from_name("alexnet") == ArchitectureId::alexnet);
    CHECK(zoo::arch_from_name("vgg16") == ArchitectureId::vgg16);
    CHECK(zoo::arch_from_name("googlenet") == ArchitectureId::googlenet);
    CHECK(zoo::arch_from_name("resnet18") == ArchitectureId::resnet18);
    CHECK(zoo::arch_name(ArchitectureId::vgg16) == "vgg16");
    CHECK_THROWS_AS(zoo::arch_from_name("lenet"), std::invalid_argument);
}

TEST_CASE("alexnet census and geometry") {
    auto g = zoo::build_alexnet(1000, 1);
    const Census c = census(g);
    CHECK(c.count("conv") == 5);
    CHECK(c.count("fc") == 3);
    CHECK(c.total_params == 62378344);

    const auto shapes = infer_shapes(g);
    CHECK(g.input_shape() == std::vector<std::size_t>{3, 227, 227});
    CHECK(shapes.at("conv1") == std::vector<std::size_t>{96, 55, 55});
    CHECK(shapes.at("conv5") == std::vector<std::size_t>{256, 13, 13});
    CHECK(shapes.at("pool5") == std::vector<std::size_t>{256, 6, 6});
    CHECK(shapes.at("output") == std::vector<std::size_t>{1000});
    CHECK(zoo::last_conv_id(g) == "conv5");
}

TEST_CASE("alexnet_small keeps the census with a 64x64 input") {
    auto g = zoo::build_alexnet_small(2, 1);
    const Census c = census(g);
    CHECK(c.count("conv") == 5);
    CHECK(c.count("fc") == 3);
    CHECK(g.input_shape() == std::vector<std::size_t>{3, 64, 64});
    CHECK(infer_shapes(g).at("output") == std::vector<std::size_t>{2});
}

TEST_CASE("vgg16 census and pooling ladder") {
    auto g = zoo::build_vgg16(1000, 1);
    const Census c = census(g);
    CHECK(c.count("conv") == 13);
    CHECK(c.count("fc") == 3);

    const auto shapes = infer_shapes(g);
    CHECK(shapes.at("conv2") == std::vector<std::size_t>{64, 224, 224});
    CHECK(shapes.at("pool1") == std::vector<std::size_t>{64, 112, 112});
    CHECK(shapes.at("pool2") == std::vector<std::size_t>{128, 56, 56});
    CHECK(shapes.at("pool3") == std::vector<std::size_t>{256, 28, 28});
    CHECK(shapes.at("pool4") == std::vector<std::size_t>{512, 14, 14});
    CHECK(shapes.at("pool5") == std::vector<std::size_t>{512, 7, 7});
}

TEST_CASE("googlenet census and inception concatenation") {
    auto g = zoo::build_googlenet(1000, 1);
    const Census c = census(g);
    CHECK(c.count("fc") == 1);
    CHECK(c.count("concat") == 9);

    const auto shapes = infer_shapes(g);
    // canonical inception output widths
    CHECK(shapes.at("inc3a") == std::vector<std::size_t>{256, 28, 28});
    CHECK(shapes.at("inc4e") == std::vector<std::size_t>{832, 14, 14});
    CHECK(shapes.at("inc5b") == std::vector<std::size_t>{1024, 7, 7});
    CHECK(shapes.at("output") == std::vector<std::size_t>{1000});
}

TEST_CASE("resnet18 census and stage shapes") {
    auto g = zoo::build_resnet18(1000, 1);
    const Census c = census(g);
    CHECK(c.count("conv") == 20);
    CHECK(c.count("fc") == 1);
    CHECK(c.count("batchnorm") == 20);
    CHECK(c.count("residual-add") == 8);

    const auto shapes = infer_shapes(g);
    CHECK(shapes.at("conv1") == std::vector<std::size_t>{64, 112, 112});
    CHECK(shapes.at("output") == std::vector<std::size_t>{1000});
}

TEST_CASE("builders are deterministic in the seed") {
    auto a = zoo::build_resnet18(2, 42);
    auto b = zoo::build_resnet18(2, 42);
    auto c = zoo::build_resnet18(2, 43);
    bool any_differs = false;
    for (const auto& n : a.nodes()) {
        if (!n.params) continue;
        CHECK(b.node(n.id).params->weights.values() == n.params->weights.values());
        if (c.node(n.id).params->weights.values() != n.params->weights.values())
            any_differs = true;
    }
    CHECK(any_differs);
}
