#pragma once

#include <cstdint>
#include <string>

#include "mcinet/graph.hpp"

namespace mcinet::zoo {

enum class ArchitectureId { alexnet, vgg16, googlenet, resnet18 };

std::string arch_name(ArchitectureId a);
ArchitectureId arch_from_name(const std::string& name);

// AlexNet-style network: input 3x227x227, 5 conv + 3 fc.
graph::ModelGraph build_alexnet(std::size_t class_count, std::uint64_t seed = 1);

// Reduced AlexNet for 64x64 inputs. Same layer census (5 conv, 3 fc),
// narrower channels and a stride-2 stem, for desk-scale runs.
graph::ModelGraph build_alexnet_small(std::size_t class_count, std::uint64_t seed = 1);

// VGG16: input 3x224x224, conv blocks 2-2-3-3-3, 13 conv + 3 fc.
graph::ModelGraph build_vgg16(std::size_t class_count, std::uint64_t seed = 1);

// GoogLeNet: stem + 9 inception modules + global-avg-pool + dropout + fc.
// Auxiliary classifiers omitted.
graph::ModelGraph build_googlenet(std::size_t class_count, std::uint64_t seed = 1);

// ResNet18: 7x7 stem, four stages of two basic blocks, projection shortcuts
// at stage entries 2-4, global-avg-pool + fc.
graph::ModelGraph build_resnet18(std::size_t class_count, std::uint64_t seed = 1);

graph::ModelGraph build(ArchitectureId a, std::size_t class_count, std::uint64_t seed = 1);

// Id of the last convolution node, the default transfer-learning freeze
// boundary (all conv frozen, classifier head trainable).
std::string last_conv_id(const graph::ModelGraph& g);

} // namespace mcinet::zoo
