#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcinet/tensor.hpp"

namespace mcinet::data {

enum class Label { normal = 0, mci = 1 };
enum class Plane { frontal, sagittal, axial };

std::string label_name(Label l);
std::string plane_name(Plane p);
Label label_from_string(const std::string& s);  // case-insensitive
Plane plane_from_string(const std::string& s);  // case-insensitive

struct SubjectRecord {
    std::string subject_id;
    Label label = Label::normal;
    Plane plane = Plane::frontal;
    std::string image_path;
};

struct DatasetManifest {
    std::vector<SubjectRecord> records;

    std::map<std::string, std::size_t> class_summary() const;
    std::vector<std::string> subject_ids() const; // unique, in first-seen order
    Label subject_label(const std::string& subject_id) const;
};

// CSV with header `subject_id,label,plane,image_path`. Malformed rows are
// rejected with their line number.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

struct SplitResult {
    DatasetManifest train;
    DatasetManifest test;
    std::uint64_t seed = 0;
};

// Subject-level split: per-class seeded shuffle of subject ids, first
// floor(fraction * n_class) subjects to train. Every record of a subject
// lands on the same side.
SplitResult subject_split(const DatasetManifest& m, double fraction, std::uint64_t seed);

// FNV-1a over the sorted train/test subject assignment; identifies a split.
std::uint64_t split_fingerprint(const SplitResult& s);

struct NormStats {
    double mean[3] = {0.0, 0.0, 0.0};
    double stddev[3] = {1.0, 1.0, 1.0};
    bool degenerate = false; // some channel had zero variance, std replaced by 1
};

// Binary PGM (P5) or PPM (P6) with maxval 255, or ".nt" raw tensors.
// Pixels scale to [0,1]; result is 1xCxHxW.
Tensor decode_image(const std::string& path);
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, std::size_t height,
               std::size_t width);

// Align-corners-false bilinear resampling of a 1xCxHxW image.
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);

// Resize, replicate grayscale to 3 channels, standardize per channel.
Tensor to_network_input(const Tensor& img, std::size_t out_h, std::size_t out_w,
                        const NormStats& stats);

// Per-channel mean/std over every image of the manifest (the training split).
NormStats compute_norm_stats(const DatasetManifest& m, std::size_t out_h, std::size_t out_w);

struct Batch {
    Tensor images; // N x 3 x H x W
    std::vector<std::size_t> labels;
    std::vector<std::size_t> record_indices; // into the manifest
};

// Seeded shuffle, final partial batch kept.
std::vector<Batch> batches(const DatasetManifest& m, std::size_t batch_size,
                           std::uint64_t shuffle_seed, std::size_t out_h, std::size_t out_w,
                           const NormStats& stats);

// Synthetic stand-in corpus: per subject three PGM slices (one per plane).
// "normal" subjects get a smooth radial gradient plus noise; "mci" subjects
// get the same gradient with ring-shaped intensity deficits. Writes images
// and a manifest.csv under out_dir and returns the manifest.
DatasetManifest synth_dataset(std::size_t n_per_class, std::uint64_t seed,
                              const std::string& out_dir, std::size_t image_size = 64);

} // namespace mcinet::data
