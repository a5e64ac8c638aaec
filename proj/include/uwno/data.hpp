#pragma once

#include "uwno/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace uwno {

// One training pair: image in [0,1], strictly binary mask, equal shapes.
struct Sample {
    Tensor image;     // [1,H,W]
    Tensor mask;      // [1,H,W], values in {0,1}
    std::string id;
};

// Loads an image/mask pair: the image is scaled by 1/255 and bilinearly
// resized to target x target (RGB collapses to the channel average); the
// mask is nearest-resized, then binarized at 127.
Sample load_sample(const std::string& image_path, const std::string& mask_path, int target);

// Image half of load_sample, for inference on unlabelled inputs.
Tensor load_image_tensor(const std::string& path, int target);

// Scans data_dir/images/*.png (sorted by stem) and pairs each with
// data_dir/masks/<stem>.png; a missing mask is an error.
std::vector<Sample> load_dataset(const std::string& data_dir, int target);

// Deterministic shuffle by seed; val gets floor(n * val_fraction) samples.
std::pair<std::vector<Sample>, std::vector<Sample>>
split_dataset(std::vector<Sample> samples, float val_fraction, uint64_t seed);

// Speckled ellipse phantom, fully determined by the seed: dark background,
// bright filled ellipse with a brighter 2-px rim, 3x3 mean blur, then
// multiplicative uniform speckle in [0.6, 1.4], clamped to [0,1].
Sample synth_sample(uint64_t seed, int size);

// Writes s into <data_dir>/images/<id>.png and <data_dir>/masks/<id>.png
// as 8-bit grayscale (mask values 0/255). Creates the directories.
void write_sample_png(const Sample& s, const std::string& data_dir);

} // namespace uwno
