#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamif/image.hpp"
#include "dreamif/random.hpp"

namespace dreamif {

// --- PNG persistence ---------------------------------------------------------

// Decodes an 8- or 16-bit PNG to [0,1]; palette images expand to RGB,
// grayscale replicates to 3 channels, alpha is dropped.
Image load_png(const std::string& path);

// Encodes 8-bit (round-to-nearest), grayscale for 1-channel images and RGB
// otherwise. The write is atomic: temp file in the same directory, fsync,
// rename over the target.
void save_png(const Image& img, const std::string& path);

// --- paired datasets -----------------------------------------------------------

struct ImagePair {
    Image vis, ir;
    std::string id;
};

// Lazily loaded list of (vis, ir) pairs matched by filename under
// root/vis/*.png and root/ir/*.png, ordered lexicographically. Files present
// on one side only are skipped with a warning, or rejected when strict.
class PairedDataset {
  public:
    PairedDataset() = default;
    PairedDataset(std::string root, std::vector<std::string> ids)
        : root_(std::move(root)), ids_(std::move(ids)) {}

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::string& id(std::size_t i) const { return ids_.at(i); }
    const std::string& root() const { return root_; }

    ImagePair load(std::size_t i) const;

  private:
    std::string root_;
    std::vector<std::string> ids_;
};

PairedDataset load_pair_dataset(const std::string& root, bool strict = false);

// Same window cut from both modalities; `size` must divide by 8 and fit.
ImagePair random_crop_pair(const ImagePair& pair, int size, RandomSource& rng);

// --- synthetic pairs -------------------------------------------------------------

// One complementary test pair: the visible image is a textured colored scene
// with a dark low-light disk; the infrared image is smooth with bright blobs
// inside that disk, so each modality dominates somewhere. The disk geometry is
// returned for tests that verify the construction.
struct ToyPair {
    ImagePair pair;
    int cx = 0, cy = 0, radius = 0;  // dark-disk geometry in pixels
};

ToyPair make_toy_pair(int size, RandomSource& rng);

// Writes n pairs under out_root/{vis,ir}/pair_NNN.png and returns the dataset.
PairedDataset synth_toy_dataset(int n, int size, std::uint64_t seed, const std::string& out_root);

}  // namespace dreamif
