#include "dreamif/dataio.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>

#include "dreamif/errors.hpp"

namespace dreamif {

namespace fs = std::filesystem;

ImagePair PairedDataset::load(std::size_t i) const {
    const std::string& name = ids_.at(i);
    ImagePair pair;
    pair.id = name;
    pair.vis = load_png((fs::path(root_) / "vis" / name).string());
    pair.ir = load_png((fs::path(root_) / "ir" / name).string());
    if (pair.vis.height() != pair.ir.height() || pair.vis.width() != pair.ir.width())
        throw FormatError("pair " + name + ": vis and ir sizes differ");
    return pair;
}

PairedDataset load_pair_dataset(const std::string& root, bool strict) {
    const fs::path vis_dir = fs::path(root) / "vis";
    const fs::path ir_dir = fs::path(root) / "ir";
    if (!fs::is_directory(vis_dir) || !fs::is_directory(ir_dir))
        throw FormatError("dataset root must contain vis/ and ir/: " + root);

    auto list_pngs = [](const fs::path& dir) {
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                names.insert(e.path().filename().string());
        return names;
    };
    const std::set<std::string> vis_names = list_pngs(vis_dir);
    const std::set<std::string> ir_names = list_pngs(ir_dir);

    std::vector<std::string> ids;
    for (const auto& n : vis_names) {
        if (ir_names.count(n)) {
            ids.push_back(n);
        } else if (strict) {
            throw FormatError("unmatched file vis/" + n);
        } else {
            std::cerr << "warning: skipping unmatched file vis/" << n << "\n";
        }
    }
    for (const auto& n : ir_names)
        if (!vis_names.count(n)) {
            if (strict) throw FormatError("unmatched file ir/" + n);
            std::cerr << "warning: skipping unmatched file ir/" << n << "\n";
        }
    if (ids.empty()) throw EmptyDatasetError("no matched pairs under " + root);
    return PairedDataset(root, std::move(ids));  // set iteration is already sorted
}

ImagePair random_crop_pair(const ImagePair& pair, int size, RandomSource& rng) {
    const int h = pair.vis.height(), w = pair.vis.width();
    if (size <= 0 || size % 8 != 0) throw std::invalid_argument("crop size must divide by 8");
    if (size > h || size > w) throw std::invalid_argument("crop size exceeds image");
    const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h - size + 1)));
    const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w - size + 1)));

    auto cut = [&](const Image& src) {
        Image dst(size, size, src.channels());
        for (int c = 0; c < src.channels(); ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) dst.at(c, y, x) = src.at(c, y0 + y, x0 + x);
        return dst;
    };
    return {cut(pair.vis), cut(pair.ir), pair.id};
}

}  // namespace dreamif
