#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dreamif/dataio.hpp"

namespace dreamif {

namespace {

// Smooth random field in [lo,hi]: coarse seeded grid, bilinearly upsampled.
std::vector<double> value_noise(int size, int grid, double lo, double hi, RandomSource& rng) {
    std::vector<double> coarse(static_cast<std::size_t>(grid) * grid);
    for (auto& v : coarse) v = rng.uniform(lo, hi);
    std::vector<double> out(static_cast<std::size_t>(size) * size);
    const double step = static_cast<double>(grid - 1) / (size - 1);
    for (int y = 0; y < size; ++y) {
        const double fy = y * step;
        const int y0 = std::min(static_cast<int>(fy), grid - 2);
        const double ty = fy - y0;
        for (int x = 0; x < size; ++x) {
            const double fx = x * step;
            const int x0 = std::min(static_cast<int>(fx), grid - 2);
            const double tx = fx - x0;
            const double a = coarse[static_cast<std::size_t>(y0) * grid + x0];
            const double b = coarse[static_cast<std::size_t>(y0) * grid + x0 + 1];
            const double c = coarse[static_cast<std::size_t>(y0 + 1) * grid + x0];
            const double d = coarse[static_cast<std::size_t>(y0 + 1) * grid + x0 + 1];
            out[static_cast<std::size_t>(y) * size + x] =
                (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
        }
    }
    return out;
}

}  // namespace

ToyPair make_toy_pair(int size, RandomSource& rng) {
    if (size < 16 || size % 8 != 0)
        throw std::invalid_argument("make_toy_pair: size must be >= 16 and divide by 8");
    ToyPair tp;
    tp.radius = static_cast<int>(rng.uniform(size / 5.0, size / 3.0));
    tp.cx = static_cast<int>(rng.uniform(tp.radius, size - 1.0 - tp.radius));
    tp.cy = static_cast<int>(rng.uniform(tp.radius, size - 1.0 - tp.radius));

    auto inside = [&](int y, int x) {
        const double dx = x - tp.cx, dy = y - tp.cy;
        return dx * dx + dy * dy <= static_cast<double>(tp.radius) * tp.radius;
    };

    // Both modalities observe the same large-scale scene. The visible image
    // adds fine texture and gentle color tints on top of it; the infrared keeps
    // only the smooth scene. Outside the disk the two therefore share their
    // structure, so a faithful fusion can agree with both at once — inside the
    // disk they stay complementary (dark visible, bright infrared targets).
    std::vector<double> scene = value_noise(size, 7, 0.25, 0.92, rng);
    std::vector<double> detail = value_noise(size, 33, -0.04, 0.04, rng);
    std::vector<double> tint[3] = {value_noise(size, 3, -0.06, 0.06, rng),
                                   value_noise(size, 3, -0.06, 0.06, rng),
                                   value_noise(size, 3, -0.06, 0.06, rng)};

    // Visible: textured colored scene, darkened to ~15% inside the disk.
    // Outside level >= 0.25 - 0.1, inside <= 1.02 * 0.15, so the mean luma
    // contrast between the regions clears the documented 0.2 margin.
    Image vis(size, size, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto k = static_cast<std::size_t>(y) * size + x;
                double v = scene[k] + detail[k] + tint[c][k];
                if (inside(y, x)) v *= 0.15;
                vis.at(c, y, x) = std::clamp(v, 0.0, 1.0);
            }

    // Infrared: the smooth scene plus bright blobs centered inside the disk.
    Image ir(size, size, 1);
    const int nblobs = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<double> bx(nblobs), by(nblobs), bs(nblobs), ba(nblobs);
    for (int i = 0; i < nblobs; ++i) {
        const double ang = rng.uniform(0.0, 6.283185307179586);
        const double rad = rng.uniform(0.0, 0.6 * tp.radius);
        bx[i] = tp.cx + rad * std::cos(ang);
        by[i] = tp.cy + rad * std::sin(ang);
        bs[i] = rng.uniform(tp.radius / 4.0, tp.radius / 2.5);
        ba[i] = rng.uniform(0.5, 0.7);
    }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double v = scene[static_cast<std::size_t>(y) * size + x];
            for (int i = 0; i < nblobs; ++i) {
                const double dx = x - bx[i], dy = y - by[i];
                v += ba[i] * std::exp(-(dx * dx + dy * dy) / (2.0 * bs[i] * bs[i]));
            }
            ir.at(0, y, x) = std::clamp(v, 0.0, 1.0);
        }

    tp.pair.vis = std::move(vis);
    tp.pair.ir = ir.to_rgb();
    return tp;
}

PairedDataset synth_toy_dataset(int n, int size, std::uint64_t seed, const std::string& out_root) {
    if (n < 1) throw std::invalid_argument("synth_toy_dataset: n must be >= 1");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_root) / "vis");
    fs::create_directories(fs::path(out_root) / "ir");

    RandomSource rng(seed);
    int width = 3;
    for (int v = n - 1; v >= 1000; v /= 10) ++width;

    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        std::string num = std::to_string(i);
        num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
        const std::string name = "pair_" + num + ".png";
        RandomSource pair_rng(rng.fork_seed());
        ToyPair tp = make_toy_pair(size, pair_rng);
        save_png(tp.pair.vis, (fs::path(out_root) / "vis" / name).string());
        save_png(tp.pair.ir, (fs::path(out_root) / "ir" / name).string());
        ids.push_back(name);
    }
    return PairedDataset(out_root, std::move(ids));
}

}  // namespace dreamif
