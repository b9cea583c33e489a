// Acceptance gate: ten numbered criteria, one printed line each, every
// tolerance pinned at the call site. Run with no arguments for the full gate
// or pass criterion numbers to run a subset. Exit 0 iff everything ran green.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "dreamif/dataio.hpp"
#include "dreamif/degrade.hpp"
#include "dreamif/image.hpp"
#include "dreamif/losses.hpp"
#include "dreamif/metrics.hpp"
#include "dreamif/model.hpp"
#include "dreamif/model_io.hpp"
#include "dreamif/trainer.hpp"
#include "json.hpp"
#include "testutil.hpp"

using namespace dreamif;
namespace fs = std::filesystem;
namespace tad = dreamif::ad;
using testutil::fd_check;
using testutil::leaf;
using testutil::random_tensor;

namespace {

struct Fail : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw Fail(msg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

fs::path g_work;

fs::path work_dir(const std::string& name) {
    const fs::path p = g_work / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(in.good(), "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// 1. Reverse-mode gradients vs central finite differences, h = 1e-3, relative
//    tolerance 1e-3, on instances no larger than 8x8; whole suite < 2 min.

std::string criterion_gradients() {
    constexpr double kH = 1e-3;
    constexpr double kRtol = 1e-3;
    constexpr double kBudgetSec = 120.0;
    Timer timer;
    RandomSource rng(20240817);

    double worst = 0.0;
    std::size_t coords = 0;
    int targets = 0;
    auto run = [&](const char* name, const std::function<tad::Var<double>()>& make,
                   std::vector<tad::Var<double>> leaves) {
        const auto rep = fd_check(make, std::move(leaves), kH, kRtol);
        require(rep.worst < 1.0,
                std::string(name) + " gradient mismatch, worst ratio " + fmt(rep.worst));
        worst = std::max(worst, rep.worst);
        coords += rep.checked;
        ++targets;
    };

    {  // pointwise convolution
        auto x = leaf(random_tensor(3, 4, 4, rng));
        auto w = leaf(random_tensor(2, 3, 1, rng));
        auto b = leaf(random_tensor(2, 1, 1, rng));
        run("conv1x1", [&] { return tad::mean_all(tad::square(tad::conv1x1(x, w, b))); },
            {x, w, b});
    }
    {  // dense 3x3 convolution, zero padded
        auto x = leaf(random_tensor(2, 4, 4, rng));
        auto w = leaf(random_tensor(2, 2, 9, rng));
        auto b = leaf(random_tensor(2, 1, 1, rng));
        run("conv3x3", [&] { return tad::mean_all(tad::square(tad::conv3x3(x, w, b))); },
            {x, w, b});
    }
    {  // depthwise 3x3 convolution
        auto x = leaf(random_tensor(3, 4, 4, rng));
        auto w = leaf(random_tensor(3, 1, 9, rng));
        auto b = leaf(random_tensor(3, 1, 1, rng));
        run("dwconv3x3", [&] { return tad::mean_all(tad::square(tad::dwconv3x3(x, w, b))); },
            {x, w, b});
    }
    {  // per-pixel channel layer norm with affine
        auto x = leaf(random_tensor(4, 3, 3, rng));
        auto g = leaf(random_tensor(4, 1, 1, rng, 0.5, 1.5));
        auto b = leaf(random_tensor(4, 1, 1, rng));
        run("layer_norm_channels",
            [&] { return tad::mean_all(tad::square(tad::layer_norm_channels(x, g, b))); },
            {x, g, b});
    }
    {  // multi-head transposed channel attention with learnable temperature
        auto q = leaf(random_tensor(4, 3, 3, rng));
        auto k = leaf(random_tensor(4, 3, 3, rng));
        auto v = leaf(random_tensor(4, 3, 3, rng));
        auto t = leaf(random_tensor(2, 1, 1, rng, 0.5, 1.5));
        run("channel_attention",
            [&] { return tad::mean_all(tad::square(tad::channel_attention(q, k, v, t, 2))); },
            {q, k, v, t});
    }
    {  // pooled descriptor through a dense layer
        auto x = leaf(random_tensor(3, 4, 4, rng));
        auto w = leaf(random_tensor(5, 3, 1, rng));
        auto b = leaf(random_tensor(5, 1, 1, rng));
        run("global_avg_pool+linear_vec",
            [&] {
                return tad::sum_all(tad::square(tad::linear_vec(tad::global_avg_pool(x), w, b)));
            },
            {x, w, b});
    }
    {  // softmax-weighted mixture over a learnable bank
        auto wts = leaf(random_tensor(3, 1, 1, rng, 0.1, 1.0));
        auto bank = leaf(random_tensor(6, 2, 2, rng));
        run("bank_mix",
            [&] {
                return tad::mean_all(
                    tad::square(tad::bank_mix(tad::softmax_vec(wts), bank, 2)));
            },
            {wts, bank});
    }
    {  // bilinear resize
        auto x = leaf(random_tensor(2, 3, 3, rng));
        run("bilinear_resize",
            [&] { return tad::mean_all(tad::square(tad::bilinear_resize(x, 5, 7))); }, {x});
    }
    {  // fixed-kernel valid convolution (the SSIM window)
        auto x = leaf(random_tensor(1, 6, 6, rng));
        const auto kw = kernels::gaussian_window<double>(3, 1.0);
        run("conv_const_valid",
            [&] { return tad::mean_all(tad::square(tad::conv_const_valid(x, kw, 3))); }, {x});
    }
    {  // horizontal+vertical edge filter pair
        auto x = leaf(random_tensor(1, 5, 5, rng));
        run("sobel_pair", [&] { return tad::mean_all(tad::square(tad::sobel_pair(x))); }, {x});
    }
    {  // fixed 3x3 color transform with offsets
        auto x = leaf(random_tensor(3, 3, 3, rng, 0.0, 1.0));
        const std::array<std::array<double, 3>, 3> m{
            {{0.2, 0.5, 0.3}, {-0.1, 0.4, 0.2}, {0.6, -0.2, 0.1}}};
        const std::array<double, 3> off{0.0, 0.5, 0.5};
        run("color_matrix",
            [&] { return tad::mean_all(tad::square(tad::color_matrix(x, m, off))); }, {x});
    }
    {  // residual downsample/upsample pair stays differentiable through reshuffles
        auto x = leaf(random_tensor(4, 4, 4, rng));
        run("pixel_(un)shuffle",
            [&] {
                return tad::mean_all(
                    tad::square(tad::pixel_shuffle_op(tad::pixel_unshuffle_op(x, 2), 2)));
            },
            {x});
    }

    // Every training loss, on 8x8 three-channel instances. abs and max have
    // measure-zero kinks; each instance keeps every kink argument separated
    // by a margin far wider than anything a +-h probe can move, so the
    // stencil never straddles one and the h = 1e-3 check stays exact.
    {  // pixel: per-pixel winner separated by 0.1, fused held below the max
        Tensor<double> tv(3, 8, 8), ti(3, 8, 8), tf(3, 8, 8);
        for (std::size_t k = 0; k < tv.size(); ++k) {
            tv.v[k] = rng.uniform(0.2, 0.8);
            const double sep = 0.1 + rng.uniform(0.0, 0.05);
            ti.v[k] = tv.v[k] + (rng.uniform() < 0.5 ? sep : -sep);
            tf.v[k] = std::max(tv.v[k], ti.v[k]) - 0.04 - rng.uniform(0.0, 0.05);
        }
        auto f = leaf(std::move(tf)), v = leaf(std::move(tv)), i = leaf(std::move(ti));
        run("pixel_loss", [&] { return pixel_loss(f, v, i); }, {f, v, i});
    }
    {  // gradient: stripes on the fused image dwarf both source edge fields,
       // and the two ramps keep their own strengths well apart; run it both
       // ways so each source wins the max once.
        auto stripes = [](double amp) {
            Tensor<double> t(3, 8, 8);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) t(c, y, x) = 0.5 + (x % 2 ? amp : -amp);
            return t;
        };
        auto ramp = [](double sx, double sy) {
            Tensor<double> t(3, 8, 8);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) t(c, y, x) = 0.1 + sx * x + sy * y;
            return t;
        };
        for (int flip = 0; flip < 2; ++flip) {
            auto f = leaf(stripes(0.2));
            auto v = leaf(ramp(flip ? 0.12 : 0.03, 0.0));
            auto i = leaf(ramp(0.0, flip ? 0.03 : 0.12));
            run(flip ? "gradient_loss(vis wins)" : "gradient_loss(ir wins)",
                [&] { return gradient_loss(f, v, i); }, {f, v, i});
        }
    }
    {  // ssim: smooth everywhere, a plain random instance suffices
        auto f = leaf(random_tensor(3, 8, 8, rng, 0.05, 0.95));
        auto v = leaf(random_tensor(3, 8, 8, rng, 0.05, 0.95));
        auto i = leaf(random_tensor(3, 8, 8, rng, 0.05, 0.95));
        run("ssim_loss", [&] { return ssim_loss(f, v, i, 5, 1.5); }, {f, v, i});
    }
    {  // color: fused = visible + a blue shift, so both chroma residuals
       // keep one sign at every pixel
        Tensor<double> tv(3, 8, 8), tf(3, 8, 8);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    tv(c, y, x) = rng.uniform(0.1, 0.7);
                    tf(c, y, x) = tv(c, y, x) + (c == 2 ? 0.2 : 0.0) +
                                  rng.uniform(-0.005, 0.005);
                }
        auto f = leaf(std::move(tf)), v = leaf(std::move(tv));
        run("color_loss", [&] { return color_loss(f, v); }, {f, v});
    }

    const double sec = timer.seconds();
    require(sec < kBudgetSec, "suite took " + fmt(sec) + "s, budget 120s");
    return std::to_string(targets) + " targets, " + std::to_string(coords) +
           " coordinates, worst ratio " + fmt(worst) + ", " + fmt(sec) + "s";
}

// ---------------------------------------------------------------------------
// 2. Enhancement stages initialize to an exact pass-through: enabling both
//    branches must not move the fused output by more than 1e-6 anywhere.

std::string criterion_identity_init() {
    constexpr float kTol = 1e-6f;
    const auto dir = work_dir("c2");
    synth_toy_dataset(1, 64, 11, dir.string());
    const auto pair = load_pair_dataset(dir.string()).load(0);
    const auto vis = ad::Var<float>::constant(pair.vis.to_rgb().to_tensor_f32());
    const auto ir = ad::Var<float>::constant(pair.ir.to_rgb().to_tensor_f32());

    auto cfg = ModelConfig::toy();
    cfg.seed = 5;
    cfg.enhance.use_ce = true;
    cfg.enhance.use_se = true;
    Model<float> on(cfg);
    cfg.enhance.use_ce = false;
    cfg.enhance.use_se = false;
    Model<float> off(cfg);

    ad::NoGradGuard ng;
    const auto a = on.forward(vis, ir).fused.value();
    const auto b = off.forward(vis, ir).fused.value();
    require(a.same_shape(b), "fused shapes differ");
    float worst = 0.f;
    for (std::size_t k = 0; k < a.size(); ++k)
        worst = std::max(worst, std::abs(a.v[k] - b.v[k]));
    require(worst <= kTol, "fused outputs differ by " + fmt(worst));
    return "max |on - off| = " + fmt(worst) + " <= 1e-6 on 64x64";
}

// ---------------------------------------------------------------------------
// 3. Loss oracles.

std::string criterion_loss_oracles() {
    RandomSource rng(33);
    Image v(48, 48, 3), i(48, 48, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) {
                v.at(c, y, x) = rng.uniform(0.02, 0.98);
                i.at(c, y, x) = rng.uniform(0.02, 0.98);
            }

    const auto self = total_loss(v, v, v);
    require(self.total < 1e-6, "total_loss(f,f,f) = " + fmt(self.total));

    const Image best = elementwise_max(v, i);
    const auto at_max = total_loss(best, v, i);
    require(at_max.pixel == 0.0, "pixel term at the elementwise max = " + fmt(at_max.pixel));

    auto x = leaf(random_tensor(1, 32, 32, rng, 0.05, 0.95));
    const double s_self = ssim_index(x, x).scalar();
    require(std::abs(s_self - 1.0) <= 1e-8, "ssim(x,x) = " + fmt(s_self));

    // Two constants: all variance terms vanish, only the luminance factor
    // survives: (2*m1*m2 + C1) / (m1^2 + m2^2 + C1) with C1 = 1e-4.
    auto ca = ad::Var<double>::constant(Tensor<double>::full(1, 16, 16, 0.5));
    auto cb = ad::Var<double>::constant(Tensor<double>::full(1, 16, 16, 0.6));
    const double got = ssim_index(ca, cb).scalar();
    const double want = (2.0 * 0.5 * 0.6 + 1e-4) / (0.25 + 0.36 + 1e-4);
    require(std::abs(got - want) <= 1e-8,
            "constant ssim " + fmt(got) + " vs closed form " + fmt(want));

    return "self total " + fmt(self.total) + ", pixel-at-max exact 0, ssim self/closed-form ok";
}

// ---------------------------------------------------------------------------
// 4. Metric oracles.

std::string criterion_metric_oracles() {
    const Image flat = Image::constant(64, 64, 3, 0.5);
    require(edge_intensity(flat) == 0.0, "EI of a constant is nonzero");
    require(average_gradient(flat) == 0.0, "AG of a constant is nonzero");

    // Horizontal ramp with step c = 2 on the 0-255 scale: AG = c / sqrt(2).
    Image ramp(64, 64, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) ramp.at(c, y, x) = 2.0 * x / 255.0;
    const double ag_got = average_gradient(ramp);
    const double ag_want = 2.0 / std::sqrt(2.0);
    require(std::abs(ag_got - ag_want) <= 1e-9,
            "ramp AG " + fmt(ag_got) + " vs " + fmt(ag_want));

    const auto dir = work_dir("c4");
    synth_toy_dataset(1, 64, 4, dir.string());
    const auto pair = load_pair_dataset(dir.string()).load(0);
    const Image vis = pair.vis, ir = pair.ir.to_rgb();

    const double q_self = qabf(vis, vis, vis);
    require(q_self >= 0.99, "Qabf(f,f,f) = " + fmt(q_self));

    Image edged(64, 64, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) edged.at(c, y, x) = x < 32 ? 0.1 : 0.9;
    const double q_flat = qabf(flat, edged, edged);
    require(q_flat <= 0.01, "Qabf(flat vs edged) = " + fmt(q_flat));

    const double v_self = viff(vis, vis, vis);
    require(std::abs(v_self - 1.0) <= 1e-6, "VIFF(f,f,f) = " + fmt(v_self));

    const Image base = Image::constant(64, 64, 3, 0.45);
    const Image off = Image::constant(64, 64, 3, 0.55);
    const double p = fusion_psnr(off, base, base);
    require(std::abs(p - 20.0) <= 1e-9, "PSNR of a 0.1 offset = " + fmt(p));

    const Image fused = elementwise_max(vis, ir);
    DegradationSpec noise;
    noise.kind = DegradationKind::gaussian;
    noise.sigma = 35.0;
    noise.seed = 77;
    const Image noisy = apply(fused, noise);
    const double q0 = qabf(fused, vis, ir), q1 = qabf(noisy, vis, ir);
    const double f0 = viff(fused, vis, ir), f1 = viff(noisy, vis, ir);
    require(q1 < q0, "Qabf did not drop under noise: " + fmt(q0) + " -> " + fmt(q1));
    require(f1 < f0, "VIFF did not drop under noise: " + fmt(f0) + " -> " + fmt(f1));

    return "AG ramp ok, Qabf self " + fmt(q_self) + " / flat " + fmt(q_flat) +
           ", VIFF self " + fmt(v_self) + ", PSNR offset ok, noise drops Qabf " + fmt(q0) +
           "->" + fmt(q1) + " and VIFF " + fmt(f0) + "->" + fmt(f1);
}

// ---------------------------------------------------------------------------
// 5. Degradation statistics on >= 1e6 samples each, < 30 s total.

std::string criterion_degradation_stats() {
    Timer timer;
    const Image half = Image::constant(1024, 1024, 1, 0.5);  // 2^20 samples
    const std::size_t n = half.size();
    require(n >= 1000000, "sample count too small");

    auto stats = [&](const Image& img) {
        double mean = 0.0;
        for (std::size_t k = 0; k < img.size(); ++k) mean += img.data()[k];
        mean /= static_cast<double>(img.size());
        double var = 0.0;
        for (std::size_t k = 0; k < img.size(); ++k) {
            const double d = img.data()[k] - mean;
            var += d * d;
        }
        var /= static_cast<double>(img.size() - 1);
        return std::pair<double, double>(mean, var);
    };

    DegradationSpec g;
    g.kind = DegradationKind::gaussian;
    g.sigma = 35.0;
    g.seed = 1;
    const auto [gm, gv] = stats(apply(half, g));
    const double g_want = 35.0 / 255.0;
    const double g_got = std::sqrt(gv);
    require(std::abs(g_got - g_want) <= 0.02 * g_want,
            "gaussian std " + fmt(g_got) + " vs " + fmt(g_want));

    DegradationSpec p;
    p.kind = DegradationKind::poisson;
    p.lam = 4.0;
    p.seed = 2;
    const auto [pm, pv] = stats(apply(half, p));
    const double p_want = 0.5 / 1e4;
    require(std::abs(pv - p_want) <= 0.05 * p_want,
            "poisson variance " + fmt(pv) + " vs " + fmt(p_want));

    DegradationSpec s;
    s.kind = DegradationKind::speckle;
    s.eps = 25.0;
    s.seed = 3;
    const auto [sm, sv] = stats(apply(half, s));
    const double s_want = 0.5 * 25.0 / 255.0;
    const double s_got = std::sqrt(sv);
    require(std::abs(s_got - s_want) <= 0.02 * s_want,
            "speckle std " + fmt(s_got) + " vs " + fmt(s_want));

    const double sec = timer.seconds();
    require(sec < 30.0, "took " + fmt(sec) + "s, budget 30s");
    return "gaussian std " + fmt(g_got) + "/" + fmt(g_want) + ", poisson var " + fmt(pv) + "/" +
           fmt(p_want) + ", speckle std " + fmt(s_got) + "/" + fmt(s_want) + ", " + fmt(sec) +
           "s";
}

// ---------------------------------------------------------------------------
// 6. Learning-rate schedule endpoints and midpoint.

std::string criterion_schedule() {
    TrainConfig cfg;
    cfg.total_steps = 1000;
    require(cosine_lr(0, cfg) == 1e-4, "start is not exactly 1e-4");
    require(cosine_lr(1000, cfg) == 1e-6, "end is not exactly 1e-6");
    const double mid = cosine_lr(500, cfg);
    require(std::abs(mid - 5.05e-5) <= 1e-12, "midpoint = " + fmt(mid));
    return "1e-4 / 5.05e-5 / 1e-6 as required";
}

// ---------------------------------------------------------------------------
// Shared harness for the two smoke trainings.

struct SmokeResult {
    TrainOutput out;
    double first10 = 0.0, last10 = 0.0, seconds = 0.0;
};

SmokeResult run_smoke(Model<float>& model, const PairedDataset& ds, TrainConfig cfg,
                      const fs::path& out_dir) {
    Timer timer;
    SmokeResult r;
    r.out = train(model, ds, cfg, out_dir.string());
    r.seconds = timer.seconds();
    require(r.out.history.size() == static_cast<std::size_t>(cfg.total_steps),
            "history is incomplete");
    for (int k = 0; k < 10; ++k) {
        r.first10 += r.out.history[k].loss.total / 10.0;
        r.last10 += r.out.history[r.out.history.size() - 10 + k].loss.total / 10.0;
    }
    return r;
}

// 7. Overfitting eight clean pairs halves the training loss within 300 steps.

std::string criterion_overfit() {
    constexpr double kBudgetSec = 600.0;
    const auto dir = work_dir("c7");
    synth_toy_dataset(8, 64, 7, (dir / "data").string());
    const auto ds = load_pair_dataset((dir / "data").string());

    auto mc = ModelConfig::toy();
    mc.seed = 1;
    Model<float> model(mc);

    TrainConfig cfg;
    cfg.total_steps = 300;
    cfg.batch_size = 4;
    cfg.crop = 64;
    cfg.degrade_prob = 0.0;
    cfg.seed = 1;
    const auto r = run_smoke(model, ds, cfg, dir / "out");

    require(r.seconds <= kBudgetSec,
            "took " + fmt(r.seconds) + "s, budget " + fmt(kBudgetSec) + "s");
    require(r.last10 <= 0.5 * r.first10, "loss " + fmt(r.first10) + " -> " + fmt(r.last10) +
                                             " misses the 50% bar");
    return "loss " + fmt(r.first10) + " -> " + fmt(r.last10) + " (ratio " +
           fmt(r.last10 / r.first10) + " <= 0.5), " + fmt(r.seconds) + "s";
}

// 8. Training under the full degradation stack still learns, and fusing a
//    degraded pair beats the degraded visible input on Qabf vs clean sources.

std::string criterion_degraded_training() {
    constexpr double kBudgetSec = 900.0;
    const auto dir = work_dir("c8");
    synth_toy_dataset(8, 64, 7, (dir / "data").string());
    const auto ds = load_pair_dataset((dir / "data").string());

    auto mc = ModelConfig::toy();
    mc.seed = 1;
    Model<float> model(mc);

    TrainConfig cfg;
    cfg.total_steps = 300;
    cfg.batch_size = 4;
    cfg.crop = 64;
    cfg.degrade_prob = 1.0;
    cfg.degrade_kinds = {DegradationKind::triplet};
    cfg.seed = 1;
    const auto r = run_smoke(model, ds, cfg, dir / "out");

    require(r.seconds <= kBudgetSec,
            "took " + fmt(r.seconds) + "s, budget " + fmt(kBudgetSec) + "s");
    require(r.last10 <= 0.7 * r.first10, "loss " + fmt(r.first10) + " -> " + fmt(r.last10) +
                                             " misses the 30% bar");

    const auto pair = ds.load(0);
    const Image vis = pair.vis.to_rgb(), ir = pair.ir.to_rgb();
    DegradationSpec dv, di;
    dv.kind = di.kind = DegradationKind::triplet;
    dv.seed = 101;
    di.seed = 202;
    const Image vis_d = apply(vis, dv), ir_d = apply(ir, di);

    ad::NoGradGuard ng;
    const auto fused_t = model
                             .forward(ad::Var<float>::constant(vis_d.to_tensor_f32()),
                                      ad::Var<float>::constant(ir_d.to_tensor_f32()))
                             .fused.value();
    const Image fused = Image::from_tensor(fused_t);
    const double q_fused = qabf(fused, vis, ir);
    const double q_deg = qabf(vis_d, vis, ir);
    require(q_fused > q_deg,
            "fused Qabf " + fmt(q_fused) + " does not beat degraded visible " + fmt(q_deg));
    return "loss " + fmt(r.first10) + " -> " + fmt(r.last10) + " (ratio " +
           fmt(r.last10 / r.first10) + " <= 0.7), Qabf fused " + fmt(q_fused) +
           " > degraded vis " + fmt(q_deg) + ", " + fmt(r.seconds) + "s";
}

// ---------------------------------------------------------------------------
// 9. Roundtrips: checkpoint bit-exact, PNG within quantization, pixel
//    (un)shuffle bit-exact, color-space within 1e-6.

std::string criterion_roundtrips() {
    const auto dir = work_dir("c9");

    auto cfg = ModelConfig::toy();
    cfg.backbone.base_dim = 8;
    cfg.backbone.level_blocks = {1, 1, 1, 1};
    cfg.enhance.prompt_n = 2;
    cfg.enhance.prompt_base = 4;
    cfg.seed = 29;
    Model<float> m(cfg);
    for (auto& x : m.params().at("fuse.out.w").mutable_value().v) x += 0.0625f;
    const std::string ck = (dir / "model.drif").string();
    save_checkpoint(ck, m, 17);
    std::int64_t step = 0;
    auto loaded = load_checkpoint(ck, &step);
    require(step == 17, "step not preserved");
    require(loaded.params().count() == m.params().count(), "parameter set changed");
    for (const auto& [name, var] : m.params()) {
        const auto& a = var.value();
        const auto& b = loaded.params().at(name).value();
        require(a.same_shape(b), name + " shape changed");
        for (std::size_t k = 0; k < a.size(); ++k)
            require(a.v[k] == b.v[k], name + " not bit-exact after reload");
    }
    save_checkpoint((dir / "again.drif").string(), loaded, 17);
    require(read_bytes(ck) == read_bytes(dir / "again.drif"), "re-saved bytes differ");

    RandomSource rng(9);
    Image img(33, 57, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 33; ++y)
            for (int x = 0; x < 57; ++x) img.at(c, y, x) = rng.uniform();
    const std::string png = (dir / "t.png").string();
    save_png(img, png);
    const Image back = load_png(png);
    double worst_png = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k)
        worst_png = std::max(worst_png, std::abs(img.data()[k] - back.data()[k]));
    require(worst_png <= 1.0 / 510.0, "png roundtrip error " + fmt(worst_png));

    Tensor<float> t(4, 8, 8);
    RandomSource trng(10);
    for (auto& x : t.v) x = static_cast<float>(trng.uniform(-2.0, 2.0));
    const auto round1 = pixel_shuffle(pixel_unshuffle(t, 2), 2);
    const auto round2 = pixel_unshuffle(pixel_shuffle(t, 2), 2);
    require(round1.same_shape(t) && round2.same_shape(t), "shuffle shape mismatch");
    for (std::size_t k = 0; k < t.size(); ++k) {
        require(round1.v[k] == t.v[k], "unshuffle->shuffle not bit-exact");
        require(round2.v[k] == t.v[k], "shuffle->unshuffle not bit-exact");
    }

    const Image rt = ycbcr_to_rgb(rgb_to_ycbcr(img));
    double worst_cc = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k)
        worst_cc = std::max(worst_cc, std::abs(img.data()[k] - rt.data()[k]));
    require(worst_cc <= 1e-6, "color-space roundtrip error " + fmt(worst_cc));

    return "checkpoint bit-exact, png " + fmt(worst_png) + " <= 1/510, shuffles bit-exact, " +
           "ycbcr " + fmt(worst_cc) + " <= 1e-6";
}

// ---------------------------------------------------------------------------
// 10. Command-line golden runs and the exit-code contract.

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DREAMIF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    require(st >= 0, "failed to launch the tool");
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string criterion_cli() {
    const auto dir = work_dir("c10");
    const std::string data = (dir / "data").string();

    require(run_cli("synth --n 8 --size 128 --seed 0 --out " + data) == 0, "synth exit != 0");
    std::size_t pngs = 0;
    for (const auto& e : fs::recursive_directory_iterator(data))
        if (e.is_regular_file() && e.path().extension() == ".png") ++pngs;
    require(pngs == 16, "synth wrote " + std::to_string(pngs) + " PNGs, want 16");

    const std::string x = data + "/vis/pair_000.png";
    const std::string y1 = (dir / "y1.png").string(), y2 = (dir / "y2.png").string();
    require(run_cli("degrade --in " + x + " --kind gaussian --sigma 35 --seed 7 --out " + y1) ==
                0,
            "degrade exit != 0");
    require(run_cli("degrade --in " + x + " --kind gaussian --sigma 35 --seed 7 --out " + y2) ==
                0,
            "degrade rerun exit != 0");
    require(read_bytes(y1) == read_bytes(y2), "seeded degrade is not byte-identical");

    const std::string rj = (dir / "r.json").string();
    require(run_cli("eval --fused " + x + " --vis " + x + " --ir " + x + " --json " + rj) == 0,
            "eval exit != 0");
    const auto r = nlohmann::json::parse(read_bytes(rj));
    require(r.at("psnr").get<double>() == 100.0, "identical-triple psnr != 100");
    require(std::abs(r.at("viff").get<double>() - 1.0) <= 1e-6,
            "identical-triple viff " + fmt(r.at("viff").get<double>()));

    require(run_cli("bogus") == 2, "unknown subcommand exit != 2");
    require(run_cli("") == 2, "bare invocation exit != 2");
    require(run_cli("synth --bogus 1") == 2, "unknown flag exit != 2");
    require(run_cli("degrade --in " + (dir / "missing.png").string() +
                    " --kind gaussian --seed 1 --out " + (dir / "o.png").string()) == 1,
            "operational failure exit != 1");

    return "synth 16 PNGs, seeded degrade byte-stable, identical-triple report, exit codes "
           "2/2/2/1";
}

// ---------------------------------------------------------------------------

struct Criterion {
    int id;
    const char* name;
    std::function<std::string()> run;
};

const Criterion kCriteria[] = {
    {1, "gradient suite", criterion_gradients},
    {2, "enhancement identity at init", criterion_identity_init},
    {3, "loss oracles", criterion_loss_oracles},
    {4, "metric oracles", criterion_metric_oracles},
    {5, "degradation statistics", criterion_degradation_stats},
    {6, "lr schedule", criterion_schedule},
    {7, "overfit smoke", criterion_overfit},
    {8, "degradation-robust smoke", criterion_degraded_training},
    {9, "roundtrips", criterion_roundtrips},
    {10, "cli golden runs", criterion_cli},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    g_work = fs::temp_directory_path() / ("dreamif_accept_" + std::to_string(::getpid()));
    fs::create_directories(g_work);

    bool all_ok = true;
    for (const auto& c : kCriteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
            continue;
        std::string verdict, detail;
        try {
            detail = c.run();
            verdict = "PASS";
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            all_ok = false;
        }
        std::printf("CRITERION %d [%s]: %s (%s)\n", c.id, c.name, verdict.c_str(),
                    detail.c_str());
        std::fflush(stdout);
    }

    fs::remove_all(g_work);
    return all_ok ? 0 : 1;
}
