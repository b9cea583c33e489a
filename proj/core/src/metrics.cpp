#include "dreamif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dreamif/kernels.hpp"

namespace dreamif {

namespace {

constexpr double kPsnrCap = 100.0;
constexpr double kPi = 3.14159265358979323846;

std::vector<double> luma255(const Image& img) {
    std::vector<double> y = luma(img);
    for (auto& v : y) v *= 255.0;
    return y;
}

void check_same_dims(const Image& a, const Image& b, const char* who) {
    if (a.height() != b.height() || a.width() != b.width())
        throw std::invalid_argument(std::string(who) + ": size mismatch");
}

double psnr_single(const std::vector<double>& a, const std::vector<double>& b) {
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// Valid-region correlation with an n x n kernel.
void filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k,
                  int n, std::vector<double>& dst, int& oh, int& ow) {
    oh = h - n + 1;
    ow = w - n + 1;
    dst.assign(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < n; ++ky) {
                const double* row = src.data() + static_cast<std::size_t>(y + ky) * w + x;
                const double* kr = k.data() + static_cast<std::size_t>(ky) * n;
                for (int kx = 0; kx < n; ++kx) acc += row[kx] * kr[kx];
            }
            dst[static_cast<std::size_t>(y) * ow + x] = acc;
        }
}

void downsample2(std::vector<double>& img, int& h, int& w) {
    const int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<std::size_t>(y) * ow + x] = img[static_cast<std::size_t>(2 * y) * w + 2 * x];
    img = std::move(out);
    h = oh;
    w = ow;
}

// Multi-scale information fidelity of `dist` as a reproduction of `ref`,
// assuming additive observation noise of variance 2 on the 0..255 scale. The
// per-scale information ratios are averaged uniformly.
double vif_single(std::vector<double> ref, std::vector<double> dist, int h, int w) {
    constexpr double kSigmaNsq = 2.0;
    constexpr double kEps = 1e-10;
    double ratio_sum = 0.0;
    int hr = h, wr = w, hd = h, wd = w;
    for (int scale = 1; scale <= 4; ++scale) {
        const int n = (1 << (4 - scale + 1)) + 1;  // 17, 9, 5, 3
        const std::vector<double> win = kernels::gaussian_window<double>(n, n / 5.0);
        if (scale > 1) {
            int oh = 0, ow = 0;
            std::vector<double> t;
            filter_valid(ref, hr, wr, win, n, t, oh, ow);
            ref = std::move(t);
            hr = oh;
            wr = ow;
            downsample2(ref, hr, wr);
            filter_valid(dist, hd, wd, win, n, t, oh, ow);
            dist = std::move(t);
            hd = oh;
            wd = ow;
            downsample2(dist, hd, wd);
        }
        if (hr < n || wr < n) break;  // image exhausted at this scale

        std::vector<double> mu1, mu2, rr, dd, rd;
        int oh = 0, ow = 0;
        filter_valid(ref, hr, wr, win, n, mu1, oh, ow);
        filter_valid(dist, hd, wd, win, n, mu2, oh, ow);
        std::vector<double> prod(ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) prod[i] = ref[i] * ref[i];
        filter_valid(prod, hr, wr, win, n, rr, oh, ow);
        for (std::size_t i = 0; i < dist.size(); ++i) prod[i] = dist[i] * dist[i];
        filter_valid(prod, hd, wd, win, n, dd, oh, ow);
        for (std::size_t i = 0; i < ref.size(); ++i) prod[i] = ref[i] * dist[i];
        filter_valid(prod, hr, wr, win, n, rd, oh, ow);

        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < mu1.size(); ++i) {
            double s1 = std::max(0.0, rr[i] - mu1[i] * mu1[i]);
            double s2 = std::max(0.0, dd[i] - mu2[i] * mu2[i]);
            const double s12 = rd[i] - mu1[i] * mu2[i];
            double g = s12 / (s1 + kEps);
            double sv = s2 - g * s12;
            if (s1 < kEps) {
                g = 0.0;
                sv = s2;
                s1 = 0.0;
            }
            if (s2 < kEps) {
                g = 0.0;
                sv = 0.0;
            }
            if (g < 0.0) {
                sv = s2;
                g = 0.0;
            }
            sv = std::max(sv, kEps);
            num += std::log10(1.0 + g * g * s1 / (sv + kSigmaNsq));
            den += std::log10(1.0 + s1 / kSigmaNsq);
        }
        ratio_sum += den < kEps ? 1.0 : num / den;
    }
    return ratio_sum / 4.0;
}

}  // namespace

double edge_intensity(const Image& img) {
    const std::vector<double> y = luma255(img);
    GradientField g = sobel(y, img.height(), img.width());
    double acc = 0.0;
    for (std::size_t i = 0; i < g.gx.size(); ++i)
        acc += std::sqrt(g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i]);
    return acc / static_cast<double>(g.gx.size());
}

double average_gradient(const Image& img) {
    const int h = img.height(), w = img.width();
    if (h < 2 || w < 2) throw std::invalid_argument("average_gradient: image too small");
    const std::vector<double> y = luma255(img);
    double acc = 0.0;
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c + 1 < w; ++c) {
            const double dx = y[static_cast<std::size_t>(r) * w + c + 1] - y[static_cast<std::size_t>(r) * w + c];
            const double dy = y[static_cast<std::size_t>(r + 1) * w + c] - y[static_cast<std::size_t>(r) * w + c];
            acc += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    return acc / (static_cast<double>(h - 1) * (w - 1));
}

double fusion_psnr(const Image& fused, const Image& vis, const Image& ir) {
    check_same_dims(fused, vis, "fusion_psnr");
    check_same_dims(fused, ir, "fusion_psnr");
    const std::vector<double> yf = luma(fused), yv = luma(vis), yi = luma(ir);
    return 0.5 * (psnr_single(yf, yv) + psnr_single(yf, yi));
}

// Edge-information preservation. Per pixel and per source we compare edge
// strength and orientation between source and fused image, squash each through
// a sigmoid, and normalize so perfect preservation scores exactly 1. The
// contributions are weighted by source edge strength.
double qabf(const Image& fused, const Image& a, const Image& b) {
    check_same_dims(fused, a, "qabf");
    check_same_dims(fused, b, "qabf");
    const int h = fused.height(), w = fused.width();
    const std::vector<double> yf = luma255(fused), ya = luma255(a), yb = luma255(b);
    GradientField gf = sobel(yf, h, w), ga = sobel(ya, h, w), gb = sobel(yb, h, w);

    auto strength = [](const GradientField& g, std::size_t i) {
        return std::sqrt(g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i]);
    };
    auto orientation = [](const GradientField& g, std::size_t i) {
        return g.gx[i] == 0.0 ? kPi / 2.0 : std::atan(g.gy[i] / g.gx[i]);
    };
    const double qg1 = 0.9994 / (1.0 + std::exp(-15.0 * 0.5));
    const double qa1 = 0.9879 / (1.0 + std::exp(-22.0 * 0.2));
    const double norm = qg1 * qa1;  // score of a perfectly preserved edge

    auto edge_pres = [&](const GradientField& gs, std::size_t i) {
        const double ss = strength(gs, i), sf = strength(gf, i);
        double G;
        if (ss == sf)
            G = 1.0;
        else if (ss > sf)
            G = sf / ss;
        else
            G = ss / sf;
        const double A = 1.0 - std::abs(orientation(gs, i) - orientation(gf, i)) / (kPi / 2.0);
        const double qg = 0.9994 / (1.0 + std::exp(-15.0 * (G - 0.5)));
        const double qa = 0.9879 / (1.0 + std::exp(-22.0 * (A - 0.8)));
        return qg * qa / norm;
    };

    double num = 0.0, den = 0.0;
    const std::size_t npix = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < npix; ++i) {
        const double wa = strength(ga, i), wb = strength(gb, i);
        num += edge_pres(ga, i) * wa + edge_pres(gb, i) * wb;
        den += wa + wb;
    }
    return den == 0.0 ? 0.0 : num / den;
}

double viff(const Image& fused, const Image& a, const Image& b) {
    check_same_dims(fused, a, "viff");
    check_same_dims(fused, b, "viff");
    const int h = fused.height(), w = fused.width();
    const std::vector<double> yf = luma255(fused);
    const double va = vif_single(luma255(a), yf, h, w);
    const double vb = vif_single(luma255(b), yf, h, w);
    return 0.5 * (va + vb);
}

MetricReport evaluate_pair(const Image& fused, const Image& vis, const Image& ir) {
    MetricReport r;
    r.ei = edge_intensity(fused);
    r.ag = average_gradient(fused);
    r.psnr = fusion_psnr(fused, vis, ir);
    r.qabf = qabf(fused, vis, ir);
    r.viff = viff(fused, vis, ir);
    return r;
}

}  // namespace dreamif
