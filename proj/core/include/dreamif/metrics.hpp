#pragma once

#include <string>

#include "dreamif/image.hpp"

// Fusion quality metrics. All work on luma; edge/information metrics use the
// conventional 0..255 intensity scale, peak signal-to-noise stays on [0,1].

namespace dreamif {

struct MetricReport {
    double ei = 0.0;    // mean edge magnitude of the fused image
    double ag = 0.0;    // mean forward-difference gradient of the fused image
    double psnr = 0.0;  // mean PSNR against the two sources, capped at 100 dB
    double qabf = 0.0;  // edge-information preservation from both sources, in [0,1]
    double viff = 0.0;  // visual-information fidelity against both sources
};

double edge_intensity(const Image& img);
double average_gradient(const Image& img);
double fusion_psnr(const Image& fused, const Image& vis, const Image& ir);
double qabf(const Image& fused, const Image& a, const Image& b);
double viff(const Image& fused, const Image& a, const Image& b);

MetricReport evaluate_pair(const Image& fused, const Image& vis, const Image& ir);

std::string to_json(const MetricReport& r);

}  // namespace dreamif
