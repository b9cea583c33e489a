#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dreamif/dataio.hpp"
#include "dreamif/degrade.hpp"
#include "dreamif/errors.hpp"
#include "dreamif/metrics.hpp"
#include "dreamif/model_io.hpp"
#include "dreamif/trainer.hpp"

// One binary, subcommand style. Exit codes: 0 success, 1 operational failure
// (single-line diagnostic on stderr), 2 usage error.

namespace {

namespace fs = std::filesystem;
using dreamif::Image;

std::string slurp_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dreamif::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Image rd_to_image(const dreamif::Tensor<float>& t) {
    Image img(t.h, t.w, 1);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            img.at(0, y, x) = static_cast<double>(t.v[static_cast<std::size_t>(y) * t.w + x]);
    img.clamp01();
    return img;
}

// Runs the model on a PNG pair without building a tape; returns the forward
// products for fuse/rdmaps to pick over.
dreamif::ForwardResult<float> run_checkpoint(const std::string& checkpoint,
                                             const std::string& vis_path,
                                             const std::string& ir_path) {
    auto model = dreamif::load_checkpoint(checkpoint);
    const Image vis = dreamif::load_png(vis_path);
    const Image ir = dreamif::load_png(ir_path);
    if (vis.height() != ir.height() || vis.width() != ir.width())
        throw dreamif::FormatError("vis and ir sizes differ");
    if (vis.height() % 8 != 0 || vis.width() % 8 != 0)
        throw std::invalid_argument("image sides must be multiples of 8");
    dreamif::ad::NoGradGuard ng;
    auto vv = dreamif::ad::Var<float>::constant(vis.to_tensor_f32());
    auto vi = dreamif::ad::Var<float>::constant(ir.to_tensor_f32());
    return model.forward(vv, vi);
}

void write_rd_maps(const dreamif::ForwardResult<float>& out, const std::string& dir) {
    fs::create_directories(dir);
    for (int k = 0; k < 4; ++k) {
        const std::string level = "L" + std::to_string(k + 1);  // L1 = deepest
        dreamif::save_png(rd_to_image(out.rd_vis[k].value()),
                          (fs::path(dir) / ("rd_vis_" + level + ".png")).string());
        dreamif::save_png(rd_to_image(out.rd_ir[k].value()),
                          (fs::path(dir) / ("rd_ir_" + level + ".png")).string());
    }
}

nlohmann::json report_json(const dreamif::MetricReport& r) {
    return {{"ei", r.ei}, {"ag", r.ag}, {"psnr", r.psnr}, {"qabf", r.qabf}, {"viff", r.viff}};
}

void write_text(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw dreamif::IoError("cannot open " + path);
    out << text << "\n";
    if (!out.flush()) throw dreamif::IoError("write failed for " + path);
}

// Batch evaluation over ROOT/{vis,ir,fused}; a --jobs sized pool walks the
// pair list, metrics being pure functions of the three images.
nlohmann::json eval_directory(const std::string& root, int jobs) {
    const fs::path fused_dir = fs::path(root) / "fused";
    if (!fs::is_directory(fused_dir))
        throw dreamif::FormatError("eval root must contain fused/: " + root);
    const auto data = dreamif::load_pair_dataset(root);

    std::vector<std::string> ids;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (fs::exists(fused_dir / data.id(i)))
            ids.push_back(data.id(i));
        else
            std::cerr << "warning: no fused image for " << data.id(i) << "\n";
    if (ids.empty()) throw dreamif::EmptyDatasetError("no evaluable pairs under " + root);

    std::vector<dreamif::MetricReport> reports(ids.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < ids.size(); i = next.fetch_add(1)) {
            const Image fused = dreamif::load_png((fused_dir / ids[i]).string());
            const Image vis = dreamif::load_png((fs::path(root) / "vis" / ids[i]).string());
            const Image ir = dreamif::load_png((fs::path(root) / "ir" / ids[i]).string());
            reports[i] = dreamif::evaluate_pair(fused, vis, ir);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    nlohmann::json pairs = nlohmann::json::array();
    dreamif::MetricReport mean;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto j = report_json(reports[i]);
        j["id"] = ids[i];
        pairs.push_back(std::move(j));
        mean.ei += reports[i].ei;
        mean.ag += reports[i].ag;
        mean.psnr += reports[i].psnr;
        mean.qabf += reports[i].qabf;
        mean.viff += reports[i].viff;
    }
    const auto n = static_cast<double>(ids.size());
    mean.ei /= n;
    mean.ag /= n;
    mean.psnr /= n;
    mean.qabf /= n;
    mean.viff /= n;
    return {{"count", ids.size()}, {"mean", report_json(mean)}, {"pairs", std::move(pairs)}};
}

struct TrainFileConfig {
    dreamif::ModelConfig model;
    dreamif::TrainConfig train;
    std::string data, out;
};

TrainFileConfig parse_train_file(const std::string& path) {
    auto j = nlohmann::json::parse(slurp_text(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw dreamif::FormatError("train config " + path + ": malformed JSON");
    if (!j.contains("train")) throw dreamif::FormatError("train config " + path + ": missing \"train\"");
    TrainFileConfig cfg;
    cfg.train = dreamif::train_config_from_json(j.at("train").dump());
    if (j.contains("model")) cfg.model = dreamif::model_config_from_json(j.at("model").dump());
    cfg.data = j.value("data", std::string());
    cfg.out = j.value("out", std::string());
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"infrared-visible image restoration and fusion toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "write a synthetic paired toy dataset");
    int synth_n = 0, synth_size = 0;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    synth->add_option("--n", synth_n)->required();
    synth->add_option("--size", synth_size)->required();
    synth->add_option("--seed", synth_seed)->required();
    synth->add_option("--out", synth_out)->required();

    auto* degrade = app.add_subcommand("degrade", "apply one degradation to a PNG");
    std::string deg_in, deg_kind, deg_out;
    dreamif::DegradationSpec deg_spec;
    degrade->add_option("--in", deg_in)->required();
    degrade->add_option("--kind", deg_kind)
        ->required()
        ->check(CLI::IsMember({"gaussian", "poisson", "speckle", "triplet", "none"}));
    degrade->add_option("--sigma", deg_spec.sigma);
    degrade->add_option("--lam", deg_spec.lam);
    degrade->add_option("--eps", deg_spec.eps);
    degrade->add_option("--seed", deg_spec.seed)->required();
    degrade->add_option("--out", deg_out)->required();

    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    std::string train_cfg_path, train_data, train_out;
    train->add_option("--config", train_cfg_path)->required();
    train->add_option("--data", train_data);
    train->add_option("--out", train_out);

    auto* fuse = app.add_subcommand("fuse", "fuse a vis/ir pair with a trained checkpoint");
    std::string fuse_ckpt, fuse_vis, fuse_ir, fuse_out, fuse_rd_dir;
    fuse->add_option("--checkpoint", fuse_ckpt)->required();
    fuse->add_option("--vis", fuse_vis)->required();
    fuse->add_option("--ir", fuse_ir)->required();
    fuse->add_option("--out", fuse_out)->required();
    fuse->add_option("--rd-dir", fuse_rd_dir);

    auto* eval = app.add_subcommand("eval", "compute fusion quality metrics");
    std::string eval_fused, eval_vis, eval_ir, eval_dir, eval_json;
    int eval_jobs = 1;
    eval->add_option("--fused", eval_fused);
    eval->add_option("--vis", eval_vis);
    eval->add_option("--ir", eval_ir);
    eval->add_option("--dir", eval_dir);
    eval->add_option("--json", eval_json)->required();
    eval->add_option("--jobs", eval_jobs)->check(CLI::PositiveNumber);

    auto* rdmaps = app.add_subcommand("rdmaps", "export relative-dominance heatmaps");
    std::string rd_ckpt, rd_vis, rd_ir, rd_out;
    rdmaps->add_option("--checkpoint", rd_ckpt)->required();
    rdmaps->add_option("--vis", rd_vis)->required();
    rdmaps->add_option("--ir", rd_ir)->required();
    rdmaps->add_option("--out", rd_out)->required();

    auto* describe = app.add_subcommand("describe", "print a model configuration and its size");
    std::string desc_cfg, desc_ckpt;
    describe->add_option("--config", desc_cfg);
    describe->add_option("--checkpoint", desc_ckpt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "dreamif: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*synth) {
            dreamif::synth_toy_dataset(synth_n, synth_size, synth_seed, synth_out);
        } else if (*degrade) {
            deg_spec.kind = dreamif::degradation_kind_from_string(deg_kind);
            dreamif::save_png(dreamif::apply(dreamif::load_png(deg_in), deg_spec), deg_out);
        } else if (*train) {
            auto cfg = parse_train_file(train_cfg_path);
            if (!train_data.empty()) cfg.data = train_data;  // flags beat the file
            if (!train_out.empty()) cfg.out = train_out;
            if (cfg.data.empty()) {
                std::cerr << "dreamif train: no dataset (give --data or \"data\" in the config)\n";
                return 2;
            }
            if (cfg.out.empty()) cfg.out = "train_out";
            const auto data = dreamif::load_pair_dataset(cfg.data);
            dreamif::Model<float> model(cfg.model);
            const auto result = dreamif::train(model, data, cfg.train, cfg.out);
            std::cout << result.checkpoint_path << "\n";
        } else if (*fuse) {
            const auto out = run_checkpoint(fuse_ckpt, fuse_vis, fuse_ir);
            dreamif::save_png(Image::from_tensor(out.fused.value()), fuse_out);
            if (!fuse_rd_dir.empty()) write_rd_maps(out, fuse_rd_dir);
        } else if (*eval) {
            const bool single = !eval_fused.empty() || !eval_vis.empty() || !eval_ir.empty();
            if (single && !eval_dir.empty()) {
                std::cerr << "dreamif eval: --dir excludes --fused/--vis/--ir\n";
                return 2;
            }
            if (single) {
                if (eval_fused.empty() || eval_vis.empty() || eval_ir.empty()) {
                    std::cerr << "dreamif eval: need all of --fused --vis --ir\n";
                    return 2;
                }
                const auto r = dreamif::evaluate_pair(dreamif::load_png(eval_fused),
                                                      dreamif::load_png(eval_vis),
                                                      dreamif::load_png(eval_ir));
                write_text(eval_json, report_json(r).dump(2));
            } else if (!eval_dir.empty()) {
                write_text(eval_json, eval_directory(eval_dir, eval_jobs).dump(2));
            } else {
                std::cerr << "dreamif eval: give --fused/--vis/--ir or --dir\n";
                return 2;
            }
        } else if (*rdmaps) {
            write_rd_maps(run_checkpoint(rd_ckpt, rd_vis, rd_ir), rd_out);
        } else if (*describe) {
            if (desc_cfg.empty() == desc_ckpt.empty()) {
                std::cerr << "dreamif describe: give exactly one of --config or --checkpoint\n";
                return 2;
            }
            dreamif::ModelConfig cfg;
            nlohmann::json extra;
            if (!desc_ckpt.empty()) {
                const auto info = dreamif::peek_checkpoint(desc_ckpt);
                cfg = info.config;
                extra["step"] = info.step;
            } else {
                auto j = nlohmann::json::parse(slurp_text(desc_cfg), nullptr, false);
                if (j.is_discarded() || !j.is_object())
                    throw dreamif::FormatError("config " + desc_cfg + ": malformed JSON");
                // Accept a bare model config or the combined train-file form.
                const auto body = j.contains("model") ? j.at("model").dump() : j.dump();
                cfg = dreamif::model_config_from_json(body);
            }
            dreamif::Model<float> model(cfg);
            nlohmann::json out{{"config", nlohmann::json::parse(dreamif::to_json(cfg))},
                               {"param_tensors", model.params().count()},
                               {"param_scalars", model.params().total_size()}};
            for (auto& [k, v] : extra.items()) out[k] = v;
            std::cout << out.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "dreamif " << app.get_subcommands().front()->get_name() << ": " << e.what()
                  << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
