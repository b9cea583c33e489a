#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "doctest.h"
#include "dreamif/errors.hpp"
#include "dreamif/model_io.hpp"

using namespace dreamif;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int n = 0;
        path = fs::temp_directory_path() /
               ("dreamif_ckpt_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
}

ModelConfig tiny_config() {
    auto cfg = ModelConfig::toy();
    cfg.backbone.base_dim = 8;
    cfg.backbone.level_blocks = {1, 1, 1, 1};
    cfg.enhance.prompt_n = 2;
    cfg.enhance.prompt_base = 4;
    cfg.seed = 13;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
    TempDir tmp;
    Model<float> model(tiny_config());
    // shift a parameter so the file is not just the init
    auto& w = model.params().at("fuse.out.w").mutable_value();
    for (auto& v : w.v) v += 0.125f;

    save_checkpoint(tmp / "m.drif", model, 42);
    std::int64_t step = 0;
    auto loaded = load_checkpoint(tmp / "m.drif", &step);
    CHECK(step == 42);
    CHECK(loaded.params().count() == model.params().count());
    for (const auto& [name, var] : model.params()) {
        const auto& a = var.value();
        const auto& b = loaded.params().at(name).value();
        REQUIRE(a.same_shape(b));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.v[i] == b.v[i]);
    }
    const auto info = peek_checkpoint(tmp / "m.drif");
    CHECK(info.step == 42);
    CHECK(info.config.backbone.base_dim == 8);
    CHECK(info.config.seed == 13);
}

TEST_CASE("saving twice with no mutation yields identical bytes") {
    TempDir tmp;
    Model<float> model(tiny_config());
    save_checkpoint(tmp / "a.drif", model, 7);
    save_checkpoint(tmp / "b.drif", model, 7);
    CHECK(read_bytes(tmp / "a.drif") == read_bytes(tmp / "b.drif"));
}

TEST_CASE("checkpoint error taxonomy") {
    TempDir tmp;
    Model<float> model(tiny_config());
    save_checkpoint(tmp / "m.drif", model, 1);
    const std::string good = read_bytes(tmp / "m.drif");

    SUBCASE("bad magic is a format error") {
        std::string bad = good;
        bad[0] = 'X';
        write_bytes(tmp / "bad.drif", bad);
        CHECK_THROWS_AS(load_checkpoint(tmp / "bad.drif"), FormatError);
    }
    SUBCASE("unknown version is a version error") {
        std::string bad = good;
        bad[4] = 99;
        write_bytes(tmp / "bad.drif", bad);
        CHECK_THROWS_AS(load_checkpoint(tmp / "bad.drif"), VersionError);
    }
    SUBCASE("truncated payload is a corruption error") {
        write_bytes(tmp / "bad.drif", good.substr(0, good.size() - 16));
        CHECK_THROWS_AS(load_checkpoint(tmp / "bad.drif"), CorruptionError);
    }
    SUBCASE("trailing bytes are a corruption error") {
        write_bytes(tmp / "bad.drif", good + "extra");
        CHECK_THROWS_AS(load_checkpoint(tmp / "bad.drif"), CorruptionError);
    }
    SUBCASE("empty file is a format error") {
        write_bytes(tmp / "bad.drif", "");
        CHECK_THROWS_AS(load_checkpoint(tmp / "bad.drif"), FormatError);
    }
    SUBCASE("missing file is an io error") {
        CHECK_THROWS_AS(load_checkpoint(tmp / "missing.drif"), IoError);
    }
}

TEST_CASE("loading restores behavior, not just bytes") {
    TempDir tmp;
    Model<float> model(tiny_config());
    for (auto& [name, var] : model.params())
        for (auto& v : var.mutable_value().v) v *= 1.25f;
    save_checkpoint(tmp / "m.drif", model, 3);
    auto loaded = load_checkpoint(tmp / "m.drif");

    ad::NoGradGuard ng;
    auto x = ad::Var<float>::constant(Tensor<float>::full(3, 16, 16, 0.4f));
    const auto a = model.forward(x, x);
    const auto b = loaded.forward(x, x);
    for (std::size_t i = 0; i < a.fused.value().size(); ++i)
        CHECK(a.fused.value().v[i] == b.fused.value().v[i]);
}
