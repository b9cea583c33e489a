#include "dreamif/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <vector>

#include <unistd.h>

#include "dreamif/errors.hpp"
#include "json_detail.hpp"

namespace dreamif {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");
static_assert(sizeof(float) == 4);

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

nlohmann::json build_manifest(const Model<float>& model, std::int64_t step) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& [name, var] : model.params()) {
        const auto& t = var.value();
        params.push_back({{"name", name}, {"shape", {t.c, t.h, t.w}}});
    }
    // nlohmann objects iterate keys alphabetically, so dump() is canonical.
    return {{"config", detail::model_config_to_json(model.config())},
            {"step", step},
            {"params", std::move(params)}};
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Model<float>& model, std::int64_t step) {
    const std::string manifest = build_manifest(model, step).dump();

    std::vector<unsigned char> header;
    header.reserve(9 + manifest.size());
    header.insert(header.end(), kCheckpointMagic, kCheckpointMagic + 4);
    header.push_back(kCheckpointVersion);
    append_u32(header, static_cast<std::uint32_t>(manifest.size()));
    header.insert(header.end(), manifest.begin(), manifest.end());

    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw IoError("save_checkpoint: cannot create " + target.parent_path().string());
    }
    const std::string tmp = path + ".tmp";
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("save_checkpoint: cannot open " + tmp);
    bool ok = std::fwrite(header.data(), 1, header.size(), f.get()) == header.size();
    for (const auto& [name, var] : model.params()) {
        const auto& t = var.value();
        ok = ok && std::fwrite(t.data(), sizeof(float), t.size(), f.get()) == t.size();
    }
    ok = ok && std::fflush(f.get()) == 0;
    ok = ok && fsync(fileno(f.get())) == 0;
    f.reset();
    if (!ok || std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("save_checkpoint: write failed for " + path);
    }
}

namespace {

struct ParsedHeader {
    nlohmann::json manifest;
    std::size_t payload_offset = 0;  // first byte past the manifest
};

// Validates magic/version and parses the manifest from an in-memory file.
ParsedHeader parse_header(const std::vector<unsigned char>& buf, const std::string& path) {
    if (buf.size() < 9 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
        throw FormatError("checkpoint: " + path + " is not a checkpoint file");
    if (buf[4] != kCheckpointVersion)
        throw VersionError("checkpoint: " + path + " has unsupported version " +
                           std::to_string(static_cast<int>(buf[4])));
    const std::size_t mlen = read_u32(buf.data() + 5);
    if (buf.size() < 9 + mlen)
        throw CorruptionError("checkpoint: " + path + " is truncated in the manifest");
    ParsedHeader h;
    h.manifest = nlohmann::json::parse(buf.begin() + 9, buf.begin() + 9 + mlen, nullptr, false);
    if (h.manifest.is_discarded())
        throw CorruptionError("checkpoint: " + path + " has an unparsable manifest");
    h.payload_offset = 9 + mlen;
    return h;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("checkpoint: read failed for " + path);
    return buf;
}

}  // namespace

CheckpointInfo peek_checkpoint(const std::string& path) {
    const auto buf = slurp(path);
    const auto h = parse_header(buf, path);
    try {
        return {detail::model_config_from_json(h.manifest.at("config")),
                h.manifest.at("step").get<std::int64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("checkpoint: " + path + " manifest is incomplete: " + e.what());
    }
}

Model<float> load_checkpoint(const std::string& path, std::int64_t* step) {
    const auto buf = slurp(path);
    const auto h = parse_header(buf, path);

    ModelConfig cfg;
    std::int64_t stored_step = 0;
    nlohmann::json plist;
    try {
        cfg = detail::model_config_from_json(h.manifest.at("config"));
        stored_step = h.manifest.at("step").get<std::int64_t>();
        plist = h.manifest.at("params");
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("checkpoint: " + path + " manifest is incomplete: " + e.what());
    }
    if (!plist.is_array())
        throw CorruptionError("checkpoint: " + path + " param list is not an array");

    Model<float> model(cfg);
    auto& ps = model.params();
    std::set<std::string> seen;
    std::size_t off = h.payload_offset;
    for (const auto& entry : plist) {
        std::string name;
        int c = 0, ht = 0, wt = 0;
        try {
            name = entry.at("name").get<std::string>();
            const auto& shape = entry.at("shape");
            c = shape.at(0).get<int>();
            ht = shape.at(1).get<int>();
            wt = shape.at(2).get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw CorruptionError("checkpoint: " + path + " has a malformed param entry: " +
                                  e.what());
        }
        if (!seen.insert(name).second)
            throw CorruptionError("checkpoint: " + path + " lists " + name + " twice");
        if (!ps.contains(name))
            throw CorruptionError("checkpoint: " + path + " has unknown parameter " + name);
        auto& t = ps.at(name).mutable_value();
        if (t.c != c || t.h != ht || t.w != wt)
            throw CorruptionError("checkpoint: " + path + " shape mismatch for " + name);
        const std::size_t bytes = t.size() * sizeof(float);
        if (off + bytes > buf.size())
            throw CorruptionError("checkpoint: " + path + " is truncated in the payload");
        std::memcpy(t.data(), buf.data() + off, bytes);
        off += bytes;
    }
    if (seen.size() != ps.count())
        throw CorruptionError("checkpoint: " + path + " is missing parameters");
    if (off != buf.size())
        throw CorruptionError("checkpoint: " + path + " has trailing bytes");
    if (step) *step = stored_step;
    return model;
}

}  // namespace dreamif
