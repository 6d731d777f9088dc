#include "plastinet/checkpoint.hpp"

#include <filesystem>

#include "json_util.hpp"
#include "plastinet/error.hpp"
#include "plastinet/tensor_io.hpp"

namespace plastinet {

namespace fs = std::filesystem;

void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& dir) {
    fs::create_directories(dir);
    jsonu::json manifest;
    manifest["format"] = "plastinet-checkpoint";
    manifest["version"] = 1;
    jsonu::json mj;
    mj["kind"] = meta.kind;
    mj["variant"] = meta.variant;
    mj["global_step"] = meta.global_step;
    mj["episode_count"] = meta.episode_count;
    mj["experts_per_site"] = meta.experts_per_site;
    mj["d"] = meta.d;
    mj["expert_h"] = meta.expert_h;
    manifest["meta"] = mj;

    jsonu::json entries = jsonu::json::array();
    std::vector<double> blob;
    for (const auto& e : params.entries()) {
        jsonu::json ej;
        ej["name"] = e.name;
        ej["shape"] = e.tensor.shape();
        ej["kind"] = param_kind_str(e.kind);
        ej["requires_grad"] = e.tensor.requires_grad();
        ej["adam_t"] = e.adam.t;
        entries.push_back(ej);
        blob.insert(blob.end(), e.tensor.data().begin(), e.tensor.data().end());
        blob.insert(blob.end(), e.adam.m.begin(), e.adam.m.end());
        blob.insert(blob.end(), e.adam.v.begin(), e.adam.v.end());
    }
    manifest["entries"] = entries;
    manifest["blob"] = "params.bin";
    manifest["blob_count"] = static_cast<std::int64_t>(blob.size());

    write_f64_blob((fs::path(dir) / "params.bin").string(), blob);
    jsonu::save_file((fs::path(dir) / "manifest.json").string(), manifest);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    const jsonu::json manifest = jsonu::load_file(mpath);
    jsonu::check_fields(manifest, mpath,
                        {"format", "version", "meta", "entries", "blob", "blob_count"});
    if (jsonu::get_as<std::string>(manifest, "format", mpath) != "plastinet-checkpoint") {
        throw IoError(mpath + ": not a checkpoint manifest");
    }

    LoadedCheckpoint out;
    const auto& mj = jsonu::require(manifest, "meta", mpath);
    jsonu::check_fields(mj, mpath + " meta",
                        {"kind", "variant", "global_step", "episode_count", "experts_per_site",
                         "d", "expert_h"});
    out.meta.kind = jsonu::get_as<std::string>(mj, "kind", mpath);
    out.meta.variant = jsonu::get_as<std::string>(mj, "variant", mpath);
    out.meta.global_step = jsonu::get_as<std::int64_t>(mj, "global_step", mpath);
    out.meta.episode_count = jsonu::get_as<std::int64_t>(mj, "episode_count", mpath);
    out.meta.experts_per_site = jsonu::get_as<std::vector<std::int64_t>>(mj, "experts_per_site", mpath);
    out.meta.d = jsonu::get_as<std::int64_t>(mj, "d", mpath);
    out.meta.expert_h = jsonu::get_as<std::int64_t>(mj, "expert_h", mpath);

    const auto& entries = jsonu::require(manifest, "entries", mpath);
    if (!entries.is_array()) throw IoError(mpath + ": 'entries' must be an array");
    const std::int64_t blob_count = jsonu::get_as<std::int64_t>(manifest, "blob_count", mpath);
    const std::string blob_path =
        (fs::path(dir) / jsonu::get_as<std::string>(manifest, "blob", mpath)).string();
    const std::vector<double> blob = read_f64_blob(blob_path, blob_count);

    std::int64_t off = 0;
    for (const auto& ej : entries) {
        jsonu::check_fields(ej, mpath + " entries[]",
                            {"name", "shape", "kind", "requires_grad", "adam_t"});
        LoadedCheckpoint::Entry e;
        e.name = jsonu::get_as<std::string>(ej, "name", mpath);
        e.shape = jsonu::get_as<Shape>(ej, "shape", mpath);
        e.kind = param_kind_from_str(jsonu::get_as<std::string>(ej, "kind", mpath));
        e.requires_grad = jsonu::get_as<bool>(ej, "requires_grad", mpath);
        e.adam_t = jsonu::get_as<std::int64_t>(ej, "adam_t", mpath);
        const std::int64_t n = shape_numel(e.shape);
        if (off + 3 * n > blob_count) {
            throw IoError(blob_path + ": blob too short for entry '" + e.name + "'",
                          static_cast<long long>(off * 8));
        }
        e.value.assign(blob.begin() + off, blob.begin() + off + n);
        e.m.assign(blob.begin() + off + n, blob.begin() + off + 2 * n);
        e.v.assign(blob.begin() + off + 2 * n, blob.begin() + off + 3 * n);
        off += 3 * n;
        out.entries.push_back(std::move(e));
    }
    if (off != blob_count) {
        throw IoError(blob_path + ": blob has " + std::to_string(blob_count) +
                          " values, entries consume " + std::to_string(off),
                      static_cast<long long>(off * 8));
    }
    return out;
}

void apply_checkpoint(ParamStore& params, const LoadedCheckpoint& ckpt) {
    if (ckpt.entries.size() != params.size()) {
        throw ConfigError("checkpoint: holds " + std::to_string(ckpt.entries.size()) +
                          " parameters, model has " + std::to_string(params.size()));
    }
    for (const auto& e : ckpt.entries) {
        if (!params.contains(e.name)) {
            throw ConfigError("checkpoint: model has no parameter '" + e.name + "'");
        }
        ParamEntry& dst = params.entry(e.name);
        if (dst.tensor.shape() != e.shape) {
            throw ConfigError("checkpoint: shape mismatch for '" + e.name + "': checkpoint " +
                              shape_str(e.shape) + ", model " + shape_str(dst.tensor.shape()));
        }
        dst.tensor.data() = e.value;
        dst.tensor.set_requires_grad(e.requires_grad);
        dst.tensor.drop_grad();
        dst.kind = e.kind;
        dst.adam.m = e.m;
        dst.adam.v = e.v;
        dst.adam.t = e.adam_t;
    }
}

} // namespace plastinet
