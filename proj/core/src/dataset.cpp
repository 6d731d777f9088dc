#include "plastinet/dataset.hpp"

#include <filesystem>

#include "json_util.hpp"
#include "plastinet/error.hpp"
#include "plastinet/tensor_io.hpp"

namespace plastinet {

namespace fs = std::filesystem;

ChunkedDataset gen_synthetic_chunks(const DatasetConfig& cfg) {
    if (cfg.num_chunks < 1 || cfg.classes_per_chunk < 1 || cfg.samples_per_class < 1 ||
        cfg.channels < 1 || cfg.height < 1 || cfg.width < 1 || cfg.noise_sigma < 0.0) {
        throw ConfigError("gen_synthetic_chunks: all dimensions must be positive");
    }
    ChunkedDataset ds;
    ds.cfg = cfg;
    Rng rng(cfg.seed);
    const std::int64_t pix = cfg.channels * cfg.height * cfg.width;
    for (std::int64_t c = 0; c < cfg.num_chunks; ++c) {
        Chunk chunk;
        const std::int64_t n = cfg.classes_per_chunk * cfg.samples_per_class;
        chunk.images = Tensor::zeros({n, cfg.channels, cfg.height, cfg.width});
        chunk.labels.reserve(static_cast<std::size_t>(n));
        auto& img = chunk.images.data();
        std::int64_t sample = 0;
        for (std::int64_t k = 0; k < cfg.classes_per_chunk; ++k) {
            const std::uint32_t label = static_cast<std::uint32_t>(c * cfg.classes_per_chunk + k);
            std::vector<double> tmpl(static_cast<std::size_t>(pix));
            for (auto& v : tmpl) v = static_cast<float>(rng.normal(0.0, 1.0));
            for (std::int64_t s = 0; s < cfg.samples_per_class; ++s) {
                double* dst = img.data() + sample * pix;
                for (std::int64_t i = 0; i < pix; ++i) {
                    // Rounding through f32 here keeps save/load bit-exact.
                    dst[i] = static_cast<float>(tmpl[static_cast<std::size_t>(i)] +
                                                rng.normal(0.0, cfg.noise_sigma));
                }
                chunk.labels.push_back(label);
                ++sample;
            }
        }
        ds.chunks.push_back(std::move(chunk));
    }
    return ds;
}

void cumulative_batch(const ChunkedDataset& ds, StreamCursor& cursor, std::int64_t batch_size,
                      Tensor* images, std::vector<std::int64_t>* labels) {
    if (batch_size < 1) throw ConfigError("cumulative_batch: batch size must be >= 1");
    if (cursor.chunk < 0 || cursor.chunk >= ds.chunk_count()) {
        throw ConfigError("cumulative_batch: cursor chunk " + std::to_string(cursor.chunk) +
                          " out of range");
    }
    const std::int64_t per_chunk = ds.samples_per_chunk();
    const std::int64_t total = (cursor.chunk + 1) * per_chunk;
    const std::int64_t pix = ds.image_numel();

    *images = Tensor::zeros({batch_size, ds.cfg.channels, ds.cfg.height, ds.cfg.width});
    labels->clear();
    labels->reserve(static_cast<std::size_t>(batch_size));
    auto& out = images->data();
    for (std::int64_t b = 0; b < batch_size; ++b) {
        const std::int64_t idx = cursor.rng.uniform_int(0, total);
        const std::int64_t ci = idx / per_chunk;
        const std::int64_t si = idx % per_chunk;
        const auto& chunk = ds.chunks[static_cast<std::size_t>(ci)];
        const double* src = chunk.images.data().data() + si * pix;
        std::copy(src, src + pix, out.data() + b * pix);
        labels->push_back(static_cast<std::int64_t>(chunk.labels[static_cast<std::size_t>(si)]));
    }
}

void save_dataset(const ChunkedDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    jsonu::json manifest;
    manifest["format"] = "plastinet-dataset";
    manifest["version"] = 1;
    manifest["num_chunks"] = ds.cfg.num_chunks;
    manifest["classes_per_chunk"] = ds.cfg.classes_per_chunk;
    manifest["samples_per_class"] = ds.cfg.samples_per_class;
    manifest["channels"] = ds.cfg.channels;
    manifest["height"] = ds.cfg.height;
    manifest["width"] = ds.cfg.width;
    manifest["noise_sigma"] = ds.cfg.noise_sigma;
    manifest["seed"] = ds.cfg.seed;
    jsonu::json chunks = jsonu::json::array();
    for (std::int64_t i = 0; i < ds.chunk_count(); ++i) {
        const auto& chunk = ds.chunks[static_cast<std::size_t>(i)];
        const std::string img_name = "chunk_" + std::to_string(i) + "_images.bin";
        const std::string lbl_name = "chunk_" + std::to_string(i) + "_labels.bin";
        write_f32_blob((fs::path(dir) / img_name).string(), chunk.images.data());
        write_u32_blob((fs::path(dir) / lbl_name).string(), chunk.labels);
        jsonu::json cj;
        cj["images"] = img_name;
        cj["labels"] = lbl_name;
        cj["samples"] = chunk.images.dim(0);
        cj["class_lo"] = i * ds.cfg.classes_per_chunk;
        cj["class_hi"] = (i + 1) * ds.cfg.classes_per_chunk;
        chunks.push_back(cj);
    }
    manifest["chunks"] = chunks;
    jsonu::save_file((fs::path(dir) / "manifest.json").string(), manifest);
}

ChunkedDataset load_dataset(const std::string& dir) {
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    const jsonu::json manifest = jsonu::load_file(mpath);
    jsonu::check_fields(manifest, mpath,
                        {"format", "version", "num_chunks", "classes_per_chunk",
                         "samples_per_class", "channels", "height", "width", "noise_sigma",
                         "seed", "chunks"});
    if (jsonu::get_as<std::string>(manifest, "format", mpath) != "plastinet-dataset") {
        throw IoError(mpath + ": not a dataset manifest");
    }
    ChunkedDataset ds;
    ds.cfg.num_chunks = jsonu::get_as<std::int64_t>(manifest, "num_chunks", mpath);
    ds.cfg.classes_per_chunk = jsonu::get_as<std::int64_t>(manifest, "classes_per_chunk", mpath);
    ds.cfg.samples_per_class = jsonu::get_as<std::int64_t>(manifest, "samples_per_class", mpath);
    ds.cfg.channels = jsonu::get_as<std::int64_t>(manifest, "channels", mpath);
    ds.cfg.height = jsonu::get_as<std::int64_t>(manifest, "height", mpath);
    ds.cfg.width = jsonu::get_as<std::int64_t>(manifest, "width", mpath);
    ds.cfg.noise_sigma = jsonu::get_as<double>(manifest, "noise_sigma", mpath);
    ds.cfg.seed = jsonu::get_as<std::uint64_t>(manifest, "seed", mpath);

    const auto& chunks = jsonu::require(manifest, "chunks", mpath);
    if (!chunks.is_array() ||
        static_cast<std::int64_t>(chunks.size()) != ds.cfg.num_chunks) {
        throw IoError(mpath + ": 'chunks' must list exactly num_chunks entries");
    }
    const std::int64_t pix = ds.image_numel();
    for (std::int64_t i = 0; i < ds.cfg.num_chunks; ++i) {
        const auto& cj = chunks[static_cast<std::size_t>(i)];
        jsonu::check_fields(cj, mpath + " chunks[" + std::to_string(i) + "]",
                            {"images", "labels", "samples", "class_lo", "class_hi"});
        const std::string ctx = mpath + " chunks[" + std::to_string(i) + "]";
        const std::int64_t samples = jsonu::get_as<std::int64_t>(cj, "samples", ctx);
        const std::int64_t class_lo = jsonu::get_as<std::int64_t>(cj, "class_lo", ctx);
        const std::int64_t class_hi = jsonu::get_as<std::int64_t>(cj, "class_hi", ctx);
        if (samples != ds.samples_per_chunk()) {
            throw IoError(ctx + ": sample count " + std::to_string(samples) +
                          " does not match manifest dimensions");
        }
        if (class_lo != i * ds.cfg.classes_per_chunk ||
            class_hi != (i + 1) * ds.cfg.classes_per_chunk) {
            throw IoError(ctx + ": class range [" + std::to_string(class_lo) + "," +
                          std::to_string(class_hi) + ") does not match contiguous assignment");
        }
        Chunk chunk;
        const std::string img_path =
            (fs::path(dir) / jsonu::get_as<std::string>(cj, "images", ctx)).string();
        const std::string lbl_path =
            (fs::path(dir) / jsonu::get_as<std::string>(cj, "labels", ctx)).string();
        chunk.images = Tensor::from_data({samples, ds.cfg.channels, ds.cfg.height, ds.cfg.width},
                                         read_f32_blob(img_path, samples * pix));
        chunk.labels = read_u32_blob(lbl_path, samples);
        for (std::size_t s = 0; s < chunk.labels.size(); ++s) {
            const std::int64_t label = chunk.labels[s];
            if (label < class_lo || label >= class_hi) {
                throw IoError(lbl_path + ": label " + std::to_string(label) + " at sample " +
                              std::to_string(s) + " outside manifest class range");
            }
        }
        ds.chunks.push_back(std::move(chunk));
    }
    return ds;
}

} // namespace plastinet
