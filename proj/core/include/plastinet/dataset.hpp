#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plastinet/rng.hpp"
#include "plastinet/tensor.hpp"

namespace plastinet {

struct DatasetConfig {
    std::int64_t num_chunks = 5;
    std::int64_t classes_per_chunk = 4;
    std::int64_t samples_per_class = 100;
    std::int64_t channels = 3;
    std::int64_t height = 16;
    std::int64_t width = 16;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

struct Chunk {
    Tensor images;                     // [n, C, H, W]
    std::vector<std::uint32_t> labels; // global class ids
};

/// Class-incremental chunks with pairwise-disjoint label sets. Classes are
/// assigned to chunks contiguously: chunk i holds classes
/// [i*classes_per_chunk, (i+1)*classes_per_chunk).
struct ChunkedDataset {
    DatasetConfig cfg;
    std::vector<Chunk> chunks;

    std::int64_t chunk_count() const { return static_cast<std::int64_t>(chunks.size()); }
    std::int64_t num_classes() const { return cfg.num_chunks * cfg.classes_per_chunk; }
    std::int64_t samples_per_chunk() const { return cfg.classes_per_chunk * cfg.samples_per_class; }
    std::int64_t image_numel() const { return cfg.channels * cfg.height * cfg.width; }
};

/// Each class is a seeded random template image; samples are the template
/// plus gaussian noise. All pixel values are rounded through 32-bit floats at
/// creation so the on-disk f32 format round-trips bit-exactly.
ChunkedDataset gen_synthetic_chunks(const DatasetConfig& cfg);

/// Position in the chunk stream plus the RNG state batches draw from.
struct StreamCursor {
    std::int64_t chunk = 0;
    Rng rng;

    StreamCursor(std::int64_t chunk_, std::uint64_t seed) : chunk(chunk_), rng(seed) {}
};

/// Uniform draw over the union of chunks 0..cursor.chunk. Returns images
/// [batch, C, H, W] and global labels.
void cumulative_batch(const ChunkedDataset& ds, StreamCursor& cursor, std::int64_t batch_size,
                      Tensor* images, std::vector<std::int64_t>* labels);

/// Directory layout: manifest.json, chunk_<i>_images.bin (f32 LE),
/// chunk_<i>_labels.bin (u32 LE). Round trip is bit-exact.
void save_dataset(const ChunkedDataset& ds, const std::string& dir);
ChunkedDataset load_dataset(const std::string& dir);

} // namespace plastinet
