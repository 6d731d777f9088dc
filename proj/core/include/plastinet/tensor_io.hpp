#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plastinet {

/// Raw binary blobs, little-endian. f32 is the dataset format; f64 backs
/// checkpoints, which must round-trip parameters bit-exactly; u32 holds
/// labels. Readers validate exact byte length and report the mismatch offset.

void write_f32_blob(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f32_blob(const std::string& path, std::int64_t expected_count);

void write_f64_blob(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f64_blob(const std::string& path, std::int64_t expected_count);

void write_u32_blob(const std::string& path, const std::vector<std::uint32_t>& values);
std::vector<std::uint32_t> read_u32_blob(const std::string& path, std::int64_t expected_count);

} // namespace plastinet
