#include "plastinet/tensor_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "plastinet/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian; big-endian hosts are not supported");

namespace plastinet {

namespace {

struct File {
    FILE* f = nullptr;
    explicit File(FILE* f_) : f(f_) {}
    ~File() {
        if (f) std::fclose(f);
    }
};

void write_bytes(const std::string& path, const void* data, std::size_t bytes) {
    File file(std::fopen(path.c_str(), "wb"));
    if (!file.f) throw IoError("blob: cannot open '" + path + "' for writing");
    if (bytes && std::fwrite(data, 1, bytes, file.f) != bytes) {
        throw IoError("blob: short write to '" + path + "'");
    }
}

std::vector<char> read_bytes(const std::string& path, std::int64_t expected_bytes) {
    std::error_code ec;
    const auto actual = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("blob: cannot stat '" + path + "': " + ec.message());
    if (static_cast<std::int64_t>(actual) != expected_bytes) {
        throw IoError("blob: '" + path + "' has " + std::to_string(actual) +
                          " bytes, expected " + std::to_string(expected_bytes),
                      static_cast<long long>(std::min<std::int64_t>(
                          static_cast<std::int64_t>(actual), expected_bytes)));
    }
    File file(std::fopen(path.c_str(), "rb"));
    if (!file.f) throw IoError("blob: cannot open '" + path + "'");
    std::vector<char> buf(static_cast<std::size_t>(expected_bytes));
    if (expected_bytes &&
        std::fread(buf.data(), 1, buf.size(), file.f) != buf.size()) {
        throw IoError("blob: short read from '" + path + "'");
    }
    return buf;
}

} // namespace

void write_f32_blob(const std::string& path, const std::vector<double>& values) {
    std::vector<float> f(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    write_bytes(path, f.data(), f.size() * sizeof(float));
}

std::vector<double> read_f32_blob(const std::string& path, std::int64_t expected_count) {
    const auto buf = read_bytes(path, expected_count * 4);
    std::vector<double> out(static_cast<std::size_t>(expected_count));
    const float* f = reinterpret_cast<const float*>(buf.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(f[i]);
    return out;
}

void write_f64_blob(const std::string& path, const std::vector<double>& values) {
    write_bytes(path, values.data(), values.size() * sizeof(double));
}

std::vector<double> read_f64_blob(const std::string& path, std::int64_t expected_count) {
    const auto buf = read_bytes(path, expected_count * 8);
    std::vector<double> out(static_cast<std::size_t>(expected_count));
    std::memcpy(out.data(), buf.data(), buf.size());
    return out;
}

void write_u32_blob(const std::string& path, const std::vector<std::uint32_t>& values) {
    write_bytes(path, values.data(), values.size() * sizeof(std::uint32_t));
}

std::vector<std::uint32_t> read_u32_blob(const std::string& path, std::int64_t expected_count) {
    const auto buf = read_bytes(path, expected_count * 4);
    std::vector<std::uint32_t> out(static_cast<std::size_t>(expected_count));
    std::memcpy(out.data(), buf.data(), buf.size());
    return out;
}

} // namespace plastinet
