#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "octmix/window.hpp"

namespace octmix::io {

/// Binary layout: "OCTM", u32 version, u8 dtype, u8 ndim, ndim x u64 dims,
/// row-major payload. All integers and floats little-endian.
inline constexpr std::uint32_t kTensorVersion = 1;

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

struct Tensor {
    DType dtype = DType::Float64;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;  // float32 tensors are widened on read

    std::uint64_t element_count() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string encode(const Tensor& tensor);
/// Throws ParseError on bad magic, unknown version/dtype, short or trailing payload.
Tensor decode(std::string_view bytes);

void write_tensor(const std::filesystem::path& file, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& file);

/// (n, T, C) float64 tensor of the batch windows.
Tensor windows_tensor(const LabeledBatch& batch);
/// (n, K) float64 tensor of the batch labels.
Tensor labels_tensor(const LabeledBatch& batch);
LabeledBatch batch_from_tensors(const Tensor& windows, const Tensor& labels, double sample_rate_hz);

}  // namespace octmix::io
