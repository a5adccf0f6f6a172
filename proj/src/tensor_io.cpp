#include "octmix/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "octmix/error.hpp"

namespace octmix::io {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'T', 'M'};

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    if (bytes.size() - pos < sizeof(T)) throw ParseError("tensor container truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i));
    }
    pos += sizeof(T);
    return std::bit_cast<T>(bits);
}

}  // namespace

std::uint64_t Tensor::element_count() const noexcept {
    std::uint64_t n = 1;
    for (std::uint64_t d : dims) n *= d;
    return n;
}

std::string encode(const Tensor& tensor) {
    if (tensor.dims.size() > 255) throw ShapeError("tensor has too many dimensions");
    if (tensor.values.size() != tensor.element_count()) throw ShapeError("tensor payload does not match dims");
    if (tensor.dtype != DType::Float32 && tensor.dtype != DType::Float64) throw ShapeError("unknown dtype");
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kTensorVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dtype));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (std::uint64_t d : tensor.dims) put_le<std::uint64_t>(out, d);
    for (double v : tensor.values) {
        if (tensor.dtype == DType::Float32) {
            put_le<float>(out, static_cast<float>(v));
        } else {
            put_le<double>(out, v);
        }
    }
    return out;
}

Tensor decode(std::string_view bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("not an OCTM tensor");
    std::size_t pos = 4;
    const auto version = get_le<std::uint32_t>(bytes, pos);
    if (version != kTensorVersion) throw ParseError("unsupported tensor version " + std::to_string(version));
    const auto code = get_le<std::uint8_t>(bytes, pos);
    if (code != 1 && code != 2) throw ParseError("unknown tensor dtype code " + std::to_string(code));
    Tensor t;
    t.dtype = static_cast<DType>(code);
    const auto ndim = get_le<std::uint8_t>(bytes, pos);
    for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get_le<std::uint64_t>(bytes, pos));
    const std::uint64_t count = t.element_count();
    const std::size_t width = t.dtype == DType::Float32 ? 4 : 8;
    const std::size_t remaining = bytes.size() - pos;
    if (count > remaining / width || count * width != remaining) {
        throw ParseError("tensor payload is " + std::to_string(remaining) + " bytes, expected " +
                         std::to_string(count * width));
    }
    t.values.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        t.values.push_back(t.dtype == DType::Float32 ? static_cast<double>(get_le<float>(bytes, pos))
                                                     : get_le<double>(bytes, pos));
    }
    return t;
}

void write_tensor(const std::filesystem::path& file, const Tensor& tensor) {
    const std::string bytes = encode(tensor);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + file.string());
}

Tensor read_tensor(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MissingFileError("cannot open " + file.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

Tensor windows_tensor(const LabeledBatch& batch) {
    batch.validate();
    Tensor t;
    t.dims = {batch.size(), batch.timesteps(), batch.channels()};
    t.values.reserve(t.element_count());
    for (const Window& w : batch.windows) t.values.insert(t.values.end(), w.data().begin(), w.data().end());
    return t;
}

Tensor labels_tensor(const LabeledBatch& batch) {
    batch.validate();
    Tensor t;
    t.dims = {batch.size(), batch.num_classes()};
    t.values.reserve(t.element_count());
    for (const SoftLabel& y : batch.labels) t.values.insert(t.values.end(), y.probs.begin(), y.probs.end());
    return t;
}

LabeledBatch batch_from_tensors(const Tensor& windows, const Tensor& labels, double sample_rate_hz) {
    if (windows.dims.size() != 3 || labels.dims.size() != 2 || windows.dims[0] != labels.dims[0]) {
        throw ShapeError("expected (n, T, C) windows and (n, K) labels");
    }
    const std::size_t n = windows.dims[0];
    const std::size_t t_len = windows.dims[1];
    const std::size_t channels = windows.dims[2];
    const std::size_t k = labels.dims[1];
    LabeledBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        const auto begin = windows.values.begin() + static_cast<std::ptrdiff_t>(i * t_len * channels);
        batch.windows.emplace_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(t_len * channels)),
                                   t_len, channels, sample_rate_hz);
        const auto lb = labels.values.begin() + static_cast<std::ptrdiff_t>(i * k);
        batch.labels.push_back(SoftLabel{std::vector<double>(lb, lb + static_cast<std::ptrdiff_t>(k))});
    }
    return batch;
}

}  // namespace octmix::io
