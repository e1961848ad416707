#include "you2me/blob.hpp"

#include <cstring>
#include <fstream>

namespace you2me {

namespace {
constexpr char kMagic[4] = {'Y', '2', 'M', 'E'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;
// Caps the payload at 16 GiB worth of floats.
constexpr std::uint64_t kMaxElements = (1ull << 34) / sizeof(float);
}  // namespace

void write_blob(const std::filesystem::path& path, const MatX<float>& m) {
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    if (cols != 0 && rows > kMaxElements / std::max<std::uint64_t>(cols, 1))
        throw DimOverflow("matrix too large for blob format");

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoFailure("cannot open " + tmp.string() + " for writing");
        f.write(kMagic, 4);
        const std::uint32_t version = kBlobVersion;
        f.write(reinterpret_cast<const char*>(&version), 4);
        f.write(reinterpret_cast<const char*>(&rows), 8);
        f.write(reinterpret_cast<const char*>(&cols), 8);
        if (rows * cols > 0)
            f.write(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::streamsize>(rows * cols * sizeof(float)));
        if (!f) throw IoFailure("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoFailure("rename to " + path.string() + " failed: " + ec.message());
}

MatX<float> read_blob(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open " + path.string());
    char header[kHeaderBytes];
    f.read(header, kHeaderBytes);
    if (f.gcount() != static_cast<std::streamsize>(kHeaderBytes))
        throw TruncatedFile("header shorter than 24 bytes in " + path.string());
    if (std::memcmp(header, kMagic, 4) != 0) throw BadMagic("bad magic in " + path.string());
    std::uint32_t version;
    std::uint64_t rows, cols;
    std::memcpy(&version, header + 4, 4);
    std::memcpy(&rows, header + 8, 8);
    std::memcpy(&cols, header + 16, 8);
    if (version != kBlobVersion)
        throw BadMagic("unsupported blob version " + std::to_string(version));
    if (cols != 0 && rows > kMaxElements / cols)
        throw DimOverflow("blob header dimensions overflow");

    MatX<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const std::uint64_t bytes = rows * cols * sizeof(float);
    if (bytes > 0) {
        f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
        if (f.gcount() != static_cast<std::streamsize>(bytes))
            throw TruncatedFile("payload shorter than header promises in " + path.string());
    }
    return m;
}

}  // namespace you2me
