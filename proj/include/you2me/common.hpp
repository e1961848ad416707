#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace you2me {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using ColMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Domain errors. Each carries its class name in the message so CLI
// diagnostics stay greppable.
#define YOU2ME_DEFINE_ERROR(Name)                                        \
    struct Name : std::runtime_error {                                   \
        explicit Name(const std::string& msg)                            \
            : std::runtime_error(std::string(#Name) + ": " + msg) {}     \
    };

YOU2ME_DEFINE_ERROR(DegenerateShoulders)
YOU2ME_DEFINE_ERROR(NonFiniteInput)
YOU2ME_DEFINE_ERROR(LayoutMismatch)
YOU2ME_DEFINE_ERROR(InsufficientCorrespondences)
YOU2ME_DEFINE_ERROR(DegenerateConfiguration)
YOU2ME_DEFINE_ERROR(NormalizationFailure)
YOU2ME_DEFINE_ERROR(DimensionMismatch)
YOU2ME_DEFINE_ERROR(TooFewPoints)
YOU2ME_DEFINE_ERROR(IndexOutOfRange)
YOU2ME_DEFINE_ERROR(ShapeMismatch)
YOU2ME_DEFINE_ERROR(EmptySequence)
YOU2ME_DEFINE_ERROR(EmptyInput)
YOU2ME_DEFINE_ERROR(MisalignedSequence)
YOU2ME_DEFINE_ERROR(ConfigMismatch)
YOU2ME_DEFINE_ERROR(ChecksumError)
YOU2ME_DEFINE_ERROR(BadMagic)
YOU2ME_DEFINE_ERROR(TruncatedFile)
YOU2ME_DEFINE_ERROR(DimOverflow)
YOU2ME_DEFINE_ERROR(MissingChannel)
YOU2ME_DEFINE_ERROR(LayoutHashMismatch)
YOU2ME_DEFINE_ERROR(MissingGroundTruth)
YOU2ME_DEFINE_ERROR(NoTaggedFrames)
YOU2ME_DEFINE_ERROR(UnknownActivityTag)
YOU2ME_DEFINE_ERROR(DivergenceDetected)
YOU2ME_DEFINE_ERROR(IoFailure)

#undef YOU2ME_DEFINE_ERROR

// Uniform double in [0,1) from the top 53 bits of a mt19937_64 draw.
// Avoids std::uniform_real_distribution so streams are portable.
template <class Rng>
inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, two independent draws per call.
template <class Rng>
inline double next_gaussian(Rng& rng) {
    double u1 = next_unit(rng);
    double u2 = next_unit(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

template <class Rng>
inline std::uint64_t next_below(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(next_unit(rng) * static_cast<double>(n)) % n;
}

// FNV-1a, used for layout hashes and checkpoint checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace you2me
