#pragma once

#include "enhope/embedding.hpp"
#include "enhope/exemplars.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace enhope {

/// Everything needed to embed and classify new data.
///
/// Binary layout (little-endian throughout):
///
///   "ENHP"                         4 bytes
///   version                        u32 (= kModelFormatVersion)
///   variant                        u32 (0 high-order, 1 linear)
///   H h F m O z c                  7 x u32 (F = m = O = 0 for linear)
///   normalization mode             u32
///   offsets[H] scales[H]           f64
///   parameters                     f64 x param_count: C, W, b, V row-major, or A
///   exemplars[z*H]                 f64 row-major
///   exemplar labels[z]             u32
///   seed                           u64
///   epochs run, selected epoch     u32, u32
///   final validation error         f64
///   exemplar mode                  u32
///   class names                    c x (u32 length, bytes)
struct ModelFile {
    EmbeddingModel model;
    ExemplarSet exemplars;
    int class_count = 2;
    std::vector<std::string> class_names;

    std::uint64_t seed = 0;
    std::uint32_t epochs = 0;
    std::uint32_t selected_epoch = 0;
    double final_val_error = 0.0;
    ExemplarMode exemplar_mode = ExemplarMode::none;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const ModelFile& file);
ModelFile decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

} // namespace enhope
