#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "logitforge/matrix.hpp"

namespace logitforge {

struct Dataset {
  Matrix features;          // N x D, values in [0, 1]
  std::vector<int> labels;  // N, in [0, class_count)
  int class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
};

// IDX pair: images (magic 0x00000803, dims count/rows/cols, u8 pixels) and
// labels (magic 0x00000801, dim count, u8). Big-endian headers. Pixels are
// scaled by 1/255; class_count is max label + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Writes an IDX pair; features are mapped back to bytes with round(255 v).
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels);

// One isotropic Gaussian blob per class around the simplex vertex e_c of
// R^D (requires D >= C), clamped to [0, 1]. Samples are interleaved by class.
Dataset gen_synthetic(int class_count, std::size_t per_class, std::size_t dim, double spread,
                      std::uint64_t seed);

// "label,f_1,...,f_D" per line, no header, shortest round-trip decimals.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

}  // namespace logitforge
