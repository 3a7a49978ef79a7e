#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fmn/tensor.hpp"

namespace fmn {

struct Sample {
  Tensor x;
  std::size_t label = 0;
};

struct Dataset {
  std::size_t input_dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

// CSV with header `label,f0,...,f{d-1}`; features must lie in [0,1].
// Lines starting with '#' are comments.
Dataset dataset_from_csv_text(const std::string& text);
std::string dataset_to_csv_text(const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`; "inf" for +infinity.
std::string format_double(double v);

}  // namespace fmn
