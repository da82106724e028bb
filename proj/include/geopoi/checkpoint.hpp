#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "geopoi/autodiff.hpp"

namespace geopoi {

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

/// Writes `<stem>.bin` (little-endian float64 arrays back to back) and
/// `<stem>.index` (one "name<TAB>shape<TAB>byte offset" line per tensor,
/// shape written as dims joined by 'x').
void save_tensors(const std::filesystem::path& stem, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& stem);

/// Returns the tensor called `name`; throws std::out_of_range if absent.
const ad::Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

/// Copies values of every tensor in `dst` from the same-named tensor in
/// `src`, checking shapes. Names missing from `src` throw.
void assign_tensors(const NamedTensors& dst, const NamedTensors& src);

}  // namespace geopoi
