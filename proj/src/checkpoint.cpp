#include "geopoi/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi {
namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

std::string shape_token(const ad::Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

ad::Shape parse_shape_token(const std::string& token) {
  ad::Shape shape;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) shape.push_back(std::stoull(part));
  if (shape.empty()) throw std::runtime_error(fmt::format("bad shape '{}' in tensor index", token));
  return shape;
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_tensors(const std::filesystem::path& stem, const NamedTensors& tensors) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  std::ofstream index(with_suffix(stem, ".index"));
  if (!bin || !index) throw std::runtime_error(fmt::format("cannot write tensors to '{}'", stem.string()));
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (name.find_first_of("\t\n") != std::string::npos)
      throw std::invalid_argument(fmt::format("tensor name '{}' contains whitespace", name));
    index << name << '\t' << shape_token(t.shape()) << '\t' << offset << '\n';
    for (double v : t.values()) put_le(bin, v);
    offset += t.size() * 8;
  }
  if (!bin || !index) throw std::runtime_error(fmt::format("failed writing tensors to '{}'", stem.string()));
}

NamedTensors load_tensors(const std::filesystem::path& stem) {
  std::ifstream index(with_suffix(stem, ".index"));
  std::ifstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!index || !bin) throw std::runtime_error(fmt::format("cannot read tensors from '{}'", stem.string()));
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  NamedTensors out;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, shape_tok, offset_tok;
    if (!std::getline(ss, name, '\t') || !std::getline(ss, shape_tok, '\t') || !std::getline(ss, offset_tok))
      throw std::runtime_error(fmt::format("malformed tensor index line '{}'", line));
    auto shape = parse_shape_token(shape_tok);
    const auto offset = std::stoull(offset_tok);
    const auto n = ad::shape_size(shape);
    if (offset + n * 8 > blob.size())
      throw std::runtime_error(fmt::format("tensor '{}' extends past the end of the blob", name));
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get_le(blob.data() + offset + i * 8);
    out.emplace_back(name, ad::Tensor::from(std::move(shape), std::move(values)));
  }
  return out;
}

const ad::Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
  auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& p) { return p.first == name; });
  if (it == tensors.end()) throw std::out_of_range(fmt::format("no tensor named '{}'", name));
  return it->second;
}

void assign_tensors(const NamedTensors& dst, const NamedTensors& src) {
  for (const auto& [name, t] : dst) {
    const auto& from = find_tensor(src, name);
    if (from.shape() != t.shape())
      throw std::invalid_argument(fmt::format("tensor '{}': stored shape {} but expected {}", name,
                                              ad::shape_string(from.shape()), ad::shape_string(t.shape())));
    ad::Tensor target = t;
    std::copy(from.values().begin(), from.values().end(), target.mutable_values().begin());
  }
}

}  // namespace geopoi
