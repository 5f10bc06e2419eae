#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vbones {

// Binary container of named float64 arrays plus a JSON metadata block.
//
// Layout (all integers little-endian):
//   bytes 0..7    magic, e.g. "VBPOSE01" or "VBCKPT01"
//   bytes 8..15   uint64 header length H
//   bytes 16..    H bytes of UTF-8 JSON:
//                   {"meta": {...},
//                    "arrays": [{"name", "shape", "dtype": "float64",
//                                "offset", "count"}, ...]}
//   padding       zero bytes up to the next multiple of 8
//   payload       arrays back to back in header order, row-major float64;
//                 "offset" is in bytes from the start of the payload
struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;
  const NamedArray& at(std::string_view name) const;
};

inline constexpr std::string_view kPoseMagic = "VBPOSE01";
inline constexpr std::string_view kCheckpointMagic = "VBCKPT01";

void write_container(const std::filesystem::path& path, const Container& container,
                     std::string_view magic);
Container read_container(const std::filesystem::path& path, std::string_view magic);

}  // namespace vbones
