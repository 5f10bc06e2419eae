#include "vbones/container.hpp"

#include "vbones/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace vbones {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

const NamedArray* Container::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const NamedArray& Container::at(std::string_view name) const {
  const auto* a = find(name);
  require(a != nullptr, ErrorKind::Io, "container has no array named " + std::string(name));
  return *a;
}

namespace {

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& container,
                     std::string_view magic) {
  require(magic.size() == 8, ErrorKind::Internal, "container magic must be 8 bytes");
  nlohmann::json header;
  header["meta"] = container.meta;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : container.arrays) {
    require(element_count(a.shape) == static_cast<std::int64_t>(a.data.size()),
            ErrorKind::Internal, "array " + a.name + " shape does not match its data");
    header["arrays"].push_back({{"name", a.name},
                                {"shape", a.shape},
                                {"dtype", "float64"},
                                {"offset", offset},
                                {"count", a.data.size()}});
    offset += a.data.size() * sizeof(double);
  }
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();
  const std::size_t pad = (8 - (16 + text.size()) % 8) % 8;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(magic.data(), 8);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const char zeros[8] = {};
  out.write(zeros, static_cast<std::streamsize>(pad));
  for (const auto& a : container.arrays) {
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  require(out.good(), ErrorKind::Io, "failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  char got[8] = {};
  in.read(got, 8);
  require(in.good() && std::string_view(got, 8) == magic, ErrorKind::Io,
          path.string() + " is not a " + std::string(magic) + " container");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  require(in.good() && header_len < (1ull << 30), ErrorKind::Io, "corrupt container header");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  require(in.good(), ErrorKind::Io, "truncated container header");
  const std::size_t pad = (8 - (16 + header_len) % 8) % 8;
  in.seekg(static_cast<std::streamoff>(pad), std::ios::cur);
  const auto payload_start = in.tellg();

  Container c;
  try {
    const auto header = nlohmann::json::parse(text);
    c.meta = header.at("meta");
    for (const auto& entry : header.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      require(entry.at("dtype") == "float64", ErrorKind::Io, "unsupported dtype");
      const auto count = entry.at("count").get<std::uint64_t>();
      require(static_cast<std::int64_t>(count) == element_count(a.shape), ErrorKind::Io,
              "array " + a.name + " count does not match its shape");
      a.data.resize(count);
      in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(a.data.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
      require(in.good(), ErrorKind::Io, "truncated array " + a.name);
      c.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("corrupt container header: ") + e.what());
  }
  return c;
}

}  // namespace vbones
