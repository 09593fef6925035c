// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "aep/errors.hpp"

namespace aep {
namespace {

constexpr char kMagic[8] = {'A', 'E', 'P', 'A', 'R', 'C', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

void Archive::add(std::string name, std::vector<std::size_t> dims, std::vector<double> values) {
  if (product(dims) != values.size()) {
    throw std::invalid_argument(fmt::format("array '{}': dims do not match {} values", name,
                                            values.size()));
  }
  if (find(name) != nullptr) throw std::invalid_argument(fmt::format("duplicate array '{}'", name));
  ArchiveArray a;
  a.name = std::move(name);
  a.dims = std::move(dims);
  a.f64 = std::move(values);
  arrays_.push_back(std::move(a));
}

void Archive::add_ints(std::string name, std::vector<std::size_t> dims,
                       std::vector<std::int64_t> values) {
  if (product(dims) != values.size()) {
    throw std::invalid_argument(fmt::format("array '{}': dims do not match {} values", name,
                                            values.size()));
  }
  if (find(name) != nullptr) throw std::invalid_argument(fmt::format("duplicate array '{}'", name));
  ArchiveArray a;
  a.name = std::move(name);
  a.dims = std::move(dims);
  a.i64 = std::move(values);
  a.is_int = true;
  arrays_.push_back(std::move(a));
}

const ArchiveArray* Archive::find(std::string_view name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const ArchiveArray& Archive::get(std::string_view name) const {
  if (const auto* a = find(name)) return *a;
  throw NotFoundError(fmt::format("archive has no array '{}'", name));
}

void Archive::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["meta"] = meta;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays_) {
    header["arrays"].push_back({{"name", a.name},
                                {"dtype", a.is_int ? "i64" : "f64"},
                                {"dims", a.dims},
                                {"offset", offset},
                                {"count", a.count()}});
    offset += a.count() * 8;
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError(fmt::format("cannot open '{}' for writing", path.string()));
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays_) {
    const char* p = a.is_int ? reinterpret_cast<const char*>(a.i64.data())
                             : reinterpret_cast<const char*>(a.f64.data());
    out.write(p, static_cast<std::streamsize>(a.count() * 8));
  }
  out.flush();
  if (!out) throw StorageError(fmt::format("write to '{}' failed", path.string()));
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("cannot open archive '{}'", path.string()));
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(fmt::format("'{}' is not an archive", path.string()));
  }
  if (len > (std::uint64_t{1} << 32)) throw FormatError("archive header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated archive header");

  Archive ar;
  try {
    const auto header = nlohmann::json::parse(text);
    ar.meta = header.at("meta");
    std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const auto& e : header.at("arrays")) {
      ArchiveArray a;
      a.name = e.at("name").get<std::string>();
      a.dims = e.at("dims").get<std::vector<std::size_t>>();
      const auto dtype = e.at("dtype").get<std::string>();
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (dtype != "f64" && dtype != "i64") throw FormatError("unknown dtype " + dtype);
      if (count != product(a.dims) || offset + count * 8 > payload.size()) {
        throw FormatError(fmt::format("array '{}' exceeds payload", a.name));
      }
      a.is_int = dtype == "i64";
      if (a.is_int) {
        a.i64.resize(count);
        std::memcpy(a.i64.data(), payload.data() + offset, count * 8);
      } else {
        a.f64.resize(count);
        std::memcpy(a.f64.data(), payload.data() + offset, count * 8);
      }
      ar.arrays_.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("bad archive header in '{}': {}", path.string(), e.what()));
  }
  return ar;
}

}  // namespace aep
