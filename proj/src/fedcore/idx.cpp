#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/dataset.hpp"

namespace pqfl::fedcore {
namespace {

struct IdxArray {
  std::uint8_t type = 0;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

std::size_t element_size(std::uint8_t type) {
  switch (type) {
    case 0x08:
    case 0x09: return 1;
    case 0x0B: return 2;
    case 0x0C:
    case 0x0D: return 4;
    case 0x0E: return 8;
    default: return 0;
  }
}

double read_element(std::uint8_t type, const std::uint8_t* p) {
  switch (type) {
    case 0x08: return p[0];
    case 0x09: return static_cast<std::int8_t>(p[0]);
    case 0x0B: return static_cast<std::int16_t>((p[0] << 8) | p[1]);
    case 0x0C: return static_cast<std::int32_t>(be32(p));
    case 0x0D: return std::bit_cast<float>(be32(p));
    case 0x0E: {
      const std::uint64_t hi = be32(p);
      const std::uint64_t lo = be32(p + 4);
      return std::bit_cast<double>((hi << 32) | lo);
    }
  }
  return 0.0;
}

// Header: two zero bytes, type code, dimension count, then big-endian u32
// dimensions. Reads at most `limit` records along the first dimension.
IdxArray read_idx(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (raw.size() < 4 || raw[0] != 0 || raw[1] != 0) {
    throw Error(ErrorCode::kMalformedPayload, where + ": bad IDX magic");
  }
  IdxArray arr;
  arr.type = raw[2];
  const std::size_t esize = element_size(arr.type);
  const std::size_t ndims = raw[3];
  if (esize == 0 || ndims == 0) {
    throw Error(ErrorCode::kMalformedPayload, where + ": unsupported IDX type or rank");
  }
  if (raw.size() < 4 + 4 * ndims) throw Error(ErrorCode::kMalformedPayload, where + ": truncated");
  std::size_t per_record = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    arr.dims.push_back(be32(raw.data() + 4 + 4 * i));
    if (i > 0) per_record *= arr.dims.back();
  }
  std::size_t records = arr.dims[0];
  if (limit > 0 && limit < records) records = limit;
  const std::size_t offset = 4 + 4 * ndims;
  const std::size_t needed = records * per_record * esize;
  if (raw.size() - offset < needed) {
    throw Error(ErrorCode::kMalformedPayload, where + ": fewer bytes than declared");
  }
  arr.dims[0] = static_cast<std::uint32_t>(records);
  arr.values.resize(records * per_record);
  for (std::size_t i = 0; i < arr.values.size(); ++i) {
    arr.values[i] = read_element(arr.type, raw.data() + offset + i * esize);
  }
  return arr;
}

}  // namespace

ClientDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t limit) {
  const IdxArray x = read_idx(images, limit);
  const IdxArray y = read_idx(labels, limit);
  if (y.dims.size() != 1 || y.dims[0] != x.dims[0]) {
    throw Error(ErrorCode::kDimensionMismatch, "image and label record counts differ");
  }
  ClientDataset d;
  d.num_features = x.values.size() / x.dims[0];
  const double scale = x.type == 0x08 ? 1.0 / 255.0 : 1.0;
  d.features.reserve(x.values.size());
  for (double v : x.values) d.features.push_back(static_cast<float>(v * scale));
  std::uint32_t max_label = 0;
  for (double v : y.values) {
    if (v < 0) throw Error(ErrorCode::kMalformedPayload, "negative label");
    d.labels.push_back(static_cast<std::uint32_t>(v));
    max_label = std::max(max_label, d.labels.back());
  }
  d.num_classes = std::max<std::size_t>(2, std::size_t{max_label} + 1);
  d.validate();
  return d;
}

}  // namespace pqfl::fedcore
