#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pqfl/error.hpp"

// Minimal comma-separated reader/writer for the metric files. Fields never
// contain commas or quotes.
namespace pqfl::bench::csv {

// Splits `text` into rows of exactly `columns` fields after checking the
// header line. Blank lines are skipped. Throws kDecodeError.
std::vector<std::vector<std::string_view>> parse(std::string_view text, std::string_view header,
                                                 std::size_t columns);

template <typename T>
T number(std::string_view field) {
  if constexpr (std::is_floating_point_v<T>) {
    // strtod accepts exactly what %.17g and %.6f produce.
    const std::string copy(field);
    char* end = nullptr;
    const double v = std::strtod(copy.c_str(), &end);
    if (copy.empty() || end != copy.c_str() + copy.size()) {
      throw Error(ErrorCode::kDecodeError, "bad number '" + copy + "'");
    }
    return static_cast<T>(v);
  } else {
    T out{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw Error(ErrorCode::kDecodeError, "bad integer '" + std::string(field) + "'");
    }
    return out;
  }
}

// Throws kIoError.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace pqfl::bench::csv
