#include "pqfl/bench/csv.hpp"

#include <fstream>
#include <iterator>

namespace pqfl::bench::csv {

std::vector<std::vector<std::string_view>> parse(std::string_view text, std::string_view header,
                                                 std::size_t columns) {
  std::vector<std::vector<std::string_view>> rows;
  bool seen_header = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) {
        throw Error(ErrorCode::kDecodeError, "unexpected CSV header: " + std::string(line));
      }
      seen_header = true;
      continue;
    }
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != columns) {
      throw Error(ErrorCode::kDecodeError, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  if (!seen_header) throw Error(ErrorCode::kDecodeError, "missing CSV header");
  return rows;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  out << contents;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed on " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace pqfl::bench::csv
