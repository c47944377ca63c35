#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "degrpo/errors.hpp"
#include "degrpo/policy.hpp"
#include "degrpo/trainer.hpp"

namespace degrpo {

// Shortest round-trip decimal form; used everywhere a double reaches a file
// so that identical runs produce identical bytes.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError(where + ": not a number: '" + text + "'");
  return value;
}

// ---------------------------------------------------------------------------
// Parameter file: little-endian binary with a dimension header.
// ---------------------------------------------------------------------------

inline constexpr char kParamsMagic[4] = {'D', 'G', 'R', 'P'};
inline constexpr std::uint32_t kParamsVersion = 1;

inline void save_params(const std::filesystem::path& path,
                        const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  auto put_u32 = [&out](std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
  };
  out.write(kParamsMagic, 4);
  put_u32(kParamsVersion);
  put_u32(static_cast<std::uint32_t>(params.dims.classes));
  put_u32(static_cast<std::uint32_t>(params.dims.answer_vocab));
  put_u32(static_cast<std::uint32_t>(params.dims.scratch_vocab));
  put_u32(static_cast<std::uint32_t>(params.dims.t_short));
  put_u32(static_cast<std::uint32_t>(params.dims.t_think));
  put_u32(static_cast<std::uint32_t>(params.theta.size()));
  for (double x : params.theta) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    char bytes[8];
    for (int i = 0; i < 8; ++i)
      bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

inline PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open params file: " + path.string());
  auto get_u32 = [&in, &path]() {
    char bytes[4];
    in.read(bytes, 4);
    if (!in) throw ConfigError("truncated params file: " + path.string());
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i]))
           << (8 * i);
    return v;
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kParamsMagic, 4) != 0)
    throw ConfigError("not a params file: " + path.string());
  if (get_u32() != kParamsVersion)
    throw ConfigError("unsupported params version: " + path.string());
  PolicyParams params;
  params.dims.classes = static_cast<int>(get_u32());
  params.dims.answer_vocab = static_cast<int>(get_u32());
  params.dims.scratch_vocab = static_cast<int>(get_u32());
  params.dims.t_short = static_cast<int>(get_u32());
  params.dims.t_think = static_cast<int>(get_u32());
  const std::uint32_t n = get_u32();
  if (static_cast<int>(n) != params.dims.dim())
    throw ConfigError("params file dimension header is inconsistent: " +
                      path.string());
  params.theta.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    char bytes[8];
    in.read(bytes, 8);
    if (!in) throw ConfigError("truncated params file: " + path.string());
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[j]))
              << (8 * j);
    std::memcpy(&params.theta[i], &bits, sizeof(double));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Metrics CSV. Fixed column order; absent values are empty fields. The three
// per-difficulty columns are filled by profile name, so environments without
// an "easy"/"medium"/"hard" profile leave them empty.
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "step,think_fraction,acc_short,acc_think,all_correct_short,mean_reward,"
    "objective,kl,think_frac_easy,think_frac_medium,think_frac_hard";

inline constexpr const char* kProfileColumns[3] = {"easy", "medium", "hard"};

// Maps each named CSV column to the matching profile index, -1 when the
// environment has no profile of that name.
inline std::array<int, 3> profile_column_map(
    const std::vector<std::string>& profile_names) {
  std::array<int, 3> map{-1, -1, -1};
  for (int k = 0; k < 3; ++k)
    for (std::size_t p = 0; p < profile_names.size(); ++p)
      if (profile_names[p] == kProfileColumns[k])
        map[static_cast<std::size_t>(k)] = static_cast<int>(p);
  return map;
}

inline std::string metrics_csv_row(const MetricsRecord& rec,
                                   const std::array<int, 3>& column_profile) {
  auto opt_field = [](const std::optional<double>& v) {
    return v.has_value() ? format_double(*v) : std::string();
  };
  std::string out = std::to_string(rec.step);
  out += ',';
  out += format_double(rec.think_fraction);
  out += ',';
  out += opt_field(rec.acc_short);
  out += ',';
  out += opt_field(rec.acc_think);
  out += ',';
  out += std::to_string(rec.all_correct_short);
  out += ',';
  out += format_double(rec.mean_reward);
  out += ',';
  out += format_double(rec.objective_value);
  out += ',';
  out += format_double(rec.kl);
  for (int k = 0; k < 3; ++k) {
    out += ',';
    const int p = column_profile[static_cast<std::size_t>(k)];
    if (p >= 0 &&
        static_cast<std::size_t>(p) < rec.think_frac_by_profile.size())
      out += opt_field(rec.think_frac_by_profile[static_cast<std::size_t>(p)]);
  }
  out += '\n';
  return out;
}

inline std::string metrics_to_csv(const std::vector<MetricsRecord>& records,
                                  const std::vector<std::string>& profile_names) {
  const std::array<int, 3> column_profile = profile_column_map(profile_names);
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& rec : records) out += metrics_csv_row(rec, column_profile);
  return out;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Parsed metrics table: column-major optional doubles keyed by header name.
struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline MetricsTable parse_metrics_csv(const std::string& text,
                                      const std::string& where) {
  MetricsTable table;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    line_number++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream fs(line);
    while (std::getline(fs, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (line_number == 1) {
      table.columns = fields;
      if (line != kMetricsHeader)
        throw ConfigError(where + ":1: unexpected metrics header");
      continue;
    }
    if (fields.size() != table.columns.size())
      throw ConfigError(where + ":" + std::to_string(line_number) +
                        ": expected " + std::to_string(table.columns.size()) +
                        " fields, got " + std::to_string(fields.size()));
    std::vector<std::optional<double>> row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        row.push_back(std::nullopt);
      } else {
        row.push_back(parse_double(
            fields[i], where + ":" + std::to_string(line_number)));
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty())
    throw ConfigError(where + ": empty file");
  return table;
}

}  // namespace degrpo
