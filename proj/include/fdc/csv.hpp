#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"

namespace fdc {

namespace csv_detail {

/// Splits RFC-4180 text into records. Quoted fields may contain separators,
/// doubled quotes and line breaks. A trailing newline does not start a record.
inline std::vector<std::vector<std::string>> split_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_open = false;

  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    record_open = false;
  };

  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw DataError(DataErrc::MalformedQuote, "unexpected quote in record " + std::to_string(records.size() + 1));
        }
        in_quotes = true;
        field_was_quoted = true;
        record_open = true;
        break;
      case ',':
        end_field();
        record_open = true;
        break;
      case '\r':
        break;
      case '\n':
        if (record_open || !field.empty()) {
          end_record();
        }
        break;
      default:
        if (field_was_quoted) {
          throw DataError(DataErrc::MalformedQuote, "text after closing quote in record " + std::to_string(records.size() + 1));
        }
        field.push_back(c);
        record_open = true;
    }
  }
  if (in_quotes) throw DataError(DataErrc::MalformedQuote, "unterminated quoted field");
  if (record_open || !field.empty()) end_record();
  return records;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Parses a complete real literal (scientific notation allowed, optional
/// leading '+'). Non-finite spellings such as "nan" or "inf" parse too; the
/// caller decides what to do with them.
inline std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote_if_needed(std::string_view s) {
  const bool needs = s.empty() || s.find_first_of(",\"\r\n") != std::string_view::npos ||
                     s.front() == ' ' || s.back() == ' ';
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace csv_detail

using KindOverrides = std::map<std::string, FeatureKind, std::less<>>;

/// Builds a dataset from CSV text. See load_csv.
inline Dataset parse_csv(std::string_view text, const std::optional<std::string>& target_name = std::nullopt,
                         const KindOverrides& kind_overrides = {}) {
  auto records = csv_detail::split_records(text);
  if (records.empty()) throw DataError(DataErrc::EmptyBody, "no header line");
  const auto& header = records.front();
  if (records.size() < 2) throw DataError(DataErrc::EmptyBody, "header without data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw DataError(DataErrc::RaggedRow, "line " + std::to_string(r + 1) + " has " +
                                               std::to_string(records[r].size()) + " fields, expected " +
                                               std::to_string(header.size()));
    }
  }
  for (std::size_t a = 0; a < header.size(); ++a) {
    for (std::size_t b = a + 1; b < header.size(); ++b) {
      if (header[a] == header[b]) throw DataError(DataErrc::DuplicateName, header[a]);
    }
  }
  std::optional<std::size_t> target_col;
  if (target_name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == *target_name) target_col = c;
    }
    if (!target_col) throw DataError(DataErrc::UnknownColumn, "target '" + *target_name + "'");
  }
  for (const auto& [name, kind] : kind_overrides) {
    bool found = false;
    for (const auto& h : header) found = found || h == name;
    if (!found) throw DataError(DataErrc::UnknownColumn, "override for '" + name + "'");
  }

  const std::size_t n = records.size() - 1;
  std::vector<Feature> features;
  std::vector<std::vector<double>> columns;
  std::optional<std::vector<double>> target;

  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    std::vector<std::optional<double>> parsed(n);
    bool all_numeric = true;
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& cell = records[r + 1][c];
      if (csv_detail::trim(cell).empty()) {
        throw DataError(DataErrc::MissingValue, "column '" + name + "', line " + std::to_string(r + 2));
      }
      parsed[r] = csv_detail::parse_real(cell);
      all_numeric = all_numeric && parsed[r].has_value();
    }

    if (target_col && c == *target_col) {
      if (!all_numeric) throw DataError(DataErrc::NonNumericTarget, name);
      std::vector<double> values(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(*parsed[r])) {
          throw DataError(DataErrc::NonFiniteValue, "target '" + name + "', line " + std::to_string(r + 2));
        }
        values[r] = *parsed[r];
      }
      target = std::move(values);
      continue;
    }

    const auto override_it = kind_overrides.find(name);
    const bool force_categorical = override_it != kind_overrides.end() && override_it->second.is_categorical();
    const bool force_numeric = override_it != kind_overrides.end() && override_it->second.is_numeric();
    if (force_numeric && !all_numeric) {
      throw DataError(DataErrc::KindOverride, "column '" + name + "' is not numeric");
    }

    std::vector<double> values(n);
    if (all_numeric && !force_categorical) {
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(*parsed[r])) {
          throw DataError(DataErrc::NonFiniteValue, "column '" + name + "', line " + std::to_string(r + 2));
        }
        values[r] = *parsed[r];
      }
      features.push_back({name, FeatureKind::numeric()});
    } else {
      std::vector<std::string> levels;
      if (force_categorical) levels = override_it->second.levels;
      const bool fixed_levels = !levels.empty();
      for (std::size_t r = 0; r < n; ++r) {
        const std::string& cell = records[r + 1][c];
        std::size_t idx = 0;
        while (idx < levels.size() && levels[idx] != cell) ++idx;
        if (idx == levels.size()) {
          if (fixed_levels) {
            throw DataError(DataErrc::KindOverride,
                            "value '" + cell + "' of column '" + name + "' is not in the declared levels");
          }
          levels.push_back(cell);
        }
        values[r] = static_cast<double>(idx);
      }
      features.push_back({name, FeatureKind::categorical(std::move(levels))});
    }
    columns.push_back(std::move(values));
  }
  if (features.empty()) throw DataError(DataErrc::InvalidDataset, "no feature columns besides the target");
  return Dataset(Schema(std::move(features)), std::move(columns), std::move(target), target_name.value_or(""));
}

/// Reads a CSV file into a Dataset.
///
/// A column is numeric iff every cell parses as a real and no override marks it
/// categorical; otherwise it is categorical with levels in first-appearance
/// order (or the override's level list, when one is given).
inline Dataset load_csv(const std::filesystem::path& path, const std::optional<std::string>& target_name = std::nullopt,
                        const KindOverrides& kind_overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrc::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_name, kind_overrides);
}

/// Writes features (and the target, last, when present) as CSV. Reals use the
/// shortest representation that round-trips exactly.
inline void write_csv(std::ostream& out, const Dataset& data) {
  const std::size_t p = data.features();
  for (std::size_t j = 0; j < p; ++j) {
    if (j) out << ',';
    out << csv_detail::quote_if_needed(data.feature(j).name);
  }
  if (data.has_target()) out << ',' << csv_detail::quote_if_needed(data.target_name().empty() ? "y" : data.target_name());
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (j) out << ',';
      const auto& kind = data.feature(j).kind;
      const double v = data.cell(i, j);
      if (kind.is_numeric()) out << csv_detail::format_real(v);
      else out << csv_detail::quote_if_needed(kind.levels[static_cast<std::size_t>(v)]);
    }
    if (data.has_target()) out << ',' << csv_detail::format_real(data.target()[i]);
    out << '\n';
  }
}

inline std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  write_csv(out, data);
  return out.str();
}

}  // namespace fdc
