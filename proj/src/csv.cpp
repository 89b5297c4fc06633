#include "hmest/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hmest/error.hpp"

namespace hmest::csv {

namespace {

std::string where(std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Table parse(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> starts;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false, after_quote = false;
  std::size_t line = 1, record_line = 1;

  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = after_quote = false;
  };
  const auto end_record = [&] {
    const bool blank = record.empty() && !field_started && field.empty();
    if (!blank) {
      end_field();
      records.push_back(std::move(record));
      starts.push_back(record_line);
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == ',') {
      end_field();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      ++line;
      record_line = line;
    } else if (c == '"') {
      if (!trim(field).empty() || after_quote) {
        throw Error(ErrorKind::MalformedRow, "malformed row at " + where(line, record.size() + 1) +
                                                 ": stray quote inside unquoted field");
      }
      field.clear();
      quoted = true;
      field_started = true;
    } else {
      if (after_quote && c != ' ' && c != '\t') {
        throw Error(ErrorKind::MalformedRow, "malformed row at " + where(line, record.size() + 1) +
                                                 ": text after closing quote");
      }
      if (!after_quote) field += c;
      field_started = true;
    }
  }
  if (quoted) {
    throw Error(ErrorKind::MalformedRow, "malformed row at " + where(record_line, record.size() + 1) +
                                             ": unterminated quoted field");
  }
  end_record();

  if (records.empty()) throw Error(ErrorKind::NoData, "no data: missing header row");
  Table t;
  t.header = std::move(records.front());
  for (auto& h : t.header) h = std::string(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw Error(ErrorKind::MalformedRow,
                  "malformed row at line " + std::to_string(starts[r]) + ": expected " +
                      std::to_string(t.header.size()) + " cells, found " + std::to_string(records[r].size()));
    }
    t.rows.push_back(std::move(records[r]));
    t.lines.push_back(starts[r]);
  }
  return t;
}

Dataset<double> read_dataset(std::string_view text, const std::string& missing_token) {
  const Table t = parse(text);
  if (t.rows.empty()) throw Error(ErrorKind::NoData, "no data rows");
  const std::string_view token = trim(missing_token);
  std::vector<std::vector<std::optional<double>>> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto& out = rows.emplace_back();
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      const std::string_view cell = trim(t.rows[r][c]);
      if (cell.empty() || cell == token) {
        out.emplace_back();
        continue;
      }
      double v = 0;
      if (!parse_number(cell, v) || !std::isfinite(v)) {
        throw Error(ErrorKind::BadCell,
                    "bad cell at " + where(t.lines[r], c + 1) + ": '" + std::string(cell) + "' is not a finite number");
      }
      out.emplace_back(v);
    }
  }
  return Dataset<double>::from_rows(t.header, rows);
}

CensoredSample<double> read_censored(std::string_view text) {
  const Table t = parse(text);
  if (t.header.size() != 2) {
    throw Error(ErrorKind::MalformedRow, "malformed row at line 1: expected 2 columns (time, event)");
  }
  if (t.rows.empty()) throw Error(ErrorKind::NoData, "no data rows");
  CensoredSample<double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double time = 0, flag = 0;
    const std::string_view tc = trim(t.rows[r][0]), ec = trim(t.rows[r][1]);
    if (!parse_number(tc, time) || !std::isfinite(time) || !(time > 0)) {
      throw Error(ErrorKind::BadCell,
                  "bad cell at " + where(t.lines[r], 1) + ": time '" + std::string(tc) + "' must be finite and > 0");
    }
    if (!parse_number(ec, flag) || (flag != 0 && flag != 1)) {
      throw Error(ErrorKind::BadCell,
                  "bad cell at " + where(t.lines[r], 2) + ": event flag '" + std::string(ec) + "' must be 0 or 1");
    }
    out.push_back({time, flag == 1});
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hmest::csv
