#include "olfsim/door.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "olfsim/error.hpp"

namespace olfsim::door {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + what + " '" + id + "'");
  }
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV record. Double-quoted fields may contain commas; a doubled
// quote inside a quoted field is a literal quote.
std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

}  // namespace

ResponseMatrix::ResponseMatrix(std::vector<std::string> odor_ids, std::vector<std::string> or_ids,
                               std::vector<double> values, std::optional<std::size_t> sfr_row_index)
    : odor_ids_(std::move(odor_ids)),
      or_ids_(std::move(or_ids)),
      values_(std::move(values)),
      sfr_row_(sfr_row_index) {
  if (values_.size() != odor_ids_.size() * or_ids_.size()) {
    throw ValidationError("response matrix has " + std::to_string(values_.size()) + " cells, expected " +
                          std::to_string(odor_ids_.size()) + " x " + std::to_string(or_ids_.size()));
  }
  check_unique(odor_ids_, "odor id");
  check_unique(or_ids_, "unit id");
  if (sfr_row_ && *sfr_row_ >= odor_ids_.size()) {
    throw ValidationError("SFR row index " + std::to_string(*sfr_row_) + " out of range");
  }
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) {
      double v = at(r, c);
      if (std::isnan(v)) continue;
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "value " << v << " outside [0,1] at odor '" << odor_ids_[r] << "', unit '" << or_ids_[c] << "'";
        throw ValidationError(os.str());
      }
    }
  }
}

bool ResponseMatrix::is_missing(std::size_t r, std::size_t c) const { return std::isnan(at(r, c)); }

std::size_t ResponseMatrix::missing_count() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](double v) { return std::isnan(v); }));
}

std::optional<std::size_t> ResponseMatrix::find_odor(const std::string& id) const {
  auto it = std::find(odor_ids_.begin(), odor_ids_.end(), id);
  if (it == odor_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - odor_ids_.begin());
}

std::optional<std::size_t> ResponseMatrix::find_or(const std::string& id) const {
  auto it = std::find(or_ids_.begin(), or_ids_.end(), id);
  if (it == or_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - or_ids_.begin());
}

ResponseMatrix ResponseMatrix::with_columns(std::span<const std::size_t> keep) const {
  std::vector<std::string> ids;
  ids.reserve(keep.size());
  for (auto c : keep) ids.push_back(or_ids_.at(c));
  std::vector<double> vals;
  vals.reserve(rows() * keep.size());
  for (std::size_t r = 0; r < rows(); ++r)
    for (auto c : keep) vals.push_back(at(r, c));
  return ResponseMatrix(odor_ids_, std::move(ids), std::move(vals), sfr_row_);
}

bool ResponseMatrix::operator==(const ResponseMatrix& other) const {
  if (odor_ids_ != other.odor_ids_ || or_ids_ != other.or_ids_ || sfr_row_ != other.sfr_row_) return false;
  // NaN-aware, bitwise on present values
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double a = values_[i], b = other.values_[i];
    if (std::isnan(a) != std::isnan(b)) return false;
    if (!std::isnan(a) && a != b) return false;
  }
  return true;
}

ResponseMatrix parse_response_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line, line_no);
      break;
    }
  }
  if (header.size() < 2) throw ParseError("missing header row of unit names", line_no);
  std::vector<std::string> units(header.begin() + 1, header.end());

  std::vector<std::string> odors;
  std::vector<double> values;
  std::optional<std::size_t> sfr;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line, line_no);
    if (cells.size() != header.size()) {
      throw ParseError("row has " + std::to_string(cells.size()) + " fields, header has " +
                           std::to_string(header.size()),
                       line_no);
    }
    if (cells[0].empty()) throw ParseError("empty odorant identifier", line_no);
    if (cells[0] == kSfrRowId) sfr = odors.size();
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      if (cell == "NA") {
        values.push_back(kNaN);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw ParseError("cannot parse '" + cell + "' at odor '" + cells[0] + "', unit '" + units[c - 1] + "'",
                         line_no);
      }
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "value " << cell << " outside [0,1] at odor '" << cells[0] << "', unit '" << units[c - 1]
           << "' (line " << line_no << ", column " << c + 1 << ")";
        throw ValidationError(os.str());
      }
      values.push_back(v);
    }
    odors.push_back(cells[0]);
  }
  return ResponseMatrix(std::move(odors), std::move(units), std::move(values), sfr);
}

ResponseMatrix load_response_matrix(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open response matrix '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_response_matrix(ss.str());
}

std::vector<std::string> load_unit_whitelist(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open unit whitelist '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto name = trim(line);
    if (!name.empty()) names.push_back(name);
  }
  return names;
}

ResponseMatrix filter_single_or_units(const ResponseMatrix& m, std::span<const std::string> keep) {
  if (keep.empty()) throw ValidationError("unit whitelist is empty; an empty receptor panel is unusable");
  std::unordered_set<std::string> wanted;
  for (const auto& k : keep) {
    if (!wanted.insert(k).second) throw ValidationError("duplicate unit '" + k + "' in whitelist");
  }
  std::string unmatched;
  for (const auto& k : keep) {
    if (!m.find_or(k)) unmatched += (unmatched.empty() ? "" : ", ") + k;
  }
  if (!unmatched.empty()) throw ValidationError("unknown unit names: " + unmatched);
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (wanted.count(m.or_ids()[c])) cols.push_back(c);
  }
  return m.with_columns(cols);
}

ResponseMatrix impute_missing(const ResponseMatrix& m) {
  std::vector<double> vals = m.values();
  for (auto& v : vals) {
    if (std::isnan(v)) v = 0.0;
  }
  return ResponseMatrix(m.odor_ids(), m.or_ids(), std::move(vals), m.sfr_row_index());
}

ResponseMatrix select_odors(const ResponseMatrix& m, std::span<const std::string> odor_ids, bool include_sfr,
                            SfrSource sfr_source) {
  if (odor_ids.empty() && !include_sfr) throw ValidationError("odor selection is empty");
  std::unordered_set<std::string> seen;
  std::vector<std::string> ids;
  std::vector<double> vals;
  for (const auto& id : odor_ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate odor id '" + id + "' in selection");
    auto r = m.find_odor(id);
    if (!r) throw ValidationError("odor id '" + id + "' not found in response matrix");
    ids.push_back(id);
    auto row = m.row(*r);
    vals.insert(vals.end(), row.begin(), row.end());
  }
  std::optional<std::size_t> sfr_row;
  if (include_sfr) {
    if (seen.count(kSfrRowId)) throw ValidationError("SFR requested twice (explicit id and include_sfr)");
    sfr_row = ids.size();
    ids.emplace_back(kSfrRowId);
    auto src = m.sfr_row_index();
    if (src && sfr_source == SfrSource::FromMatrix) {
      auto row = m.row(*src);
      vals.insert(vals.end(), row.begin(), row.end());
    } else {
      vals.insert(vals.end(), m.cols(), 0.0);
    }
  } else if (seen.count(kSfrRowId)) {
    sfr_row = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), std::string(kSfrRowId)) - ids.begin());
  }
  return ResponseMatrix(std::move(ids), m.or_ids(), std::move(vals), sfr_row);
}

}  // namespace olfsim::door
