#pragma once

// Odorant x receptor-unit response tables (DoOR consensus export layout).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace olfsim::door {

inline constexpr const char* kSfrRowId = "SFR";

// Dense odor x unit table of normalized responses. Missing cells are stored
// as NaN until impute_missing() replaces them. Immutable after construction.
class ResponseMatrix {
 public:
  // Validates shape, id uniqueness, value range and the SFR index.
  // Throws ValidationError.
  ResponseMatrix(std::vector<std::string> odor_ids, std::vector<std::string> or_ids,
                 std::vector<double> values, std::optional<std::size_t> sfr_row_index = {});

  std::size_t rows() const { return odor_ids_.size(); }
  std::size_t cols() const { return or_ids_.size(); }

  const std::vector<std::string>& odor_ids() const { return odor_ids_; }
  const std::vector<std::string>& or_ids() const { return or_ids_; }
  const std::vector<double>& values() const { return values_; }
  std::optional<std::size_t> sfr_row_index() const { return sfr_row_; }

  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  bool is_missing(std::size_t r, std::size_t c) const;
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  std::size_t missing_count() const;
  // Rows that are odorants, i.e. excluding the SFR row.
  std::size_t odor_count() const { return rows() - (sfr_row_ ? 1 : 0); }

  std::optional<std::size_t> find_odor(const std::string& id) const;
  std::optional<std::size_t> find_or(const std::string& id) const;

  // Column subset in the given order; shared by the filtering and
  // selection code paths.
  ResponseMatrix with_columns(std::span<const std::size_t> cols) const;

  bool operator==(const ResponseMatrix& other) const;

 private:
  std::vector<std::string> odor_ids_;
  std::vector<std::string> or_ids_;
  std::vector<double> values_;
  std::optional<std::size_t> sfr_row_;
};

// Reads the comma-separated export: header row of unit names (first cell is
// the empty row-name column), then one row per odorant. Cells are decimals or
// the literal NA. A row whose identifier is "SFR" becomes the SFR row.
// Throws ParseError (with line number) or ValidationError (naming the cell).
ResponseMatrix load_response_matrix(const std::filesystem::path& path);
ResponseMatrix parse_response_matrix(const std::string& text);

// One unit name per line; '#' starts a comment; blank lines ignored.
std::vector<std::string> load_unit_whitelist(const std::filesystem::path& path);

// Restricts to the named columns, keeping the matrix's own column order.
// Throws ValidationError on an empty list, duplicates, or unknown names
// (all unmatched names are listed).
ResponseMatrix filter_single_or_units(const ResponseMatrix& m, std::span<const std::string> keep);

ResponseMatrix impute_missing(const ResponseMatrix& m);

enum class SfrSource { FromMatrix, Zero };

// Rows in request order. With include_sfr the SFR row is appended as the last
// row: the matrix's own SFR row when present (and sfr_source allows it),
// otherwise an all-zero row.
ResponseMatrix select_odors(const ResponseMatrix& m, std::span<const std::string> odor_ids,
                            bool include_sfr, SfrSource sfr_source = SfrSource::FromMatrix);

}  // namespace olfsim::door
