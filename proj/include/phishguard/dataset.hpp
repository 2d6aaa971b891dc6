#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phishguard {

enum class Provenance { UCI, OpenPhish, EvilGinx, GenAI, Unknown };

std::string_view provenance_name(Provenance p) noexcept;
// Case-insensitive; throws InvalidArgument for unknown names.
Provenance parse_provenance(std::string_view name);

struct Sample {
  Eigen::VectorXd features;
  int label = 0;  // 0 legitimate, 1 phishing
  Provenance provenance = Provenance::Unknown;
};

// Labeled samples stored row-wise; every sample shares feature_names.
struct Dataset {
  std::string name;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd features;  // size() x dimension()
  Eigen::VectorXi labels;
  std::vector<Provenance> provenance;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dimension() const { return features.cols(); }
  bool empty() const { return size() == 0; }

  Sample sample(Eigen::Index row) const;
  Dataset subset(std::span<const Eigen::Index> rows) const;
  std::optional<Eigen::Index> column(std::string_view feature) const;
  Eigen::VectorXd labels_as_double() const { return labels.cast<double>(); }
};

Dataset make_dataset(std::vector<std::string> feature_names, Eigen::MatrixXd features,
                     Eigen::VectorXi labels, Provenance provenance = Provenance::Unknown);

// Appends rows of `b` to `a`; feature names must match.
Dataset concat(const Dataset& a, const Dataset& b);

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t duplicates_removed = 0;
  std::size_t feature_count = 0;
};

// Parses a header-first CSV with a `label` (0/1) or `Result` (-1/1) column.
// Columns named `index` or `id` are row identifiers and are dropped. Exact
// duplicate rows are removed, keeping the first occurrence.
Dataset parse_csv(std::string_view text, Provenance provenance, LoadReport* report = nullptr);
Dataset load_csv(const std::filesystem::path& path, Provenance provenance,
                 LoadReport* report = nullptr);

// The same contract for ARFF input (the format the UCI archive ships).
Dataset parse_arff(std::string_view text, Provenance provenance, LoadReport* report = nullptr);
Dataset load_arff(const std::filesystem::path& path, Provenance provenance,
                  LoadReport* report = nullptr);

// Dispatches on the extension (.arff, anything else is CSV).
Dataset load_table(const std::filesystem::path& path, Provenance provenance,
                   LoadReport* report = nullptr);

// Canonical CSV: feature columns in order, `label` last.
std::string to_csv(const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

Dataset deduplicate(const Dataset& ds, std::size_t* removed = nullptr);

// (legitimate count, phishing count)
std::pair<std::size_t, std::size_t> class_distribution(const Dataset& ds);

// Explicit alias -> canonical name table.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::map<std::string, std::string, std::less<>> aliases);
  static AliasTable load(const std::filesystem::path& path);
  static const AliasTable& bundled();

  std::string canonical(std::string_view name) const;

 private:
  std::map<std::string, std::string, std::less<>> aliases_;
};

// Restricts every dataset to `keep`, in that order, unifying aliased column
// names. When several columns map to one name the one with the most distinct
// values wins (the numeric variant over a categorical one).
std::vector<Dataset> align_features(const std::vector<Dataset>& datasets,
                                    const std::vector<std::string>& keep,
                                    const AliasTable& aliases = AliasTable::bundled());

}  // namespace phishguard
