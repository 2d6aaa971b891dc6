#include "phishguard/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>
#include <unordered_set>

#include "phishguard/data_files.hpp"
#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"

namespace phishguard {

namespace {

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

std::string unquote(std::string_view s) {
  s = detail::trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

bool is_row_id(std::string_view name) {
  const auto lower = detail::to_lower(name);
  return lower == "index" || lower == "id";
}

std::string row_key(const Eigen::MatrixXd& x, Eigen::Index row, int label) {
  std::string key(static_cast<std::size_t>(x.cols()) * sizeof(double) + sizeof(int), '\0');
  char* out = key.data();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double v = x(row, c);
    if (v == 0.0) v = 0.0;  // fold -0 into +0
    std::memcpy(out, &v, sizeof v);
    out += sizeof v;
  }
  std::memcpy(out, &label, sizeof label);
  return key;
}

Dataset build(const RawTable& table, Provenance provenance, LoadReport* report) {
  std::optional<std::size_t> label_col;
  bool from_result = false;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto lower = detail::to_lower(table.header[c]);
    if (lower == "label") {
      label_col = c;
      from_result = false;
      break;
    }
    if (lower == "result" && !label_col) {
      label_col = c;
      from_result = true;
    }
  }
  if (!label_col) throw Error(Errc::MissingLabelColumn, "no `label` or `Result` column");

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *label_col || is_row_id(table.header[c])) continue;
    feature_cols.push_back(c);
    names.push_back(table.header[c]);
  }
  if (table.rows.empty()) throw Error(Errc::EmptyDataset, "no data rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(feature_cols.size()));
  Eigen::VectorXi y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    const auto line = table.line_numbers[static_cast<std::size_t>(r)];
    if (row.size() != table.header.size()) {
      throw Error(Errc::Format, "line " + std::to_string(line) + ": expected " +
                                    std::to_string(table.header.size()) + " cells, got " +
                                    std::to_string(row.size()));
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto& cell = row[feature_cols[k]];
      const auto v = detail::parse_double(cell);
      if (!v) {
        throw Error(Errc::NonNumericCell, "line " + std::to_string(line) + ", column " +
                                              names[k] + ": '" + cell + "'");
      }
      x(r, static_cast<Eigen::Index>(k)) = *v;
    }
    const auto v = detail::parse_double(row[*label_col]);
    if (!v) {
      throw Error(Errc::NonNumericCell, "line " + std::to_string(line) + ", column " +
                                            table.header[*label_col] + ": '" + row[*label_col] + "'");
    }
    int label = -1;
    if (from_result) {
      if (*v == -1.0) label = 0;
      if (*v == 1.0) label = 1;
    } else if (*v == 0.0 || *v == 1.0) {
      label = static_cast<int>(*v);
    }
    if (label < 0) {
      throw Error(Errc::Format, "line " + std::to_string(line) + ": label value " +
                                    detail::format_number(*v) + " is not " +
                                    (from_result ? "-1 or 1" : "0 or 1"));
    }
    y[r] = label;
  }

  Dataset ds = make_dataset(std::move(names), std::move(x), std::move(y), provenance);
  std::size_t removed = 0;
  ds = deduplicate(ds, &removed);
  if (report) {
    report->rows_read = table.rows.size();
    report->duplicates_removed = removed;
    report->feature_count = static_cast<std::size_t>(ds.dimension());
  }
  return ds;
}

}  // namespace

std::string_view provenance_name(Provenance p) noexcept {
  switch (p) {
    case Provenance::UCI: return "UCI";
    case Provenance::OpenPhish: return "OpenPhish";
    case Provenance::EvilGinx: return "EvilGinx";
    case Provenance::GenAI: return "GenAI";
    case Provenance::Unknown: return "Unknown";
  }
  return "Unknown";
}

Provenance parse_provenance(std::string_view name) {
  const auto lower = detail::to_lower(detail::trim(name));
  for (auto p : {Provenance::UCI, Provenance::OpenPhish, Provenance::EvilGinx, Provenance::GenAI,
                 Provenance::Unknown}) {
    if (detail::to_lower(provenance_name(p)) == lower) return p;
  }
  throw Error(Errc::InvalidArgument, "unknown provenance '" + std::string(name) + "'");
}

Sample Dataset::sample(Eigen::Index row) const {
  return {features.row(row).transpose(), labels[row], provenance[static_cast<std::size_t>(row)]};
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.name = name;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dimension());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  out.provenance.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.labels[static_cast<Eigen::Index>(i)] = labels[r];
    out.provenance.push_back(provenance[static_cast<std::size_t>(r)]);
  }
  return out;
}

std::optional<Eigen::Index> Dataset::column(std::string_view feature) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), feature);
  if (it == feature_names.end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - feature_names.begin());
}

Dataset make_dataset(std::vector<std::string> feature_names, Eigen::MatrixXd features,
                     Eigen::VectorXi labels, Provenance provenance) {
  if (features.rows() != labels.size()) {
    throw Error(Errc::LengthMismatch, "feature rows and labels differ in length");
  }
  if (features.cols() != static_cast<Eigen::Index>(feature_names.size())) {
    throw Error(Errc::DimensionMismatch, "feature names and columns differ in count");
  }
  Dataset ds;
  ds.feature_names = std::move(feature_names);
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.provenance.assign(static_cast<std::size_t>(ds.features.rows()), provenance);
  return ds;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.feature_names != b.feature_names) {
    throw Error(Errc::DimensionMismatch, "cannot concatenate datasets with different features");
  }
  Dataset out;
  out.name = a.name;
  out.feature_names = a.feature_names;
  out.features.resize(a.size() + b.size(), a.dimension());
  out.features << a.features, b.features;
  out.labels.resize(a.size() + b.size());
  out.labels << a.labels, b.labels;
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  return out;
}

Dataset deduplicate(const Dataset& ds, std::size_t* removed) {
  std::unordered_set<std::string> seen;
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(ds.size()));
  for (Eigen::Index r = 0; r < ds.size(); ++r) {
    if (seen.insert(row_key(ds.features, r, ds.labels[r])).second) keep.push_back(r);
  }
  if (removed) *removed = static_cast<std::size_t>(ds.size()) - keep.size();
  if (keep.size() == static_cast<std::size_t>(ds.size())) return ds;
  return ds.subset(keep);
}

Dataset parse_csv(std::string_view text, Provenance provenance, LoadReport* report) {
  RawTable table;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (auto cell : detail::split(line, ',')) cells.push_back(unquote(cell));
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      table.rows.push_back(std::move(cells));
      table.line_numbers.push_back(line_no);
    }
  }
  if (!have_header) throw Error(Errc::EmptyDataset, "file is empty");
  return build(table, provenance, report);
}

Dataset load_csv(const std::filesystem::path& path, Provenance provenance, LoadReport* report) {
  auto ds = parse_csv(read_text_file(path), provenance, report);
  ds.name = path.stem().string();
  return ds;
}

Dataset parse_arff(std::string_view text, Provenance provenance, LoadReport* report) {
  RawTable table;
  std::size_t line_no = 0;
  bool in_data = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '%') continue;
    if (!in_data) {
      const auto lower = detail::to_lower(line.substr(0, std::min<std::size_t>(line.size(), 10)));
      if (lower.rfind("@attribute", 0) == 0) {
        auto rest = detail::trim(line.substr(10));
        std::string name;
        if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
          const auto close = rest.find(rest.front(), 1);
          if (close == std::string_view::npos) throw Error(Errc::Format, "unterminated attribute name");
          name = std::string(rest.substr(1, close - 1));
        } else {
          name = std::string(rest.substr(0, rest.find_first_of(" \t")));
        }
        table.header.push_back(std::move(name));
      } else if (lower.rfind("@data", 0) == 0) {
        in_data = true;
      }
      continue;
    }
    std::vector<std::string> cells;
    for (auto cell : detail::split(line, ',')) cells.push_back(unquote(cell));
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw Error(Errc::EmptyDataset, "no attributes declared");
  return build(table, provenance, report);
}

Dataset load_arff(const std::filesystem::path& path, Provenance provenance, LoadReport* report) {
  auto ds = parse_arff(read_text_file(path), provenance, report);
  ds.name = path.stem().string();
  return ds;
}

Dataset load_table(const std::filesystem::path& path, Provenance provenance, LoadReport* report) {
  if (detail::to_lower(path.extension().string()) == ".arff") {
    return load_arff(path, provenance, report);
  }
  return load_csv(path, provenance, report);
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (const auto& name : ds.feature_names) out += name + ",";
  out += "label\n";
  for (Eigen::Index r = 0; r < ds.size(); ++r) {
    for (Eigen::Index c = 0; c < ds.dimension(); ++c) {
      out += detail::format_number(ds.features(r, c));
      out += ',';
    }
    out += std::to_string(ds.labels[r]);
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  write_text_file(path, to_csv(ds));
}

std::pair<std::size_t, std::size_t> class_distribution(const Dataset& ds) {
  const auto phishing = static_cast<std::size_t>((ds.labels.array() == 1).count());
  return {static_cast<std::size_t>(ds.size()) - phishing, phishing};
}

AliasTable::AliasTable(std::map<std::string, std::string, std::less<>> aliases)
    : aliases_(std::move(aliases)) {}

AliasTable AliasTable::load(const std::filesystem::path& path) {
  std::map<std::string, std::string, std::less<>> aliases;
  for (const auto& entry : read_list_file(path)) {
    std::istringstream in(entry);
    std::string alias;
    std::string canonical;
    if (!(in >> alias >> canonical)) {
      throw Error(Errc::Format, "alias entry needs two names: '" + entry + "'");
    }
    aliases[alias] = canonical;
  }
  return AliasTable(std::move(aliases));
}

const AliasTable& AliasTable::bundled() {
  static const AliasTable table = load(data_dir() / "feature_aliases.txt");
  return table;
}

std::string AliasTable::canonical(std::string_view name) const {
  if (const auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  return std::string(name);
}

std::vector<Dataset> align_features(const std::vector<Dataset>& datasets,
                                    const std::vector<std::string>& keep,
                                    const AliasTable& aliases) {
  std::vector<Dataset> out;
  out.reserve(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& ds = datasets[d];
    const std::string label = ds.name.empty() ? "dataset " + std::to_string(d) : ds.name;
    std::vector<Eigen::Index> columns;
    for (const auto& wanted : keep) {
      const auto target = aliases.canonical(wanted);
      std::optional<Eigen::Index> best;
      std::size_t best_distinct = 0;
      for (Eigen::Index c = 0; c < ds.dimension(); ++c) {
        if (aliases.canonical(ds.feature_names[static_cast<std::size_t>(c)]) != target) continue;
        std::set<double> distinct(ds.features.col(c).data(), ds.features.col(c).data() + ds.size());
        if (!best || distinct.size() > best_distinct) {
          best = c;
          best_distinct = distinct.size();
        }
      }
      if (!best) throw Error(Errc::UnmappableFeature, label + ": " + wanted);
      columns.push_back(*best);
    }
    Dataset aligned;
    aligned.name = ds.name;
    aligned.feature_names.reserve(keep.size());
    for (const auto& wanted : keep) aligned.feature_names.push_back(aliases.canonical(wanted));
    aligned.features.resize(ds.size(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
      aligned.features.col(static_cast<Eigen::Index>(k)) = ds.features.col(columns[k]);
    }
    aligned.labels = ds.labels;
    aligned.provenance = ds.provenance;
    out.push_back(std::move(aligned));
  }
  return out;
}

}  // namespace phishguard
