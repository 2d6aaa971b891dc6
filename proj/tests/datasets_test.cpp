#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "phishguard/data_files.hpp"
#include "phishguard/dataset.hpp"
#include "phishguard/error.hpp"
#include "phishguard/features.hpp"
#include "phishguard/generator.hpp"
#include "phishguard/url.hpp"
#include "support.hpp"

namespace pg = phishguard;

namespace {

pg::Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const pg::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return pg::Errc::Format;
}

std::string canonical_header() {
  std::string h;
  for (auto n : pg::kFeatureNames) h += std::string(n) + ",";
  return h + "label\n";
}

std::string canonical_row(int seed, int label) {
  std::string r;
  for (std::size_t j = 0; j < pg::kFeatureCount; ++j) r += std::to_string((static_cast<int>(j) + seed) % 3 - 1) + ",";
  return r + std::to_string(label) + "\n";
}

}  // namespace

TEST(LoadCsv, ResultColumnMapsToBinaryLabel) {
  const auto ds = pg::parse_csv("a,b,Result\n1,0,-1\n0,1,1\n", pg::Provenance::UCI);
  ASSERT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.labels(0), 0);
  EXPECT_EQ(ds.labels(1), 1);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.provenance[0], pg::Provenance::UCI);
}

TEST(LoadCsv, FourIdenticalRowsCollapseToOne) {
  pg::LoadReport report;
  const auto ds = pg::parse_csv("a,label\n1,1\n1,1\n1,1\n1,1\n", pg::Provenance::Unknown, &report);
  EXPECT_EQ(ds.size(), 1);
  EXPECT_EQ(report.rows_read, 4u);
  EXPECT_EQ(report.duplicates_removed, 3u);
}

TEST(LoadCsv, DistinctRowsAreKeptInOrder) {
  const auto ds = pg::parse_csv("a,label\n3,1\n1,0\n2,1\n", pg::Provenance::Unknown);
  ASSERT_EQ(ds.size(), 3);
  EXPECT_EQ(ds.features(0, 0), 3);
  EXPECT_EQ(ds.features(2, 0), 2);
}

TEST(LoadCsv, SameFeaturesDifferentLabelAreNotDuplicates) {
  const auto ds = pg::parse_csv("a,label\n1,1\n1,0\n", pg::Provenance::Unknown);
  EXPECT_EQ(ds.size(), 2);
}

TEST(LoadCsv, Errors) {
  EXPECT_EQ(code_of([] { pg::parse_csv("a,b\n1,2\n", pg::Provenance::Unknown); }), pg::Errc::MissingLabelColumn);
  EXPECT_EQ(code_of([] { pg::parse_csv("a,label\nx,1\n", pg::Provenance::Unknown); }), pg::Errc::NonNumericCell);
  EXPECT_EQ(code_of([] { pg::parse_csv("", pg::Provenance::Unknown); }), pg::Errc::EmptyDataset);
  EXPECT_EQ(code_of([] { pg::parse_csv("a,label\n", pg::Provenance::Unknown); }), pg::Errc::EmptyDataset);
  EXPECT_EQ(code_of([] { pg::parse_csv("a,Result\n1,0\n", pg::Provenance::Unknown); }), pg::Errc::Format);
  EXPECT_EQ(code_of([] { pg::parse_csv("a,label\n1,-1\n", pg::Provenance::Unknown); }), pg::Errc::Format);
}

TEST(LoadCsv, NonNumericCellNamesRowAndColumn) {
  try {
    pg::parse_csv("a,b,label\n1,2,0\n1,zz,1\n", pg::Provenance::Unknown);
    FAIL();
  } catch (const pg::Error& e) {
    const std::string msg = e.what();
    EXPECT_EQ(e.code(), pg::Errc::NonNumericCell);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column b"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, IdentifierColumnsAreDropped) {
  const auto ds = pg::parse_csv("index,a,label\n1,5,1\n2,5,1\n", pg::Provenance::Unknown);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a"}));
  EXPECT_EQ(ds.size(), 1);
}

TEST(LoadCsv, ArffMatchesCsv) {
  const std::string arff =
      "@relation x\n@attribute a {-1,0,1}\n@attribute b {-1,1}\n@attribute Result {-1,1}\n@data\n"
      "1,-1,1\n0,1,-1\n1,-1,1\n";
  const auto a = pg::parse_arff(arff, pg::Provenance::UCI);
  const auto c = pg::parse_csv("a,b,Result\n1,-1,1\n0,1,-1\n", pg::Provenance::UCI);
  EXPECT_EQ(a.feature_names, c.feature_names);
  EXPECT_EQ(a.features, c.features);
  EXPECT_EQ(a.labels, c.labels);
}

TEST(LoadCsv, ReserializeIsIdempotent) {
  const std::string text = canonical_header() + canonical_row(0, 1) + canonical_row(1, 0) + canonical_row(0, 1);
  const auto once = pg::parse_csv(text, pg::Provenance::Unknown);
  const auto csv = pg::to_csv(once);
  const auto twice = pg::parse_csv(csv, pg::Provenance::Unknown);
  EXPECT_EQ(pg::to_csv(twice), csv);
  EXPECT_EQ(once.features, twice.features);
  EXPECT_EQ(once.labels, twice.labels);
}

TEST(ClassDistribution, Counts) {
  const auto one = pg::parse_csv("a,label\n1,1\n", pg::Provenance::Unknown);
  EXPECT_EQ(pg::class_distribution(one), std::make_pair(std::size_t{0}, std::size_t{1}));
  const auto ten = pgtest::ternary_dataset(10, 2, 1);
  Eigen::VectorXi y(10);
  y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  const auto balanced = pg::make_dataset(ten.feature_names, ten.features, y);
  EXPECT_EQ(pg::class_distribution(balanced), std::make_pair(std::size_t{5}, std::size_t{5}));
}

TEST(AlignFeatures, AliasesUnifyToCanonicalNames) {
  const auto a = pg::parse_csv("url_length,having_ip_address,label\n10,1,1\n", pg::Provenance::GenAI);
  const auto b = pg::parse_csv("having_IP_Address,URL_Length,extra,label\n-1,30,7,0\n", pg::Provenance::OpenPhish);
  const auto out = pg::align_features({a, b}, {"URL_Length", "having_IP_Address"});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& ds : out) EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"URL_Length", "having_IP_Address"}));
  EXPECT_EQ(out[0].features(0, 0), 10);
  EXPECT_EQ(out[1].features(0, 0), 30);
  EXPECT_EQ(out[1].features(0, 1), -1);
}

TEST(AlignFeatures, CanonicalListGivesTwentyThreeColumns) {
  std::vector<pg::Dataset> inputs;
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(pg::parse_csv(canonical_header() + canonical_row(i, i % 2), pg::Provenance::Unknown));
  }
  for (const auto& ds : pg::align_features(inputs, pg::canonical_feature_names())) EXPECT_EQ(ds.dimension(), 23);
}

TEST(AlignFeatures, SingleFeatureAndUnmappable) {
  const auto ds = pg::parse_csv("a,b,label\n1,2,1\n", pg::Provenance::Unknown);
  EXPECT_EQ(pg::align_features({ds}, {"b"}).front().dimension(), 1);
  try {
    pg::align_features({ds}, {"nonexistent"});
    FAIL();
  } catch (const pg::Error& e) {
    EXPECT_EQ(e.code(), pg::Errc::UnmappableFeature);
    EXPECT_NE(std::string(e.what()).find("nonexistent"), std::string::npos);
  }
}

namespace {

pg::GenerationConfig base_config(std::size_t n, std::uint64_t seed = 5) {
  pg::GenerationConfig cfg;
  cfg.legit_urls = {"https://example.com", "https://paypal.com/signin", "https://bank.co.uk/account"};
  cfg.target_count = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(GenerateSyntheticUrls, FiveDistinctVariantsOfOneBase) {
  auto cfg = base_config(5);
  cfg.legit_urls = {"https://example.com"};
  const auto urls = pg::generate_synthetic_urls(cfg);
  ASSERT_EQ(urls.size(), 5u);
  std::set<std::string> unique;
  for (const auto& u : urls) {
    unique.insert(pg::normalize_url(u));
    EXPECT_NE(pg::normalize_url(u), pg::normalize_url("https://example.com"));
  }
  EXPECT_EQ(unique.size(), 5u);
}

TEST(GenerateSyntheticUrls, AtRedirectRuleEmbedsAt) {
  auto cfg = base_config(1);
  cfg.rules = {pg::TransformRule::AtRedirect};
  const auto urls = pg::generate_synthetic_urls(cfg);
  ASSERT_EQ(urls.size(), 1u);
  EXPECT_NE(urls[0].find('@'), std::string::npos);
}

TEST(GenerateSyntheticUrls, DeterministicAndReparseable) {
  const auto cfg = base_config(200);
  const auto a = pg::generate_synthetic_urls(cfg);
  EXPECT_EQ(a, pg::generate_synthetic_urls(cfg));
  for (const auto& u : a) EXPECT_NO_THROW(pg::parse_url(u)) << u;
  EXPECT_NE(a, pg::generate_synthetic_urls(base_config(200, 6)));
}

TEST(GenerateSyntheticUrls, EveryRuleIsAvailable) {
  for (auto rule : pg::all_rules()) {
    auto cfg = base_config(3);
    cfg.rules = {rule};
    EXPECT_EQ(pg::generate_synthetic_urls(cfg).size(), 3u) << pg::rule_name(rule);
    EXPECT_EQ(pg::parse_rule(pg::rule_name(rule)), rule);
  }
  EXPECT_EQ(pg::all_rules().size(), 6u);
}

TEST(GenerateSyntheticUrls, RuleOutputsShowTheirSignature) {
  const auto run = [](pg::TransformRule rule) {
    auto cfg = base_config(10);
    cfg.rules = {rule};
    return pg::generate_synthetic_urls(cfg);
  };
  for (const auto& u : run(pg::TransformRule::IpHost)) {
    EXPECT_TRUE(pg::is_ipv4_host(pg::parse_url(u).host)) << u;
  }
  for (const auto& u : run(pg::TransformRule::SecurityWord)) {
    const auto p = pg::parse_url(u).path + pg::parse_url(u).query;
    EXPECT_FALSE(p.empty()) << u;
  }
  for (const auto& u : run(pg::TransformRule::HyphenBrand)) {
    EXPECT_NE(pg::parse_url(u).host.find('-'), std::string::npos) << u;
  }
}

TEST(GenerateSyntheticUrls, ExhaustedRuleSpace) {
  // One base with a brand label admits 2 x 18 hyphenated variants.
  auto cfg = base_config(100);
  cfg.legit_urls = {"https://example.com"};
  cfg.rules = {pg::TransformRule::HyphenBrand};
  EXPECT_EQ(code_of([&] { pg::generate_synthetic_urls(cfg); }), pg::Errc::ExhaustedRuleSpace);
}

TEST(GenerateSyntheticUrls, EmptyInputsRejected) {
  auto cfg = base_config(5);
  cfg.legit_urls.clear();
  EXPECT_EQ(code_of([&] { pg::generate_synthetic_urls(cfg); }), pg::Errc::InvalidArgument);
}

TEST(GenerateSyntheticUrls, ReportMatchesExtractorOracle) {
  const auto urls = pg::generate_synthetic_urls(base_config(300));
  const auto features = pg::ternary_lexical_features();
  const auto report = pg::count_feature_triggers(urls, features);
  ASSERT_EQ(report.size(), features.size());
  const auto& tables = pg::LexicalTables::bundled();
  for (const auto& [feature, count] : report) {
    std::size_t oracle = 0;
    for (const auto& u : urls) {
      if (pg::extract_lexical(pg::parse_url(u), tables).get(feature) == 1.0) ++oracle;
    }
    EXPECT_EQ(count, oracle) << feature;
  }
}

TEST(GenerateFeatureRichDomains, AtSymbolTarget) {
  pg::GenerationConfig cfg;
  cfg.per_feature_target = 3;
  cfg.features = {"having_At_Symbol"};
  cfg.seed = 9;
  const auto r = pg::generate_feature_rich_domains(cfg);
  std::size_t with_at = 0;
  for (const auto& u : r.phishing) with_at += u.find('@') != std::string::npos;
  EXPECT_GE(with_at, 3u);
  ASSERT_EQ(r.report.size(), 1u);
  EXPECT_GE(r.report[0].second, 3u);
}

TEST(GenerateFeatureRichDomains, TwoFeaturesVerifiedByExtractor) {
  pg::GenerationConfig cfg;
  cfg.per_feature_target = 2;
  cfg.features = {"Prefix_Suffix", "having_IP_Address"};
  cfg.seed = 4;
  const auto r = pg::generate_feature_rich_domains(cfg);
  EXPECT_GE(r.phishing.size(), 4u);
  EXPECT_EQ(r.phishing.size(), r.legitimate.size());
  EXPECT_EQ(r.report, pg::count_feature_triggers(r.phishing, cfg.features));
  for (const auto& [f, count] : r.report) EXPECT_GE(count, 2u) << f;
}

TEST(GenerateFeatureRichDomains, DefaultsCoverEveryTernaryLexicalFeature) {
  pg::GenerationConfig cfg;
  cfg.per_feature_target = 2;
  cfg.seed = 1;
  const auto r = pg::generate_feature_rich_domains(cfg);
  const auto features = pg::ternary_lexical_features();
  EXPECT_EQ(features.size(), 7u);
  ASSERT_EQ(r.report.size(), features.size());
  for (const auto& [f, count] : r.report) EXPECT_GE(count, 2u) << f;
  EXPECT_EQ(r.phishing, pg::generate_feature_rich_domains(cfg).phishing);
}

TEST(GenerateFeatureRichDomains, RejectsNonLexicalFeature) {
  pg::GenerationConfig cfg;
  cfg.features = {"Iframe"};
  EXPECT_EQ(code_of([&] { pg::generate_feature_rich_domains(cfg); }), pg::Errc::InvalidArgument);
  cfg.features = {"URL_Length"};
  EXPECT_EQ(code_of([&] { pg::generate_feature_rich_domains(cfg); }), pg::Errc::InvalidArgument);
}

TEST(NormalizeUrl, LowercasesAndCollapses) {
  EXPECT_EQ(pg::normalize_url("HTTP://A.com//x///y/"), "http://a.com/x/y");
  EXPECT_EQ(pg::format_feature_report({{"a", 2}, {"b", 0}}), "a 2\nb 0\n");
}

TEST(DataFiles, EnvironmentOverridesDataDir) {
  const auto dir = std::filesystem::temp_directory_path() / "pg_data_dir_test";
  std::filesystem::create_directories(dir);
  pg::write_text_file(dir / "list.txt", "# comment\n a \n\nb\n");
  EXPECT_EQ(pg::read_list_file(dir / "list.txt"), (std::vector<std::string>{"a", "b"}));
  setenv("PHISHGUARD_DATA_DIR", dir.c_str(), 1);
  EXPECT_EQ(pg::data_dir(), dir);
  unsetenv("PHISHGUARD_DATA_DIR");
  EXPECT_NE(pg::data_dir(), dir);
}
