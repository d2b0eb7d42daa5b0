#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "irg/sysid.hpp"
#include "support/fixtures.hpp"

using namespace irg;
using Catch::Approx;

namespace {

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::fabs(a[k] - b[k]);
  return 0.5 * s;
}

EmpiricalObservationModel hand_model(int node, std::vector<double> healthy,
                                     std::vector<double> compromised) {
  EmpiricalObservationModel m;
  m.n_obs = static_cast<int>(healthy.size());
  m.alpha = 0.0;
  auto& rows = m.nodes[node];
  rows.freq[0] = std::move(healthy);
  rows.freq[1] = rows.freq[0];
  rows.freq[2] = std::move(compromised);
  rows.samples = {1, 1, 1};
  rows.usable = {true, true, true};
  return m;
}

}  // namespace

TEST_CASE("trace ingestion parses, validates and summarizes") {
  SECTION("empty file gives an empty trace") {
    TraceIngest in = ingest_trace_text("", 10);
    CHECK(in.records.empty());
    CHECK(in.summary.records == 0);
    CHECK(in.summary.per_class == std::array<std::size_t, 3>{0, 0, 0});
  }

  SECTION("three-row fixture round trips") {
    std::string text =
        "t,node,state_class,alert_count\n"
        "0,1,0,3\n"
        "1,1,2,9\n"
        "0,2,1,0\n";
    TraceIngest in = ingest_trace_text(text, 10);
    REQUIRE(in.records.size() == 3);
    CHECK(in.records[0].t == 0);
    CHECK(in.records[1].state_class == 2);
    CHECK(in.records[1].alert_count == 9);
    CHECK(in.records[2].node == 2);
    CHECK(in.summary.per_node.at(1) == 2);
    CHECK(in.summary.per_node.at(2) == 1);
    CHECK(in.summary.per_class == std::array<std::size_t, 3>{1, 1, 1});
  }

  SECTION("alert_count at the space size is rejected with its line number") {
    std::string text = "t,node,state_class,alert_count\n0,1,0,10\n";
    REQUIRE_THROWS_WITH(ingest_trace_text(text, 10),
                        Catch::Matchers::ContainsSubstring("line 2") &&
                            Catch::Matchers::ContainsSubstring("outside"));
  }

  SECTION("malformed rows name the offending line") {
    std::string text = "t,node,state_class,alert_count\n0,1,0,3\nnot,a,row\n";
    REQUIRE_THROWS_WITH(ingest_trace_text(text, 10),
                        Catch::Matchers::ContainsSubstring("line 3"));
    REQUIRE_THROWS_WITH(
        ingest_trace_text("t,node,state_class,alert_count\n0,1,7,3\n", 10),
        Catch::Matchers::ContainsSubstring("state_class"));
    REQUIRE_THROWS_WITH(ingest_trace_text("wrong,header\n", 10),
                        Catch::Matchers::ContainsSubstring("header"));
  }

  SECTION("config-aware ingestion rejects unknown nodes") {
    GameConfig cfg = irg_test::one_node_config();
    std::string path = irg_test::temp_path("bad_node.csv");
    write_text_file(path, "t,node,state_class,alert_count\n0,99,0,1\n");
    REQUIRE_THROWS_WITH(ingest_traces(path, cfg),
                        Catch::Matchers::ContainsSubstring("unknown node 99"));
    write_text_file(path, "t,node,state_class,alert_count\n0,1,0,1\n");
    CHECK(ingest_traces(path, cfg).records.size() == 1);
  }
}

TEST_CASE("empirical estimation follows the add-alpha formula") {
  SECTION("single record with no smoothing is a point mass") {
    std::vector<TraceRecord> recs = {{0, 1, 0, 5}};
    auto m = estimate_observation_model(recs, 8, 0.0);
    const auto& row = m.nodes.at(1).freq[0];
    CHECK(row[5] == 1.0);
    double sum = 0.0;
    for (double v : row) sum += v;
    CHECK(sum == Approx(1.0).margin(1e-12));
  }

  SECTION("raw frequencies from counts {0:3, 1:1}") {
    std::vector<TraceRecord> recs = {{0, 1, 0, 0}, {1, 1, 0, 0}, {2, 1, 0, 0},
                                     {3, 1, 0, 1}};
    auto m = estimate_observation_model(recs, 4, 0.0);
    const auto& row = m.nodes.at(1).freq[0];
    CHECK(row == std::vector<double>{0.75, 0.25, 0.0, 0.0});
  }

  SECTION("smoothing adds pseudo-counts") {
    std::vector<TraceRecord> recs = {{0, 1, 0, 0}, {1, 1, 0, 0}, {2, 1, 0, 0},
                                     {3, 1, 0, 1}};
    auto m = estimate_observation_model(recs, 4, 1.0);
    const auto& row = m.nodes.at(1).freq[0];
    CHECK(row[0] == Approx(4.0 / 8.0));
    CHECK(row[1] == Approx(2.0 / 8.0));
    CHECK(row[2] == Approx(1.0 / 8.0));
    CHECK(row[3] == Approx(1.0 / 8.0));
  }

  SECTION("estimation is count-exact: replicating records changes nothing at alpha 0") {
    std::vector<TraceRecord> base = {{0, 1, 0, 0}, {1, 1, 0, 2}, {2, 1, 2, 3},
                                     {3, 1, 1, 1}};
    std::vector<TraceRecord> scaled;
    for (int rep = 0; rep < 7; ++rep)
      for (const auto& r : base) scaled.push_back(r);
    auto a = estimate_observation_model(base, 4, 0.0);
    auto b = estimate_observation_model(scaled, 4, 0.0);
    for (int cls = 0; cls < 3; ++cls)
      CHECK(a.nodes.at(1).freq[cls] == b.nodes.at(1).freq[cls]);
  }

  SECTION("zero-sample rows are flagged and the discovered class falls back") {
    std::vector<TraceRecord> recs = {{0, 1, 0, 2}, {1, 1, 2, 3}};
    auto raw = estimate_observation_model(recs, 4, 0.0);
    const auto& rows = raw.nodes.at(1);
    CHECK_FALSE(rows.usable[1]);
    CHECK(rows.usable[0]);
    CHECK(rows.usable[2]);
    CHECK(rows.fallback[1]);
    CHECK(rows.freq[1] == rows.freq[0]);  // two-class measurement fallback

    std::vector<TraceRecord> only_cls2 = {{0, 1, 2, 3}};
    auto m = estimate_observation_model(only_cls2, 4, 0.0);
    CHECK(m.nodes.at(1).freq[0] == std::vector<double>(4, 0.0));
    CHECK_FALSE(m.nodes.at(1).fallback[1]);
    auto smoothed = estimate_observation_model(only_cls2, 4, 1.0);
    CHECK(smoothed.nodes.at(1).freq[0] == std::vector<double>(4, 0.25));
  }

  SECTION("invalid smoothing and observation bounds are rejected") {
    REQUIRE_THROWS_AS(estimate_observation_model({}, 4, -0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_observation_model({{0, 1, 0, 9}}, 4, 0.0),
                      std::out_of_range);
  }
}

TEST_CASE("estimated rows converge to the generating model") {
  ObservationModel gen = ObservationModel::synthetic_negbin(10, 4.0, {1.0, 2.5, 5.0});
  const long per_class = 100000;
  auto traces = synthesize_traces(gen, {1}, per_class, 404);
  auto est = estimate_observation_model(traces, 10, 0.0);
  for (int cls = 0; cls < 3; ++cls) {
    double tv = tv_distance(est.nodes.at(1).freq[cls], gen.row(cls));
    INFO("class " << cls << " tv " << tv);
    CHECK(tv <= 0.02);
  }
}

TEST_CASE("likelihood-ratio validation scans the stacked rows") {
  SECTION("ordered rows pass with every minor nonnegative") {
    auto m = hand_model(1, {0.7, 0.3}, {0.3, 0.7});
    auto reports = validate_mlr(m);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].ok);
    CHECK(reports[0].fraction_nonnegative == 1.0);
    CHECK(reports[0].minors == 1);
    CHECK(reports[0].worst_minor == 0.0);
  }

  SECTION("reversed rows fail and report the minor") {
    auto m = hand_model(1, {0.3, 0.7}, {0.7, 0.3});
    auto reports = validate_mlr(m);
    REQUIRE(reports.size() == 1);
    CHECK_FALSE(reports[0].ok);
    CHECK(reports[0].fraction_nonnegative == 0.0);
    CHECK(reports[0].worst_minor == Approx(0.3 * 0.3 - 0.7 * 0.7));
  }

  SECTION("the synthetic fixture is fully ordered") {
    ObservationModel gen = ObservationModel::synthetic_negbin(10, 4.0, {1.0, 2.5, 5.0});
    EmpiricalObservationModel m;
    m.n_obs = 10;
    auto& rows = m.nodes[7];
    for (int cls = 0; cls < 3; ++cls) {
      rows.freq[cls] = gen.row(cls);
      rows.samples[cls] = 1;
      rows.usable[cls] = true;
    }
    auto reports = validate_mlr(m);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].fraction_nonnegative == 1.0);
    CHECK(reports[0].minors == 45);
    CHECK(reports[0].ok);
  }

  SECTION("empty stacked rows are a caller error") {
    EmpiricalObservationModel m;
    m.n_obs = 2;
    m.nodes[1].freq = {std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0},
                       std::vector<double>{0.5, 0.5}};
    REQUIRE_THROWS_AS(validate_mlr(m), std::invalid_argument);
  }
}

TEST_CASE("model export and import round trip through the csv format") {
  ObservationModel gen = ObservationModel::synthetic_negbin(6, 4.0, {1.0, 2.0, 4.0});
  auto traces = synthesize_traces(gen, {1, 2}, 500, 11);
  auto est = estimate_observation_model(traces, 6, 1.0);

  std::string csv = export_model_csv(est);
  ModelRows rows = import_model_csv(csv);
  REQUIRE(rows.size() == 3);  // pooled block + two nodes
  REQUIRE(rows.count(kPooledNode) == 1);
  for (int node : {1, 2})
    for (int cls = 0; cls < 3; ++cls)
      CHECK(rows.at(node)[cls] == est.nodes.at(node).freq[cls]);

  SECTION("the pooled block applies smoothing to summed counts") {
    std::array<std::vector<long>, 3> counts;
    for (auto& c : counts) c.assign(6, 0);
    std::array<long, 3> samples{};
    for (const auto& [node, nr] : est.nodes) {
      (void)node;
      for (int cls = 0; cls < 3; ++cls) {
        samples[cls] += nr.samples[cls];
        for (int o = 0; o < 6; ++o) counts[cls][o] += nr.counts[cls][o];
      }
    }
    for (int cls = 0; cls < 3; ++cls)
      for (int o = 0; o < 6; ++o)
        CHECK(rows.at(kPooledNode)[cls][o] ==
              Approx((counts[cls][o] + 1.0) / (samples[cls] + 6.0)).margin(1e-15));
  }

  SECTION("load_empirical_model builds a filter-ready model from the pooled block") {
    std::string path = irg_test::temp_path("model.csv");
    write_text_file(path, csv);
    ObservationModel m = load_empirical_model(path);
    CHECK(m.n_obs() == 6);
    for (int cls = 0; cls < 3; ++cls) {
      double sum = 0.0;
      for (int o = 0; o < 6; ++o) sum += m.likelihood(cls, o);
      CHECK(sum == Approx(1.0).margin(1e-12));
      for (int o = 0; o < 6; ++o) CHECK(m.likelihood(cls, o) > 0.0);
    }
  }

  SECTION("import rejects corrupt inputs") {
    REQUIRE_THROWS_WITH(import_model_csv("bogus\n"),
                        Catch::Matchers::ContainsSubstring("header"));
    REQUIRE_THROWS_WITH(import_model_csv(std::string(kModelHeader) + "\n1,5,0,0.5\n"),
                        Catch::Matchers::ContainsSubstring("state_class"));
  }
}

TEST_CASE("synthesized traces are deterministic and csv-stable") {
  ObservationModel gen = ObservationModel::synthetic_negbin(5, 4.0, {1.0, 2.0, 3.0});
  auto a = synthesize_traces(gen, {1, 2}, 50, 9);
  auto b = synthesize_traces(gen, {1, 2}, 50, 9);
  REQUIRE(a.size() == 2 * 3 * 50);
  bool same = true;
  for (std::size_t k = 0; k < a.size(); ++k)
    same = same && a[k].t == b[k].t && a[k].node == b[k].node &&
           a[k].state_class == b[k].state_class && a[k].alert_count == b[k].alert_count;
  CHECK(same);

  TraceIngest round = ingest_trace_text(traces_to_csv(a), 5);
  CHECK(round.records.size() == a.size());
  CHECK(round.summary.per_class[0] == 100);
  CHECK(round.summary.per_node.at(2) == 150);
}
