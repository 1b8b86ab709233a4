#include <doctest.h>

#include <fstream>
#include <set>

#include "faasguard/harness/harness.hpp"

using namespace faasguard;

#ifndef FAASGUARD_FIXTURE_DIR
#define FAASGUARD_FIXTURE_DIR "fixtures"
#endif

namespace {

std::string fixture_path(const std::string& name) {
  return std::string(FAASGUARD_FIXTURE_DIR) + "/" + name;
}

harness::ScenarioConfig tiny_config(const std::string& attacks_json = "[]") {
  return harness::parse_scenario(R"({
    "seed": 5,
    "functions": [
      {"function_id": "fn", "tenant_id": "t", "memory_mb": 512,
       "timeout_ms": 30000, "cold_init_ms": 1000, "warm_base_ms": 300,
       "model_ref": "m1", "role_id": "r"}
    ],
    "models": [
      {"artifact_id": "m1", "dims": 2, "classes": 2, "n": 40,
       "gen_seed": 3, "train_seed": 3, "epochs": 100, "learning_rate": 0.05}
    ],
    "shield": {"enabled": true,
               "checks": {"anomaly": true, "adversarial": false,
                          "extraction": true, "rate_limit": false,
                          "env": true, "event": true}},
    "benign": {"clients": 4, "rate_per_s": 2.0, "duration_ms": 20000,
               "functions": ["fn"], "complexity": 1.0},
    "attacks": )" + attacks_json + "}");
}

}  // namespace

TEST_CASE("parse_scenario: unknown keys rejected at every level") {
  CHECK_THROWS_AS(harness::parse_scenario(R"({"sead": 1})"), harness::ConfigError);
  CHECK_THROWS_AS(harness::parse_scenario(R"({"platform": {"concurency_cap": 4}})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::parse_scenario(
                      R"({"shield": {"checks": {"anomoly": true}}})"),
                  harness::ConfigError);
  CHECK_THROWS_AS(harness::parse_scenario("not json"), harness::ConfigError);
  CHECK_THROWS_AS(harness::parse_scenario(
                      R"({"benign": {"clients": 1, "functions": ["ghost"]}})"),
                  harness::ConfigError);
  // a valid minimal config parses
  const auto cfg = harness::parse_scenario(R"({"seed": 9})");
  CHECK(cfg.seed == 9);
}

TEST_CASE("run_scenario: zero attacks reports N/A rates but a concrete FPR") {
  const auto outcome = harness::run_scenario(tiny_config());
  CHECK(outcome.report.per_attack.empty());
  CHECK(outcome.report.benign_requests > 0);
  REQUIRE(outcome.report.false_positive_rate.has_value());
  CHECK(*outcome.report.false_positive_rate <= 0.05);
  CHECK(outcome.report.shield_off_verdicts == 0);

  const auto j = harness::report_to_json(outcome.report);
  CHECK(j.at("paper_shape").at("table3").at("detection_efficacy").is_null());
}

TEST_CASE("run_scenario: attacks-only with every request flagged reports rate 1.0") {
  // event-injection requests are all rejected by the shield gate
  auto cfg = harness::parse_scenario(R"({
    "seed": 5,
    "functions": [
      {"function_id": "fn", "tenant_id": "t", "warm_base_ms": 300,
       "timeout_ms": 30000, "role_id": "r"}
    ],
    "shield": {"enabled": true},
    "attacks": [
      {"kind": "event_injection", "seed": 1, "start_ms": 0,
       "params": {"function_id": "fn",
                   "variants": ["oversized_payload", "malformed_structure",
                                 "nested_bomb", "wrong_trigger_type"]}}
    ]
  })");
  const auto outcome = harness::run_scenario(cfg);
  const auto& m = outcome.report.per_attack.at("event_injection");
  CHECK(m.requests == 4);
  CHECK(m.flagged_requests == 4);
  CHECK(*m.detection_rate_requests == 1.0);
  CHECK(*m.detection_rate_campaigns == 1.0);
  CHECK(outcome.report.benign_requests == 0);
  CHECK(!outcome.report.false_positive_rate.has_value());
}

TEST_CASE("pairing integrity: both passes see the same request id multiset") {
  const auto outcome = harness::run_scenario(tiny_config());
  std::multiset<std::string> on_ids, off_ids;
  for (const auto& r : outcome.on.results) on_ids.insert(r.request_id);
  for (const auto& r : outcome.off.results) off_ids.insert(r.request_id);
  CHECK(on_ids == off_ids);
  CHECK(on_ids.size() == outcome.built.requests.size());
}

TEST_CASE("ground-truth firewall: flipping every label leaves verdicts unchanged") {
  const auto cfg = tiny_config();
  auto built = harness::build_scenario(cfg);
  const auto baseline = harness::run_pass(cfg, built, true);

  for (auto& req : built.requests) {
    req.ground_truth = req.ground_truth.is_attack
                           ? sim::GroundTruth::benign()
                           : sim::GroundTruth::attack(sim::AttackKind::kExtraction);
  }
  const auto mutated = harness::run_pass(cfg, built, true);
  CHECK(baseline.log_bytes == mutated.log_bytes);
}

TEST_CASE("shield-off pass emits no records or verdicts") {
  const auto outcome = harness::run_scenario(tiny_config());
  CHECK(outcome.off.records.empty());
  CHECK(outcome.off.log_bytes.empty());
  CHECK(outcome.off.alerts.empty());
}

TEST_CASE("compute_overhead: arithmetic and emptiness") {
  CHECK(!harness::compute_overhead({}, {}).has_value());
  CHECK(*harness::compute_overhead({5, 5}, {5, 5}) == 0.0);
  const auto ten_percent = harness::compute_overhead({110.0, 220.0}, {100.0, 200.0});
  CHECK(*ten_percent == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("warm overhead matches the analytic shield cost on the baseline fixture") {
  auto cfg = harness::load_scenario_file(fixture_path("baseline.json"));
  const auto outcome = harness::run_scenario(cfg);
  // 4 enabled checks x 2 ms over a 300 ms warm path
  const double analytic = 4.0 * 2.0 / 300.0;
  REQUIRE(outcome.report.overhead_warm.has_value());
  CHECK(std::abs(*outcome.report.overhead_warm - analytic) <= 0.001);
}

TEST_CASE("report determinism: byte-identical output for identical config+seed") {
  auto cfg = harness::load_scenario_file(fixture_path("baseline.json"));
  const auto a = harness::run_scenario(cfg);
  const auto b = harness::run_scenario(cfg);
  CHECK(harness::render_report(a.report, harness::ReportFormat::kJson) ==
        harness::render_report(b.report, harness::ReportFormat::kJson));
  CHECK(a.on.log_bytes == b.on.log_bytes);
}

TEST_CASE("report JSON round trip and table rendering") {
  const auto outcome = harness::run_scenario(tiny_config(R"([
    {"kind": "reuse_leak", "seed": 2, "start_ms": 3000,
     "params": {"function_id": "fn", "marker": "m", "gap_ms": 1000}}
  ])"));
  const auto j = harness::report_to_json(outcome.report);
  const auto back = harness::report_from_json(j);
  CHECK(harness::report_to_json(back) == j);

  const std::string table =
      harness::render_report(outcome.report, harness::ReportFormat::kTable);
  CHECK(table.find("reuse_leak") != std::string::npos);
  CHECK(table.find("fpr") != std::string::npos);

  // empty attack set renders N/A
  const auto empty = harness::run_scenario(tiny_config());
  const std::string na_table =
      harness::render_report(empty.report, harness::ReportFormat::kTable);
  CHECK(na_table.find("N/A") != std::string::npos);
}

TEST_CASE("golden report for the baseline fixture") {
  auto cfg = harness::load_scenario_file(fixture_path("baseline.json"));
  const auto outcome = harness::run_scenario(cfg);
  const std::string rendered =
      harness::render_report(outcome.report, harness::ReportFormat::kJson);

  std::ifstream golden_file(fixture_path("golden/baseline_report.json"),
                            std::ios::binary);
  REQUIRE(golden_file.good());
  std::string golden((std::istreambuf_iterator<char>(golden_file)),
                     std::istreambuf_iterator<char>());
  CHECK(rendered == golden);
}

TEST_CASE("latency stats use nearest-rank percentiles") {
  std::vector<double> samples;
  for (int i = 1; i <= 100; ++i) samples.push_back(double(i));
  const auto st = harness::latency_stats(samples);
  CHECK(st.p50 == 50.0);
  CHECK(st.p95 == 95.0);
  CHECK(st.mean == doctest::Approx(50.5));
  CHECK(harness::latency_stats({}).count == 0);
}
