// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "fleet/store.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

namespace fleet {
namespace {

using testing::sample_record;

TelemetryRecord at(std::int64_t ts, const std::string& device = "CI-205-DDE") {
  auto r = sample_record();
  r.device_id = device;
  r.device_timestamp = ts;
  r.fix.timestamp = ts;
  return r;
}

TEST(Append, SequenceNumbersPerDevice) {
  TelemetryStore store;
  EXPECT_EQ(store.append({at(100), 101, 0}), 1u);
  EXPECT_EQ(store.append({at(200), 201, 0}), 2u);
  EXPECT_EQ(store.append({at(100, "OTHER"), 101, 0}), 1u);
}

TEST(Append, ReadYourWrites) {
  TelemetryStore store;
  store.append({sample_record(), 1652719558, 0});
  const auto page = store.query({"CI-205-DDE", 0, 2000000000}, 1652719600);
  ASSERT_EQ(page.rows.size(), 1u);
  EXPECT_EQ(page.rows[0].record, sample_record());
  EXPECT_EQ(page.rows[0].receipt_unix, 1652719558);
  EXPECT_EQ(page.rows[0].seq, 1u);
}

TEST(Append, UniqueSkipsDuplicateDeviceTimestamp) {
  TelemetryStore store;
  EXPECT_TRUE(store.append_unique(at(100), 101).inserted);
  const auto dup = store.append_unique(at(100), 150);
  EXPECT_FALSE(dup.inserted);
  EXPECT_EQ(dup.seq, 1u);
  EXPECT_EQ(store.size("CI-205-DDE"), 1u);
}

TEST(Query, EmptyStoreAndUnknownDevice) {
  TelemetryStore store;
  QueryRequest q;
  q.device_id = "nobody";
  auto page = store.query(q, 1000000);
  EXPECT_TRUE(page.rows.empty());
  EXPECT_EQ(page.total, 0u);
  store.append({at(100), 101, 0});
  EXPECT_EQ(store.query({"nobody", 0, 1000}, 1000).total, 0u);
}

TEST(Query, DefaultWindowIsSevenDaysEndingNow) {
  TelemetryStore store;
  const std::int64_t now = 1652719541;
  store.append({at(now - kDefaultQueryWindowS - 1), now, 0});
  store.append({at(now - kDefaultQueryWindowS), now, 0});
  store.append({at(now), now, 0});
  store.append({at(now + 1), now, 0});
  QueryRequest q;
  q.device_id = "CI-205-DDE";
  EXPECT_EQ(store.query(q, now).total, 2u);
  EXPECT_EQ(q.page_size, 15);
}

TEST(Query, RejectsBadRequests) {
  TelemetryStore store;
  EXPECT_THROW(store.query({"d", 10, 5}, 0), QueryError);
  QueryRequest q{"d", 0, 10, 0, 15};
  EXPECT_THROW(store.query(q, 0), QueryError);
  q.page = 1;
  q.page_size = 0;
  EXPECT_THROW(store.query(q, 0), QueryError);
}

TEST(Query, NewestFirstPagination) {
  TelemetryStore store;
  std::vector<std::int64_t> ts(1525);
  for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = 1652000000 + static_cast<std::int64_t>(i) * 275;
  std::mt19937_64 rng(1);
  auto shuffled = ts;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto t : shuffled) store.append({at(t), t + 5, 0});

  QueryRequest q{"CI-205-DDE", 0, 2000000000, 1, 15};
  auto first = store.query(q, 0);
  EXPECT_EQ(first.rows.size(), 15u);
  EXPECT_EQ(first.total, 1525u);
  EXPECT_EQ(first.footer(), "1 - 15 of 1525");
  EXPECT_EQ(first.rows.front().record.device_timestamp, ts.back());

  q.page = 102;
  auto last = store.query(q, 0);
  EXPECT_EQ(last.rows.size(), 10u);
  EXPECT_EQ(last.footer(), "1516 - 1525 of 1525");
  q.page = 103;
  EXPECT_TRUE(store.query(q, 0).rows.empty());
  EXPECT_EQ(store.query(q, 0).total, 1525u);

  // Brute-force oracle: descending sort then slice.
  auto oracle = ts;
  std::sort(oracle.rbegin(), oracle.rend());
  for (std::int64_t size : {1, 7, 15, 100, 2000}) {
    std::vector<std::int64_t> concat;
    for (std::int64_t page = 1;; ++page) {
      auto p = store.query({"CI-205-DDE", 0, 2000000000, page, size}, 0);
      ASSERT_EQ(p.total, 1525u);
      if (p.rows.empty()) break;
      for (const auto& r : p.rows) concat.push_back(r.record.device_timestamp);
    }
    EXPECT_EQ(concat, oracle) << "page_size " << size;
  }
}

TEST(Latest, MaximumDeviceTimestamp) {
  TelemetryStore store;
  EXPECT_FALSE(store.latest("CI-205-DDE"));
  store.append({at(1652719541), 1, 0});
  EXPECT_EQ(store.latest("CI-205-DDE")->record.device_timestamp, 1652719541);
  store.append({at(1652716114), 2, 0});
  EXPECT_EQ(store.latest("CI-205-DDE")->record.device_timestamp, 1652719541);
}

TEST(ExportCsv, CaptureGolden) {
  TelemetryStore store;
  for (const auto& s : testing::capture_ascending()) store.append(s);
  std::ostringstream out;
  store.export_csv({"CI-205-DDE", 1652716114, 1652719541}, 0, out);
  EXPECT_EQ(out.str(), testing::read_file(testing::data_path("dashboard_2022-05-16.expected.csv")));
  EXPECT_EQ(testing::lines_of(out.str()).size(), 14u);
}

TEST(ExportCsv, EmptyResultIsHeaderOnly) {
  TelemetryStore store;
  std::ostringstream out;
  store.export_csv({"CI-205-DDE", 0, 10}, 0, out);
  EXPECT_EQ(out.str(), std::string(kCsvHeader) + "\n");
}

TEST(ExportCsv, ReparsesToIdenticalRecords) {
  TelemetryStore store;
  const auto input = testing::capture_ascending();
  for (const auto& s : input) store.append(s);
  std::ostringstream out;
  store.export_csv({"CI-205-DDE", 0, 2000000000}, 0, out);
  auto lines = testing::lines_of(out.str());
  std::vector<TelemetryRecord> parsed;
  for (std::size_t i = 1; i < lines.size(); ++i) parsed.push_back(parse_csv_row(lines[i]).record);
  std::reverse(parsed.begin(), parsed.end());
  ASSERT_EQ(parsed.size(), input.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) EXPECT_EQ(parsed[i], input[i].record);
}

TEST(Persistence, RebuildsIndexOnStartup) {
  testing::TempDir dir;
  {
    TelemetryStore store(dir.path());
    for (const auto& s : testing::capture_ascending()) store.append(s);
    store.append({at(100, "weird/id %"), 101, 0});
  }
  TelemetryStore reopened(dir.path());
  EXPECT_EQ(reopened.size("CI-205-DDE"), 13u);
  EXPECT_EQ(reopened.size("weird/id %"), 1u);
  EXPECT_EQ(reopened.records("CI-205-DDE"), testing::capture_ascending());
  EXPECT_EQ(reopened.append({at(1652719999), 1652720000, 0}), 14u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "weird%2Fid%20%25.ndjson"));
}

TEST(Persistence, NdjsonOneRecordPerLine) {
  testing::TempDir dir;
  TelemetryStore store(dir.path());
  store.append({sample_record(), 1652719558, 0});
  EXPECT_EQ(testing::read_file(store.file_for("CI-205-DDE")),
            R"({"seq":1,"receipt_unix":1652719558,"record":)" + encode_payload(sample_record()) + "}\n");
}

TEST(Persistence, TornFinalLineIsDiscarded) {
  testing::TempDir dir;
  {
    TelemetryStore store(dir.path());
    store.append({at(100), 101, 0});
  }
  {
    std::ofstream f(dir.path() / "CI-205-DDE.ndjson", std::ios::app);
    f << R"({"seq":2,"receipt_un)";
  }
  TelemetryStore store(dir.path());
  EXPECT_EQ(store.size("CI-205-DDE"), 1u);
  EXPECT_EQ(store.append({at(200), 201, 0}), 2u);
  TelemetryStore again(dir.path());
  EXPECT_EQ(again.size("CI-205-DDE"), 2u);
}

TEST(Persistence, CorruptLineIsAnError) {
  testing::TempDir dir;
  {
    std::ofstream f(dir.path() / "x.ndjson");
    f << "{garbage}\n";
  }
  EXPECT_THROW(TelemetryStore{dir.path()}, StoreError);
}

TEST(Persistence, WriteFailureLeavesIndexUnchanged) {
  testing::TempDir dir;
  TelemetryStore store(dir.path());
  std::filesystem::create_directory(store.file_for("CI-205-DDE"));  // blocks the log file
  EXPECT_THROW(store.append({at(100), 101, 0}), StoreError);
  EXPECT_EQ(store.size("CI-205-DDE"), 0u);
}

TEST(Properties, AppendOnlyHistoryNeverChanges) {
  TelemetryStore store;
  std::mt19937_64 rng(8);
  std::vector<StoredRecord> seen;
  for (int round = 0; round < 20; ++round) {
    for (int i = 0; i < 10; ++i) {
      auto r = testing::random_record(rng);
      r.device_id = "D" + std::to_string(i % 3);
      store.append({r, 1, 0});
    }
    for (const auto& s : seen) {
      const auto now = store.records(s.record.device_id);
      ASSERT_EQ(now.at(s.seq - 1), s);
    }
    for (const auto& d : store.devices()) {
      auto recs = store.records(d);
      seen.insert(seen.end(), recs.begin(), recs.end());
    }
  }
}

}  // namespace
}  // namespace fleet
