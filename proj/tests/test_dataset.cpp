#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "beatnet/dataset.hpp"
#include "beatnet/digest.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/rng.hpp"
#include "support/synth_ecg.hpp"
#include "support/wfdb_encode.hpp"

using namespace beatnet;

namespace {

std::filesystem::path fresh_dir(const char* tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   (std::string("beatnet_ds_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<Beat> random_beats(uint64_t seed, int count, int n_classes) {
  Rng rng(seed);
  std::vector<Beat> beats(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Beat& b = beats[static_cast<size_t>(i)];
    for (float& s : b.samples) s = static_cast<float>(rng.uniform());
    b.label = static_cast<int>(rng.below(static_cast<uint64_t>(n_classes)));
    b.subject = "rec" + std::to_string(i % 3);
    b.id = b.subject + ":w" + std::to_string(i / 3) + ":p" + std::to_string(i);
    b.peak_index = i;
    b.abs_peak_index = 100 * i;
  }
  return beats;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("beats CSV round-trips float samples bit for bit") {
  const auto dir = fresh_dir("csv");
  const auto path = (dir / "beats.csv").string();
  const auto beats = random_beats(51, 40, 5);

  write_beats_csv(path, beats);
  const BeatDataset ds = read_beats_csv(path, Task::Arrhythmia);

  REQUIRE(ds.beats.size() == beats.size());
  for (size_t i = 0; i < beats.size(); ++i) {
    CHECK(ds.beats[i].id == beats[i].id);
    CHECK(ds.beats[i].subject == beats[i].subject);
    CHECK(ds.beats[i].label == beats[i].label);
    CHECK(ds.beats[i].samples == beats[i].samples);
  }
  CHECK(ds.class_counts == count_classes(beats, 5));

  // Writing the identical data again produces the identical file.
  const std::string once = slurp(path);
  write_beats_csv(path, beats);
  CHECK(slurp(path) == once);

  std::filesystem::remove_all(dir);
}

TEST_CASE("beats CSV reader accepts rows without an id column") {
  const auto dir = fresh_dir("noid");
  const auto path = (dir / "beats.csv").string();

  std::string row;
  for (int i = 0; i < kBeatLength; ++i) row += "0.5,";
  row += "1\n";
  std::ofstream(path) << row << row;

  const BeatDataset ds = read_beats_csv(path, Task::Mi);
  REQUIRE(ds.beats.size() == 2);
  CHECK(ds.beats[0].id == "row1");
  CHECK(ds.beats[1].id == "row2");
  CHECK(ds.beats[0].subject == "row1");  // no colon, id doubles as subject
  CHECK(ds.beats[0].label == 1);
  CHECK(ds.beats[0].samples[0] == 0.5f);
  CHECK(ds.class_counts == std::vector<int64_t>{0, 2});

  std::filesystem::remove_all(dir);
}

TEST_CASE("beats CSV reader rejects malformed rows with file and line") {
  const auto dir = fresh_dir("bad");
  const auto path = (dir / "beats.csv").string();

  std::string good;
  for (int i = 0; i < kBeatLength; ++i) good += "0.25,";
  good += "0\n";

  SUBCASE("wrong field count") {
    std::ofstream(path) << good << "1,2,3\n";
    try {
      (void)read_beats_csv(path, Task::Arrhythmia);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(path + ":2") != std::string::npos);
      CHECK(msg.find("got 3") != std::string::npos);
    }
  }

  SUBCASE("bad float") {
    std::string bad = good;
    bad.replace(bad.find("0.25"), 4, "zed!");
    std::ofstream(path) << bad;
    CHECK_THROWS_AS((void)read_beats_csv(path, Task::Arrhythmia), ParseError);
  }

  SUBCASE("bad label") {
    std::string bad = good;
    bad.replace(bad.rfind(",0\n"), 3, ",x\n");
    std::ofstream(path) << bad;
    CHECK_THROWS_AS((void)read_beats_csv(path, Task::Arrhythmia), ParseError);
  }

  SUBCASE("label out of range for the task") {
    std::string bad = good;
    bad.replace(bad.rfind(",0\n"), 3, ",4\n");
    std::ofstream(path) << bad;
    CHECK_THROWS_AS((void)read_beats_csv(path, Task::Mi), ValueError);
    // The same label is fine for the 5-class task.
    CHECK(read_beats_csv(path, Task::Arrhythmia).beats.size() == 1);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)read_beats_csv((dir / "absent.csv").string(), Task::Mi), IoError);
  }

  SUBCASE("unlabeled beats cannot be written") {
    Beat b;
    CHECK_THROWS_AS(write_beats_csv(path, {b}), ValueError);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("count_classes tallies and validates labels") {
  auto beats = random_beats(52, 30, 3);
  const auto counts = count_classes(beats, 5);
  CHECK(counts.size() == 5);
  CHECK(counts[0] + counts[1] + counts[2] == 30);
  CHECK(counts[3] == 0);
  CHECK(counts[4] == 0);

  beats[0].label.reset();
  CHECK_THROWS_AS((void)count_classes(beats, 5), ValueError);
  beats[0].label = 7;
  CHECK_THROWS_AS((void)count_classes(beats, 5), ValueError);
}

TEST_CASE("parse_config reads key = value lines") {
  const auto cfg = parse_config(
      "# a full-line comment\n"
      "learning_rate = 0.25\n"
      "\n"
      "  iterations=100   # trailing comment\n"
      "seed = 1\n"
      "seed = 2\n"
      "note =\n");
  CHECK(cfg.at("learning_rate") == "0.25");
  CHECK(cfg.at("iterations") == "100");
  CHECK(cfg.at("seed") == "2");  // later keys win
  CHECK(cfg.at("note").empty());
  CHECK(cfg.size() == 4);

  CHECK(parse_config("").empty());
  CHECK_THROWS_AS((void)parse_config("just words\n"), ParseError);
  CHECK_THROWS_AS((void)parse_config("= 3\n"), ParseError);

  try {
    (void)parse_config("a = 1\nnonsense\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("read_config loads from disk") {
  const auto dir = fresh_dir("cfg");
  const auto path = (dir / "run.conf").string();
  std::ofstream(path) << "batch_size = 64\n";
  CHECK(read_config(path).at("batch_size") == "64");
  CHECK_THROWS_AS((void)read_config((dir / "absent.conf").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run manifests record ordered keys and file fingerprints") {
  const auto dir = fresh_dir("man");
  const auto data_path = (dir / "blob.bin").string();
  const std::string payload = "fingerprint me";
  std::ofstream(data_path, std::ios::binary) << payload;

  RunManifest m;
  m.add("command", "train");
  m.add("iterations", static_cast<int64_t>(30000));
  m.add_file("beats", data_path);
  const auto manifest_path = (dir / "manifest.txt").string();
  m.write(manifest_path);

  // FNV-1a, computed here from its definition.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : payload) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char hex[19];
  std::snprintf(hex, sizeof(hex), "0x%016llx", static_cast<unsigned long long>(h));

  const std::string text = slurp(manifest_path);
  CHECK(text == "command = train\niterations = 30000\nbeats.path = " + data_path +
                    "\nbeats.fnv64 = " + hex + "\n");
  CHECK(fnv1a64_file(data_path) == h);
  CHECK(hex64(h) == hex);

  CHECK_THROWS_AS((void)fnv1a64_file((dir / "absent").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("find_records walks flat and nested layouts") {
  const auto dir = fresh_dir("find");

  SUBCASE("flat: the record name is the subject") {
    testsupport::MitSpec spec;
    spec.name = "101";
    spec.duration_s = 12.0;
    testsupport::write_mit_record(dir.string(), spec);
    spec.name = "100";
    testsupport::write_mit_record(dir.string(), spec);

    const auto records = find_records(dir.string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].first == (dir / "100").string());
    CHECK(records[0].second == "100");
    CHECK(records[1].first == (dir / "101").string());
    CHECK(records[1].second == "101");
  }

  SUBCASE("nested: the first directory below the root is the subject") {
    std::filesystem::create_directories(dir / "patient001");
    std::filesystem::create_directories(dir / "patient002");
    testsupport::write_ptb_record((dir / "patient001").string(), "s0010_re", true, 12.0, 3);
    testsupport::write_ptb_record((dir / "patient002").string(), "s0020_re", false, 12.0, 4);

    const auto records = find_records(dir.string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].first == (dir / "patient001" / "s0010_re").string());
    CHECK(records[0].second == "patient001");
    CHECK(records[1].second == "patient002");
  }

  SUBCASE("missing root") {
    CHECK_THROWS_AS((void)find_records((dir / "nope").string()), IoError);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("ingest_records labels annotated records per beat") {
  const auto dir = fresh_dir("ingest_mit");
  testsupport::MitSpec a;
  a.name = "100";
  a.symbols = {'N', 'V'};
  a.duration_s = 31.0;
  a.seed = 11;
  testsupport::write_mit_record(dir.string(), a);
  testsupport::MitSpec b;
  b.name = "104";
  b.symbols = {'N'};
  b.duration_s = 31.0;
  b.seed = 12;
  testsupport::write_mit_record(dir.string(), b);

  IngestReport report;
  const auto beats = ingest_records(find_records(dir.string()), &report);
  CHECK(report.task == Task::Arrhythmia);
  CHECK(report.records_used == 2);
  CHECK(report.skipped.empty());
  CHECK(report.class_counts.size() == 5);
  CHECK(report.class_counts[0] > 0);
  CHECK(report.class_counts[2] > 0);
  CHECK(static_cast<int64_t>(beats.size()) ==
        report.class_counts[0] + report.class_counts[1] + report.class_counts[2] +
            report.class_counts[3] + report.class_counts[4]);
  CHECK(beats.front().subject == "100");
  CHECK(beats.back().subject == "104");
  std::filesystem::remove_all(dir);
}

TEST_CASE("ingest_records labels diagnosis records uniformly") {
  const auto dir = fresh_dir("ingest_ptb");
  std::filesystem::create_directories(dir / "patient001");
  std::filesystem::create_directories(dir / "patient002");
  testsupport::write_ptb_record((dir / "patient001").string(), "s0010_re", true, 25.0, 5);
  testsupport::write_ptb_record((dir / "patient002").string(), "s0020_re", false, 25.0, 6);

  IngestReport report;
  const auto beats = ingest_records(find_records(dir.string()), &report);
  CHECK(report.task == Task::Mi);
  CHECK(report.records_used == 2);
  CHECK(report.class_counts.size() == 2);
  CHECK(report.class_counts[0] > 0);  // healthy control
  CHECK(report.class_counts[1] > 0);  // infarction
  for (const Beat& beat : beats) {
    REQUIRE(beat.label.has_value());
    if (beat.subject == "patient001") CHECK(*beat.label == 1);
    if (beat.subject == "patient002") CHECK(*beat.label == 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("ingest_records skips unusable records and reports why") {
  const auto dir = fresh_dir("ingest_skip");

  // Usable annotated record.
  testsupport::MitSpec good;
  good.name = "200";
  good.duration_s = 31.0;
  testsupport::write_mit_record(dir.string(), good);

  // No lead II anywhere.
  testsupport::MitSpec nolead;
  nolead.name = "201";
  nolead.duration_s = 31.0;
  nolead.with_lead2 = false;
  testsupport::write_mit_record(dir.string(), nolead);

  // No annotations and a diagnosis the mapper does not accept.
  const auto synth = testsupport::make_ecg(360.0, 15.0, 0.8, {'N'}, 9);
  testsupport::write_record(dir.string(), "202", 360.0, 212,
                            {{"MLII", synth.samples, 200.0, 1024, "mV"}},
                            {"Reason for admission: Dysrhythmia"});

  IngestReport report;
  const auto beats = ingest_records(find_records(dir.string()), &report);
  CHECK(beats.size() > 10);
  CHECK(report.records_used == 1);
  REQUIRE(report.skipped.size() == 2);
  CHECK(report.skipped[0] == "201: no lead II channel");
  CHECK(report.skipped[1] == "202: no annotations and no usable diagnosis comment");
  std::filesystem::remove_all(dir);
}

TEST_CASE("ingest_records refuses to mix label sources") {
  const auto dir = fresh_dir("ingest_mix");
  testsupport::MitSpec mit;
  mit.name = "100";
  mit.duration_s = 31.0;
  testsupport::write_mit_record(dir.string(), mit);
  testsupport::write_ptb_record(dir.string(), "s0010_re", true, 15.0, 5);

  CHECK_THROWS_AS((void)ingest_records(find_records(dir.string()), nullptr), ValueError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ingest_records with nothing usable is an error") {
  const auto dir = fresh_dir("ingest_empty");
  testsupport::MitSpec nolead;
  nolead.name = "300";
  nolead.duration_s = 31.0;
  nolead.with_lead2 = false;
  testsupport::write_mit_record(dir.string(), nolead);

  CHECK_THROWS_AS((void)ingest_records(find_records(dir.string()), nullptr), ValueError);
  CHECK_THROWS_AS((void)ingest_records({}, nullptr), ValueError);
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
