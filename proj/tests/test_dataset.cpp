#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "auscult/dataset.hpp"

using namespace auscult;
namespace fs = std::filesystem;

namespace {

struct FixtureTree {
  fs::path root;

  FixtureTree() {
    root = fs::temp_directory_path() / ("auscult_ds_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~FixtureTree() { fs::remove_all(root); }

  void add_recording(const std::string& id, double seconds, const std::string& quality,
                     const std::string& events_json, const std::string& unit = "ms") {
    Waveform w;
    w.rate = 4000.0;
    w.samples.resize(size_t(seconds * 4000.0));
    for (size_t i = 0; i < w.samples.size(); ++i)
      w.samples[i] = 0.1f * float(std::sin(0.05 * double(i)));
    write_wav((root / (id + ".wav")).string(), w);
    std::ofstream out(root / (id + ".json"));
    out << "{\"recording_id\": \"" << id << "\", \"quality\": \"" << quality
        << "\", \"time_unit\": \"" << unit << "\", \"events\": [" << events_json
        << "]}";
  }
};

}  // namespace

TEST_CASE("load_manifest round-trips a synthetic three-recording tree") {
  FixtureTree t;
  t.add_recording("rec_a", 3.0, "N",
                  R"({"onset": 100, "offset": 900, "type": "N"},
                     {"onset": 1200, "offset": 2400, "type": "W"})");
  t.add_recording("rec_b", 2.0, "CAS",
                  R"({"onset": 0, "offset": 500, "type": "FC"},
                     {"onset": 600, "offset": 1800, "type": "Rho"})");
  t.add_recording("rec_c", 1.5, "PQ", R"({"onset": 200, "offset": 1400, "type": "CC"})");

  Manifest m = load_manifest(t.root.string());
  REQUIRE(m.recordings.size() == 3);
  REQUIRE(m.events.size() == 5);
  CHECK(m.file_errors.empty());

  const auto* a = m.find_recording("rec_a");
  REQUIRE(a != nullptr);
  CHECK_THAT(a->duration_s, Catch::Matchers::WithinAbs(3.0, 1e-9));
  CHECK(a->quality_label == QualityLabel::N);

  // milliseconds converted to seconds
  CHECK_THAT(m.events[0].onset_s, Catch::Matchers::WithinAbs(0.1, 1e-9));
  CHECK_THAT(m.events[0].offset_s, Catch::Matchers::WithinAbs(0.9, 1e-9));

  auto hist = m.event_histogram();
  CHECK(hist[EventLabel::N] == 1);
  CHECK(hist[EventLabel::W] == 1);
  CHECK(hist[EventLabel::FC] == 1);
  CHECK(hist[EventLabel::Rho] == 1);
  CHECK(hist[EventLabel::CC] == 1);
  int total = 0;
  for (auto& [label, n] : hist) total += n;
  CHECK(total == int(m.events.size()));
}

TEST_CASE("load_manifest on an empty directory yields an empty manifest") {
  FixtureTree t;
  Manifest m = load_manifest(t.root.string());
  CHECK(m.recordings.empty());
  CHECK(m.events.empty());
}

TEST_CASE("seconds time_unit is honored") {
  FixtureTree t;
  t.add_recording("rec_s", 2.0, "N", R"({"onset": 0.25, "offset": 1.5, "type": "N"})",
                  "s");
  Manifest m = load_manifest(t.root.string());
  REQUIRE(m.events.size() == 1);
  CHECK_THAT(m.events[0].onset_s, Catch::Matchers::WithinAbs(0.25, 1e-9));
  CHECK_THAT(m.events[0].offset_s, Catch::Matchers::WithinAbs(1.5, 1e-9));
}

TEST_CASE("missing wav becomes a per-file error, not a failure") {
  FixtureTree t;
  t.add_recording("rec_ok", 1.0, "N", R"({"onset": 0, "offset": 500, "type": "N"})");
  std::ofstream bad(t.root / "rec_gone.json");
  bad << R"({"recording_id": "rec_gone", "quality": "N", "events": []})";
  bad.close();
  Manifest m = load_manifest(t.root.string());
  CHECK(m.recordings.size() == 1);
  REQUIRE(m.file_errors.size() == 1);
  CHECK(m.file_errors[0].find("rec_gone") != std::string::npos);
}

TEST_CASE("malformed annotation JSON is a hard failure naming the file") {
  FixtureTree t;
  std::ofstream bad(t.root / "broken.json");
  bad << "{ not json";
  bad.close();
  try {
    load_manifest(t.root.string());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
  }
}

TEST_CASE("inverted annotations are rejected and logged") {
  FixtureTree t;
  t.add_recording("rec_x", 2.0, "N",
                  R"({"onset": 900, "offset": 900, "type": "N"},
                     {"onset": 1500, "offset": 700, "type": "W"},
                     {"onset": 100, "offset": 600, "type": "FC"})");
  Manifest m = load_manifest(t.root.string());
  CHECK(m.events.size() == 1);
  CHECK(m.file_errors.size() == 2);
}

TEST_CASE("slice_event length follows the annotation") {
  Waveform w;
  w.rate = 4000.0;
  w.samples.assign(40000, 0.25f);
  EventAnnotation ev{"r", 1.0, 2.0, EventLabel::N};
  CHECK(slice_event(w, ev).samples.size() == 4000);
}

TEST_CASE("slicing the full extent returns the waveform unchanged") {
  Waveform w;
  w.rate = 4000.0;
  w.samples.resize(8000);
  for (size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = float(i);
  EventAnnotation ev{"r", 0.0, 2.0, EventLabel::N};
  CHECK(slice_event(w, ev).samples == w.samples);
}

TEST_CASE("slice indices land exactly on the sample grid") {
  Waveform w;
  w.rate = 8000.0;
  w.samples.resize(16000);
  for (size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = float(i);
  EventAnnotation ev{"r", 0.5, 0.75, EventLabel::W};
  Waveform s = slice_event(w, ev);
  REQUIRE(s.samples.size() == 2000);
  for (size_t i = 0; i < s.samples.size(); ++i) REQUIRE(s.samples[i] == float(4000 + i));
}

TEST_CASE("out-of-range annotations name the offending event") {
  Waveform w;
  w.rate = 4000.0;
  w.samples.assign(4000, 0.0f);
  EventAnnotation ev{"rec_oops", 0.5, 2.0, EventLabel::N};
  try {
    slice_event(w, ev);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("rec_oops") != std::string::npos);
  }
}

TEST_CASE("map_label routes event labels per task") {
  CHECK(map_label(TaskId::T1_1, EventLabel::W).class_index == 1);
  CHECK(map_label(TaskId::T1_1, EventLabel::N).class_index == 0);
  CHECK(map_label(TaskId::T1_2, EventLabel::N).class_index == 0);
  CHECK(map_label(TaskId::T1_2, EventLabel::B).class_index == 6);
  CHECK(map_label(TaskId::T2_1, QualityLabel::CD).class_index == 1);
  CHECK(map_label(TaskId::T2_1, QualityLabel::N).class_index == 0);
  CHECK(map_label(TaskId::T2_1, QualityLabel::PQ).class_index == 2);
  CHECK(map_label(TaskId::T2_2, QualityLabel::N).class_index == 0);
  CHECK(map_label(TaskId::T2_2, QualityLabel::PQ).class_index == 4);
}

TEST_CASE("map_label rejects labels from the wrong level") {
  CHECK_THROWS_AS(map_label(TaskId::T2_1, EventLabel::W), ValidationError);
  CHECK_THROWS_AS(map_label(TaskId::T1_2, QualityLabel::CAS), ValidationError);
}

TEST_CASE("map_label is total and surjective onto each task's classes") {
  for (TaskId task : {TaskId::T1_1, TaskId::T1_2}) {
    std::vector<bool> hit(size_t(class_count(task)), false);
    for (int raw = 0; raw < 7; ++raw) {
      const int c = map_label(task, EventLabel(raw)).class_index;
      REQUIRE(c >= 0);
      REQUIRE(c < class_count(task));
      hit[size_t(c)] = true;
    }
    for (bool h : hit) CHECK(h);
  }
  for (TaskId task : {TaskId::T2_1, TaskId::T2_2}) {
    std::vector<bool> hit(size_t(class_count(task)), false);
    for (int raw = 0; raw < 5; ++raw) {
      const int c = map_label(task, QualityLabel(raw)).class_index;
      REQUIRE(c >= 0);
      REQUIRE(c < class_count(task));
      hit[size_t(c)] = true;
    }
    for (bool h : hit) CHECK(h);
  }
}

TEST_CASE("coarse_label matches map_label through the fine label space") {
  for (int raw = 0; raw < 7; ++raw)
    CHECK(coarse_label(TaskId::T1_1, map_label(TaskId::T1_2, EventLabel(raw)).class_index) ==
          map_label(TaskId::T1_1, EventLabel(raw)).class_index);
  for (int raw = 0; raw < 5; ++raw)
    CHECK(coarse_label(TaskId::T2_1, map_label(TaskId::T2_2, QualityLabel(raw)).class_index) ==
          map_label(TaskId::T2_1, QualityLabel(raw)).class_index);
}

TEST_CASE("splits are deterministic, stratified, and recording-disjoint") {
  FixtureTree t;
  for (int i = 0; i < 10; ++i)
    t.add_recording("n_" + std::to_string(i), 0.5, "N", "");
  for (int i = 0; i < 5; ++i)
    t.add_recording("pq_" + std::to_string(i), 0.5, "PQ", "");
  Manifest m = load_manifest(t.root.string());
  assign_splits(m, 42);
  Manifest m2 = load_manifest(t.root.string());
  assign_splits(m2, 42);
  CHECK(m.split == m2.split);

  int n_train = 0, pq_train = 0;
  for (const auto& [id, s] : m.split) {
    if (id.rfind("n_", 0) == 0 && s == Split::Train) n_train++;
    if (id.rfind("pq_", 0) == 0 && s == Split::Train) pq_train++;
  }
  CHECK(n_train == 8);  // 80% of each stratum
  CHECK(pq_train == 4);
  CHECK(m.split.size() == 15);
}

TEST_CASE("manifest cache mirrors the manifest") {
  FixtureTree t;
  t.add_recording("rec_a", 1.0, "DAS", R"({"onset": 100, "offset": 600, "type": "FC"})");
  Manifest m = load_manifest(t.root.string());
  assign_splits(m, 7);
  const std::string cache = (t.root / "manifest.json").string();
  save_manifest(cache, m);
  Manifest back = load_manifest_cache(cache);
  REQUIRE(back.recordings.size() == 1);
  REQUIRE(back.events.size() == 1);
  CHECK(back.recordings[0].id == "rec_a");
  CHECK(back.recordings[0].quality_label == QualityLabel::DAS);
  CHECK_THAT(back.events[0].onset_s, Catch::Matchers::WithinAbs(0.1, 1e-9));
  CHECK(back.split == m.split);
}
