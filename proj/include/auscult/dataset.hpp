#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "auscult/wav.hpp"

namespace auscult {

// Sound-event labels (annotation level) and recording quality labels.
enum class EventLabel { N = 0, Rho, W, Str, CC, FC, B };
enum class QualityLabel { PQ = 0, N, CAS, DAS, CD };

inline const char* to_string(EventLabel l) {
  static const char* names[] = {"N", "Rho", "W", "Str", "CC", "FC", "B"};
  return names[int(l)];
}
inline const char* to_string(QualityLabel l) {
  static const char* names[] = {"PQ", "N", "CAS", "DAS", "CD"};
  return names[int(l)];
}

inline std::optional<EventLabel> parse_event_label(const std::string& s) {
  static const std::map<std::string, EventLabel> m = {
      {"N", EventLabel::N},   {"Rho", EventLabel::Rho}, {"W", EventLabel::W},
      {"Str", EventLabel::Str}, {"CC", EventLabel::CC}, {"FC", EventLabel::FC},
      {"B", EventLabel::B}};
  auto it = m.find(s);
  return it == m.end() ? std::nullopt : std::optional(it->second);
}
inline std::optional<QualityLabel> parse_quality_label(const std::string& s) {
  static const std::map<std::string, QualityLabel> m = {
      {"PQ", QualityLabel::PQ}, {"N", QualityLabel::N}, {"CAS", QualityLabel::CAS},
      {"DAS", QualityLabel::DAS}, {"CD", QualityLabel::CD}};
  auto it = m.find(s);
  return it == m.end() ? std::nullopt : std::optional(it->second);
}

// Classification tasks: event-level (1-1 binary, 1-2 seven-way) and
// recording-level (2-1 ternary, 2-2 five-way).
enum class TaskId { T1_1, T1_2, T2_1, T2_2 };

inline const char* to_string(TaskId t) {
  static const char* names[] = {"T1_1", "T1_2", "T2_1", "T2_2"};
  return names[int(t)];
}
inline std::optional<TaskId> parse_task(const std::string& s) {
  static const std::map<std::string, TaskId> m = {{"T1_1", TaskId::T1_1},
                                                  {"T1_2", TaskId::T1_2},
                                                  {"T2_1", TaskId::T2_1},
                                                  {"T2_2", TaskId::T2_2}};
  auto it = m.find(s);
  return it == m.end() ? std::nullopt : std::optional(it->second);
}

inline int class_count(TaskId t) {
  switch (t) {
    case TaskId::T1_1: return 2;
    case TaskId::T1_2: return 7;
    case TaskId::T2_1: return 3;
    case TaskId::T2_2: return 5;
  }
  return 0;
}
inline bool event_level(TaskId t) { return t == TaskId::T1_1 || t == TaskId::T1_2; }

// which class index plays the role of "Normal" in the challenge metrics
inline int normal_class(TaskId) { return 0; }

inline std::vector<std::string> class_names(TaskId t) {
  switch (t) {
    case TaskId::T1_1: return {"Normal", "Adventitious"};
    case TaskId::T1_2: return {"N", "Rho", "W", "Str", "CC", "FC", "B"};
    case TaskId::T2_1: return {"Normal", "Adventitious", "PoorQuality"};
    case TaskId::T2_2: return {"N", "CAS", "DAS", "CD", "PQ"};
  }
  return {};
}

struct TaskLabel {
  TaskId task;
  int class_index;
};

// raw annotation label -> task class index
inline TaskLabel map_label(TaskId task, EventLabel raw) {
  require(event_level(task), std::string("map_label: event label ") + to_string(raw) +
                                 " passed to recording-level task " + to_string(task));
  if (task == TaskId::T1_1)
    return {task, raw == EventLabel::N ? 0 : 1};
  return {task, int(raw)};  // identity over the seven event classes
}

inline TaskLabel map_label(TaskId task, QualityLabel raw) {
  require(!event_level(task), std::string("map_label: recording label ") +
                                  to_string(raw) + " passed to event-level task " +
                                  to_string(task));
  if (task == TaskId::T2_1) {
    if (raw == QualityLabel::N) return {task, 0};
    if (raw == QualityLabel::PQ) return {task, 2};
    return {task, 1};  // CAS, DAS, CD -> Adventitious
  }
  static const int t22[] = {4, 0, 1, 2, 3};  // PQ,N,CAS,DAS,CD -> N,CAS,DAS,CD,PQ order
  return {task, t22[int(raw)]};
}

// fine-grained cache label -> coarse task index (T1_2 feeds T1_1, T2_2 feeds T2_1)
inline int coarse_label(TaskId task, int fine_index) {
  switch (task) {
    case TaskId::T1_2:
    case TaskId::T2_2: return fine_index;
    case TaskId::T1_1: return fine_index == 0 ? 0 : 1;
    case TaskId::T2_1:
      if (fine_index == 0) return 0;
      if (fine_index == 4) return 2;  // PQ
      return 1;
  }
  return fine_index;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

struct RecordingMeta {
  std::string id;
  std::string path;
  double duration_s = 0.0;
  QualityLabel quality_label = QualityLabel::N;
};

struct EventAnnotation {
  std::string recording_id;
  double onset_s = 0.0;
  double offset_s = 0.0;
  EventLabel event_label = EventLabel::N;
};

enum class Split { Train, Validation, Test };

inline const char* to_string(Split s) {
  static const char* names[] = {"train", "validation", "test"};
  return names[int(s)];
}

struct Manifest {
  std::vector<RecordingMeta> recordings;
  std::vector<EventAnnotation> events;
  std::map<std::string, Split> split;
  std::vector<std::string> file_errors;  // per-file load problems, non-fatal

  const RecordingMeta* find_recording(const std::string& id) const {
    for (const auto& r : recordings)
      if (r.id == id) return &r;
    return nullptr;
  }
  std::map<EventLabel, int> event_histogram() const {
    std::map<EventLabel, int> h;
    for (const auto& e : events) h[e.event_label]++;
    return h;
  }
  std::map<QualityLabel, int> quality_histogram() const {
    std::map<QualityLabel, int> h;
    for (const auto& r : recordings) h[r.quality_label]++;
    return h;
  }
};

// Loads a dataset tree: one <id>.json annotation next to each <id>.wav.
// Malformed JSON is a hard failure naming the file; a missing or corrupt WAV
// becomes a per-file error entry; an onset >= offset annotation is rejected
// and logged.
inline Manifest load_manifest(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("load_manifest: not a directory: " + root);
  Manifest m;
  std::vector<fs::path> ann_files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      ann_files.push_back(entry.path());
  std::sort(ann_files.begin(), ann_files.end());

  for (const auto& path : ann_files) {
    nlohmann::json j;
    try {
      std::ifstream in(path);
      in >> j;
    } catch (const std::exception& e) {
      throw IoError("malformed annotation JSON " + path.string() + ": " + e.what());
    }
    RecordingMeta rec;
    try {
      rec.id = j.at("recording_id").get<std::string>();
      const auto q = parse_quality_label(j.at("quality").get<std::string>());
      require(q.has_value(), "unknown quality label in " + path.string());
      rec.quality_label = *q;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed annotation JSON " + path.string() + ": " + e.what());
    }
    // milliseconds are the convention; "time_unit" overrides explicitly
    double unit = 1e-3;
    if (j.contains("time_unit")) {
      const std::string u = j["time_unit"].get<std::string>();
      require(u == "ms" || u == "s", "bad time_unit in " + path.string());
      unit = u == "s" ? 1.0 : 1e-3;
    }

    fs::path wav_path = path.parent_path() / (rec.id + ".wav");
    Waveform w;
    try {
      w = read_wav(wav_path.string());
    } catch (const IoError& e) {
      m.file_errors.push_back(e.what());
      continue;
    }
    rec.path = wav_path.string();
    rec.duration_s = w.duration_s();

    if (j.contains("events"))
      for (const auto& je : j["events"]) {
        EventAnnotation ev;
        ev.recording_id = rec.id;
        try {
          ev.onset_s = je.at("onset").get<double>() * unit;
          ev.offset_s = je.at("offset").get<double>() * unit;
          const auto l = parse_event_label(je.at("type").get<std::string>());
          require(l.has_value(), "unknown event label in " + path.string());
          ev.event_label = *l;
        } catch (const nlohmann::json::exception& e) {
          throw IoError("malformed annotation JSON " + path.string() + ": " + e.what());
        }
        if (ev.onset_s >= ev.offset_s) {
          m.file_errors.push_back("rejected annotation (onset >= offset) in " +
                                  path.string());
          continue;
        }
        m.events.push_back(ev);
      }
    m.recordings.push_back(std::move(rec));
  }
  return m;
}

// Cuts the annotated span out of a decoded recording.
inline Waveform slice_event(const Waveform& w, const EventAnnotation& ev) {
  const int64_t start = iround64(ev.onset_s * w.rate);
  const int64_t len = iround64((ev.offset_s - ev.onset_s) * w.rate);
  require(ev.onset_s >= 0 && start + len <= int64_t(w.samples.size()),
          "slice_event: annotation [" + std::to_string(ev.onset_s) + ", " +
              std::to_string(ev.offset_s) + "] outside recording " + ev.recording_id);
  Waveform out;
  out.rate = w.rate;
  out.samples.assign(w.samples.begin() + start, w.samples.begin() + start + len);
  return out;
}

// Stratified 80/20 train/validation split by recording (stratum = quality
// label), deterministic for a fixed seed. Events follow their recording.
inline void assign_splits(Manifest& m, uint64_t seed, double train_frac = 0.8) {
  std::map<QualityLabel, std::vector<std::string>> strata;
  for (const auto& r : m.recordings) strata[r.quality_label].push_back(r.id);
  for (auto& [label, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, uint64_t(label)));
    std::shuffle(ids.begin(), ids.end(), rng);
    const size_t n_train = size_t(std::ceil(train_frac * double(ids.size())));
    for (size_t i = 0; i < ids.size(); ++i)
      m.split[ids[i]] = i < n_train ? Split::Train : Split::Validation;
  }
}

// ---------------------------------------------------------------------------
// manifest cache (single JSON file mirroring the Manifest)
// ---------------------------------------------------------------------------

inline void save_manifest(const std::string& path, const Manifest& m) {
  nlohmann::json j;
  for (const auto& r : m.recordings)
    j["recordings"].push_back({{"id", r.id},
                               {"path", r.path},
                               {"duration_s", r.duration_s},
                               {"quality", to_string(r.quality_label)}});
  j["events"] = nlohmann::json::array();
  for (const auto& e : m.events)
    j["events"].push_back({{"recording_id", e.recording_id},
                           {"onset", e.onset_s},
                           {"offset", e.offset_s},
                           {"type", to_string(e.event_label)},
                           {"time_unit", "s"}});
  for (const auto& [id, split] : m.split) j["split"][id] = to_string(split);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest cache: " + path);
  out << j.dump(2) << "\n";
}

inline Manifest load_manifest_cache(const std::string& path) {
  nlohmann::json j;
  try {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest cache: " + path);
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed manifest cache " + path + ": " + e.what());
  }
  Manifest m;
  for (const auto& jr : j.value("recordings", nlohmann::json::array())) {
    RecordingMeta r;
    r.id = jr.at("id").get<std::string>();
    r.path = jr.value("path", "");
    r.duration_s = jr.at("duration_s").get<double>();
    r.quality_label = *parse_quality_label(jr.at("quality").get<std::string>());
    m.recordings.push_back(std::move(r));
  }
  for (const auto& je : j.value("events", nlohmann::json::array())) {
    EventAnnotation e;
    e.recording_id = je.at("recording_id").get<std::string>();
    e.onset_s = je.at("onset").get<double>();
    e.offset_s = je.at("offset").get<double>();
    e.event_label = *parse_event_label(je.at("type").get<std::string>());
    m.events.push_back(std::move(e));
  }
  if (j.contains("split"))
    for (const auto& [id, s] : j["split"].items()) {
      const std::string v = s.get<std::string>();
      m.split[id] = v == "train" ? Split::Train
                                 : (v == "validation" ? Split::Validation : Split::Test);
    }
  return m;
}

}  // namespace auscult
