#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "retfuse/errors.hpp"
#include "retfuse/labeling.hpp"
#include "retfuse/rng.hpp"

using namespace retfuse;
using namespace retfuse::labeling;

namespace {

PatientRecord adult(const std::string& id) {
  PatientRecord p;
  p.patient_id = id;
  p.birth_date = -60.0 * kDaysPerYear;
  return p;
}

ScanStudy study_at(const std::string& id, const std::string& pid, Day t, bool ir = true) {
  ScanStudy s;
  s.study_id = id;
  s.patient_id = pid;
  s.acquisition_time = t;
  s.n_slices = 25;
  s.oct_volume.emplace_back(8, 8, Modality::oct);
  if (ir) s.infrared = ImageGrid(8, 8, Modality::infrared);
  return s;
}

StrokeEvent event_at(const std::string& pid, const std::string& eid, Day t,
                     StrokeSubtype st = StrokeSubtype::is) {
  return StrokeEvent{pid, eid, t, st};
}

}  // namespace

TEST_CASE("labels follow the 365-day window with the signed gap") {
  auto patients = std::vector<PatientRecord>{adult("P0")};
  std::vector<ScanStudy> studies{study_at("S0", "P0", 100.0), study_at("S1", "P0", 0.0)};
  std::vector<StrokeEvent> events{event_at("P0", "E0", 300.0)};

  auto samples = assign_labels(patients, studies, events);
  REQUIRE(samples.size() == 4);  // two studies x (oct, infrared)
  CHECK(samples[0].sample_id == "S0:oct");
  CHECK(samples[0].delta_days.value() == 200.0);
  CHECK(samples[0].y == 1);

  events[0].stroke_time = 400.0;
  samples = assign_labels(patients, studies, events);
  CHECK(samples[2].sample_id == "S1:oct");
  CHECK(samples[2].delta_days.value() == 400.0);
  CHECK(samples[2].y == 0);
}

TEST_CASE("patients without events get y=0 and no delta") {
  auto samples = assign_labels({adult("P0")}, {study_at("S0", "P0", 10.0)}, {});
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].y == 0);
  CHECK(!samples[0].delta_days.has_value());
  CHECK(!samples[0].subtype.has_value());
}

TEST_CASE("unknown patient in a study is a hard error") {
  CHECK_THROWS_AS(assign_labels({adult("P0")}, {study_at("S0", "PX", 10.0)}, {}), DataError);
}

TEST_CASE("random timelines agree with the exhaustive oracle") {
  Rng rng(777);
  std::vector<PatientRecord> patients;
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> events;
  std::size_t sid = 0, eid = 0;
  for (int p = 0; p < 200; ++p) {
    const auto pid = make_id("P", static_cast<std::size_t>(p));
    patients.push_back(adult(pid));
    const int n_events = static_cast<int>(rng.below(4));  // up to 3
    for (int e = 0; e < n_events; ++e)
      events.push_back(event_at(pid, make_id("E", eid++), rng.uniform(0.0, 3000.0),
                                static_cast<StrokeSubtype>(rng.below(3))));
    const int n_scans = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < n_scans; ++s)
      studies.push_back(study_at(make_id("S", sid++), pid, rng.uniform(0.0, 3000.0)));
  }

  const auto samples = assign_labels(patients, studies, events);

  for (const auto& sample : samples) {
    // O(scans x events) oracle.
    bool any = false;
    double best = 0.0;
    for (const auto& ev : events) {
      if (ev.patient_id != sample.patient_id) continue;
      const double d = ev.stroke_time - sample.t_scan;
      if (!any || std::fabs(d) < std::fabs(best)) {
        best = d;
        any = true;
      }
    }
    if (!any) {
      CHECK(sample.y == 0);
      CHECK(!sample.delta_days.has_value());
    } else {
      REQUIRE(sample.delta_days.has_value());
      CHECK(std::fabs(*sample.delta_days) == std::fabs(best));
      CHECK(sample.y == (std::fabs(best) <= 365.0 ? 1 : 0));
    }
  }
}

TEST_CASE("task filter predicates and horizon monotonicity") {
  auto patients = std::vector<PatientRecord>{adult("P0")};
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> events{event_at("P0", "E0", 1000.0)};
  Rng rng(88);
  for (int i = 0; i < 120; ++i)
    studies.push_back(
        study_at(make_id("S", static_cast<std::size_t>(i)), "P0", rng.uniform(0.0, 2000.0)));
  const auto samples = assign_labels(patients, studies, events);

  TaskSpec risk90{Task::risk, 90};
  for (const auto& s : task_filter(samples, risk90))
    if (s.y == 1) {
      CHECK(*s.delta_days > 0.0);
      CHECK(*s.delta_days <= 90.0);
    }
  TaskSpec lasting90{Task::lasting, 90};
  for (const auto& s : task_filter(samples, lasting90))
    if (s.y == 1) {
      CHECK(*s.delta_days < 0.0);
      CHECK(*s.delta_days >= -90.0);
    }

  // Negatives are identical across variants.
  auto count_neg = [](const std::vector<LabeledSample>& v) {
    std::size_t n = 0;
    for (const auto& s : v) n += s.y == 0;
    return n;
  };
  const auto all_neg = count_neg(samples);
  CHECK(count_neg(task_filter(samples, risk90)) == all_neg);
  CHECK(count_neg(task_filter(samples, lasting90)) == all_neg);

  // Shrinking-horizon monotonicity within each task.
  for (Task task : {Task::overall, Task::risk, Task::lasting}) {
    std::set<std::string> prev;
    for (int n : {90, 180, 270, 365}) {
      std::set<std::string> ids;
      for (const auto& s : task_filter(samples, {task, n}))
        if (s.y == 1) ids.insert(s.sample_id);
      for (const auto& id : prev) CHECK(ids.count(id) == 1);
      prev = ids;
    }
  }

  // Union identity at 365: risk + lasting + boundary equals overall.
  std::set<std::string> united;
  for (const auto& s : task_filter(samples, {Task::risk, 365}))
    if (s.y == 1) united.insert(s.sample_id);
  for (const auto& s : task_filter(samples, {Task::lasting, 365}))
    if (s.y == 1) united.insert(s.sample_id);
  for (const auto& s : samples)
    if (s.y == 1 && s.delta_days && *s.delta_days == 0.0) united.insert(s.sample_id);
  std::set<std::string> overall;
  for (const auto& s : task_filter(samples, {Task::overall, 365}))
    if (s.y == 1) overall.insert(s.sample_id);
  CHECK(united == overall);
}

TEST_CASE("task spec validation") {
  CHECK_THROWS_AS(validate(TaskSpec{Task::risk, 100}), ConfigError);
  CHECK_NOTHROW(validate(TaskSpec{Task::risk, 180}));
}

TEST_CASE("patient split: exact counts, no leakage, determinism") {
  std::vector<PatientRecord> patients;
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> events;
  for (int p = 0; p < 10; ++p) {
    const auto pid = make_id("P", static_cast<std::size_t>(p));
    patients.push_back(adult(pid));
    studies.push_back(study_at(make_id("S", static_cast<std::size_t>(p)), pid, 500.0));
    if (p < 3) events.push_back(event_at(pid, make_id("E", static_cast<std::size_t>(p)), 600.0));
  }
  const auto samples = assign_labels(patients, studies, events);

  const auto split = patient_split(samples, 0.2, 99);
  CHECK(split.test_patients.size() == 2);
  CHECK(split.train_patients.size() == 8);
  for (const auto& id : split.test_patients) CHECK(split.train_patients.count(id) == 0);
  CHECK(split.train.size() + split.test.size() == samples.size());

  const auto split2 = patient_split(samples, 0.2, 99);
  CHECK(split2.test_patients == split.test_patients);
  const auto split3 = patient_split(samples, 0.2, 100);
  CHECK(split.stratified);
  (void)split3;

  CHECK_THROWS_AS(patient_split(samples, 0.0, 1), ConfigError);
}

TEST_CASE("k-fold folds partition samples with zero patient overlap") {
  std::vector<PatientRecord> patients;
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> events;
  std::size_t sid = 0;
  Rng rng(55);
  for (int p = 0; p < 100; ++p) {
    const auto pid = make_id("P", static_cast<std::size_t>(p));
    patients.push_back(adult(pid));
    const int n_scans = 1 + static_cast<int>(rng.below(2));
    for (int s = 0; s < n_scans; ++s)
      studies.push_back(study_at(make_id("S", sid++), pid, rng.uniform(0.0, 2000.0)));
    if (p % 10 == 0)
      events.push_back(event_at(pid, make_id("E", static_cast<std::size_t>(p)), 1000.0));
  }
  const auto samples = assign_labels(patients, studies, events);

  const auto folds = kfold_patient_folds(samples, 5, 7);
  REQUIRE(folds.size() == 5);

  std::map<std::string, int> seen;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    CHECK(folds[f].train.size() + folds[f].validation.size() == samples.size());
    std::set<std::string> train_patients;
    for (const auto& s : folds[f].train) train_patients.insert(s.patient_id);
    for (const auto& pid : folds[f].validation_patients) CHECK(train_patients.count(pid) == 0);
    for (const auto& s : folds[f].validation) seen[s.sample_id]++;
  }
  CHECK(seen.size() == samples.size());
  for (const auto& [id, n] : seen) CHECK(n == 1);

  // Validation patient groups are pairwise disjoint.
  for (std::size_t a = 0; a < folds.size(); ++a)
    for (std::size_t b = a + 1; b < folds.size(); ++b)
      for (const auto& pid : folds[a].validation_patients)
        CHECK(folds[b].validation_patients.count(pid) == 0);

  CHECK_THROWS_AS(kfold_patient_folds(samples, 1, 7), ConfigError);
}
