#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retfuse/records.hpp"

namespace retfuse::labeling {

// One scan image paired with its label. delta_days = t_stroke_nearest -
// t_scan, so positive means the stroke happens after the scan. Pixel data
// stays in the study list; samples carry an index into it.
struct LabeledSample {
  std::string sample_id;  // "<study_id>:<modality>"
  std::string patient_id;
  std::string study_id;
  std::size_t study_index = 0;
  Eye eye = Eye::left;
  Modality modality = Modality::oct;
  Day t_scan = 0;
  int y = 0;
  std::optional<double> delta_days;
  std::optional<StrokeSubtype> subtype;
};

enum class Task { overall, risk, lasting };

const char* to_string(Task t);
Task task_from_string(const std::string& s);

struct TaskSpec {
  Task task = Task::overall;
  int horizon_days = 365;  // one of 90, 180, 270, 365
};

void validate(const TaskSpec& spec);

// Shared positive-keeping predicate, used by both the labeling filter and
// the horizon reports.
bool task_keeps(const TaskSpec& spec, int y, const std::optional<double>& delta_days);

// One sample per (study, modality): the OCT mid slice and the infrared
// image. y = 1 iff the nearest stroke event lies within window_days.
std::vector<LabeledSample> assign_labels(const std::vector<PatientRecord>& patients,
                                         const std::vector<ScanStudy>& studies,
                                         const std::vector<StrokeEvent>& events,
                                         double window_days = 365.0);

// Negatives are always retained in full; positives failing the temporal
// predicate are dropped.
std::vector<LabeledSample> task_filter(const std::vector<LabeledSample>& samples,
                                       const TaskSpec& spec);

struct SplitResult {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::set<std::string> train_patients;
  std::set<std::string> test_patients;
  bool stratified = true;
};

// Patient-level split, stratified on has-any-positive-sample status.
SplitResult patient_split(const std::vector<LabeledSample>& samples, double test_fraction,
                          std::uint64_t seed);

struct Fold {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::set<std::string> validation_patients;
};

std::vector<Fold> kfold_patient_folds(const std::vector<LabeledSample>& samples, int k,
                                      std::uint64_t seed);

}  // namespace retfuse::labeling
