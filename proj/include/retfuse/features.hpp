#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "retfuse/records.hpp"
#include "retfuse/tensor.hpp"

namespace retfuse::features {

inline constexpr std::size_t kNumVitals = 6;
inline constexpr std::size_t kNumNumeric = 7;   // age + vitals
inline constexpr std::size_t kNumIcdGroups = 24;
inline constexpr std::size_t kFeatureDim = 34;  // 7 numeric + 3 one-hot + 24 flags
inline constexpr int kSchemaVersion = 1;

// Prefix-range groups over the first three characters of an ICD-10-CM code.
// The circulatory chapter is split into clinically distinct blocks; the full
// list is published in docs/feature_schema.md.
struct IcdGroup {
  const char* lo;
  const char* hi;
  const char* name;
};

const std::array<IcdGroup, kNumIcdGroups>& icd_groups();
int icd_group_index(const std::string& code);  // -1 when no group matches

// Standard reference values used when a vital was never measured.
struct ImputationTable {
  double bmi = 25.0;
  double systolic_bp = 120.0;
  double diastolic_bp = 80.0;
  double temperature = 37.0;
  double pulse_rate = 75.0;
  double respiratory_rate = 16.0;
};

struct RawFeatureRow {
  double age_years = 0.0;
  Sex sex = Sex::female;
  Smoking smoking = Smoking::never;
  std::array<double, kNumVitals> vitals{};       // bmi, sys, dia, temp, pulse, resp
  std::array<bool, kNumVitals> vital_measured{};
  std::array<int, kNumIcdGroups> icd_flags{};
};

// Age at scan time; per-vital most-recent lookup over encounters dated at or
// before the scan (the scan's own encounter wins as the most recent one);
// never-measured vitals fall back to the imputation table; group flags use
// diagnosis codes dated strictly before the scan.
RawFeatureRow extract_features(const PatientRecord& patient,
                               const std::vector<const Encounter*>& patient_encounters,
                               Day scan_time, const ImputationTable& table = {});

// Convenience index over a full encounter list.
class EncounterIndex {
 public:
  explicit EncounterIndex(const std::vector<Encounter>& encounters);
  // Throws DataError for an unknown patient id.
  const std::vector<const Encounter*>& for_patient(const std::string& patient_id) const;

 private:
  std::map<std::string, std::vector<const Encounter*>> by_patient_;
  std::vector<const Encounter*> empty_;
};

struct FeatureVector {
  std::array<double, kFeatureDim> values{};
  int schema_version = kSchemaVersion;
};

struct FeatureName {
  std::string name;
  std::string kind;  // numeric | onehot | flag
};

const std::array<FeatureName, kFeatureDim>& feature_schema();

// Min-max bounds fitted on training rows only; transform clips out-of-range
// values to [0, 1] and maps constant training columns to 0.5.
class Normalizer {
 public:
  static Normalizer fit(const std::vector<RawFeatureRow>& training_rows);
  FeatureVector transform(const RawFeatureRow& row) const;

  bool fitted() const { return fitted_; }
  const std::array<std::pair<double, double>, kNumNumeric>& bounds() const { return bounds_; }
  static Normalizer from_bounds(const std::array<std::pair<double, double>, kNumNumeric>& b);

 private:
  bool fitted_ = false;
  std::array<std::pair<double, double>, kNumNumeric> bounds_{};
};

}  // namespace retfuse::features
