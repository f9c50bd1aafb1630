#include "retfuse/features.hpp"

#include <algorithm>
#include <cctype>

#include "retfuse/errors.hpp"

namespace retfuse::features {

const std::array<IcdGroup, kNumIcdGroups>& icd_groups() {
  static const std::array<IcdGroup, kNumIcdGroups> groups = {{
      {"A00", "B99", "infectious"},
      {"C00", "D49", "neoplasms"},
      {"D50", "D89", "blood"},
      {"E00", "E89", "endocrine_metabolic"},
      {"F01", "F99", "mental_behavioral"},
      {"G00", "G99", "nervous_system"},
      {"H00", "H59", "eye_adnexa"},
      {"I00", "I09", "rheumatic_heart"},
      {"I10", "I16", "hypertensive"},
      {"I20", "I25", "ischemic_heart"},
      {"I26", "I52", "other_heart"},
      {"I60", "I69", "cerebrovascular"},
      {"I70", "I99", "other_circulatory"},
      {"J00", "J99", "respiratory"},
      {"K00", "K95", "digestive"},
      {"L00", "L99", "skin"},
      {"M00", "M99", "musculoskeletal"},
      {"N00", "N99", "genitourinary"},
      {"O00", "O99", "pregnancy"},
      {"P00", "P96", "perinatal"},
      {"Q00", "Q99", "congenital"},
      {"R00", "R99", "symptoms_signs"},
      {"S00", "T88", "injury_poisoning"},
      {"Z00", "Z99", "health_factors"},
  }};
  return groups;
}

int icd_group_index(const std::string& code) {
  if (code.size() < 3) return -1;
  char key[4] = {0, 0, 0, 0};
  for (int i = 0; i < 3; ++i)
    key[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(code[i])));
  const std::string k(key, 3);
  const auto& groups = icd_groups();
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (k >= groups[i].lo && k <= groups[i].hi) return static_cast<int>(i);
  return -1;
}

RawFeatureRow extract_features(const PatientRecord& patient,
                               const std::vector<const Encounter*>& patient_encounters,
                               Day scan_time, const ImputationTable& table) {
  if (!patient.birth_date)
    throw DataError("extract_features: patient " + patient.patient_id + " has no birth date");

  RawFeatureRow row;
  row.age_years = age_years(*patient.birth_date, scan_time);
  row.sex = patient.sex;
  row.smoking = patient.smoking;

  // Dated encounters at or before the scan, most recent first; ties broken
  // by encounter id for determinism.
  std::vector<const Encounter*> history;
  for (const Encounter* e : patient_encounters)
    if (e->admission_time && *e->admission_time <= scan_time) history.push_back(e);
  std::sort(history.begin(), history.end(), [](const Encounter* a, const Encounter* b) {
    if (*a->admission_time != *b->admission_time)
      return *a->admission_time > *b->admission_time;
    return a->encounter_id > b->encounter_id;
  });

  auto vital_of = [](const VitalSigns& v, std::size_t i) -> const std::optional<double>& {
    switch (i) {
      case 0: return v.bmi;
      case 1: return v.systolic_bp;
      case 2: return v.diastolic_bp;
      case 3: return v.temperature;
      case 4: return v.pulse_rate;
      default: return v.respiratory_rate;
    }
  };
  const double defaults[kNumVitals] = {table.bmi,         table.systolic_bp, table.diastolic_bp,
                                       table.temperature, table.pulse_rate,  table.respiratory_rate};

  for (std::size_t i = 0; i < kNumVitals; ++i) {
    row.vitals[i] = defaults[i];
    row.vital_measured[i] = false;
    for (const Encounter* e : history) {
      if (!e->vitals) continue;
      const auto& value = vital_of(*e->vitals, i);
      if (value) {
        row.vitals[i] = *value;
        row.vital_measured[i] = true;
        break;
      }
    }
  }

  // Disease history: codes dated strictly before the scan.
  for (const Encounter* e : history) {
    if (*e->admission_time >= scan_time) continue;
    for (const auto& code : e->diagnosis_codes) {
      const int g = icd_group_index(code);
      if (g >= 0) row.icd_flags[static_cast<std::size_t>(g)] = 1;
    }
  }
  return row;
}

EncounterIndex::EncounterIndex(const std::vector<Encounter>& encounters) {
  for (const auto& e : encounters) by_patient_[e.patient_id].push_back(&e);
}

const std::vector<const Encounter*>& EncounterIndex::for_patient(
    const std::string& patient_id) const {
  const auto it = by_patient_.find(patient_id);
  return it == by_patient_.end() ? empty_ : it->second;  // no encounters is valid history
}

const std::array<FeatureName, kFeatureDim>& feature_schema() {
  static const std::array<FeatureName, kFeatureDim> schema = [] {
    std::array<FeatureName, kFeatureDim> s;
    const char* numeric[kNumNumeric] = {"age_years",   "bmi",        "systolic_bp",
                                        "diastolic_bp", "temperature", "pulse_rate",
                                        "respiratory_rate"};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kNumNumeric; ++i) s[pos++] = {numeric[i], "numeric"};
    s[pos++] = {"sex_male", "onehot"};
    s[pos++] = {"smoking_former", "onehot"};
    s[pos++] = {"smoking_current", "onehot"};
    for (const auto& g : icd_groups())
      s[pos++] = {std::string("icd_") + g.lo + "_" + g.hi, "flag"};
    return s;
  }();
  return schema;
}

Normalizer Normalizer::fit(const std::vector<RawFeatureRow>& training_rows) {
  if (training_rows.empty()) throw ConfigError("Normalizer::fit needs at least one row");
  Normalizer n;
  for (std::size_t f = 0; f < kNumNumeric; ++f) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t r = 0; r < training_rows.size(); ++r) {
      const double v =
          f == 0 ? training_rows[r].age_years : training_rows[r].vitals[f - 1];
      if (r == 0) {
        lo = hi = v;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    n.bounds_[f] = {lo, hi};
  }
  n.fitted_ = true;
  return n;
}

Normalizer Normalizer::from_bounds(
    const std::array<std::pair<double, double>, kNumNumeric>& b) {
  Normalizer n;
  n.bounds_ = b;
  n.fitted_ = true;
  return n;
}

FeatureVector Normalizer::transform(const RawFeatureRow& row) const {
  if (!fitted_) throw StateError("Normalizer::transform called before fit");

  FeatureVector out;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < kNumNumeric; ++f) {
    const double v = f == 0 ? row.age_years : row.vitals[f - 1];
    const auto [lo, hi] = bounds_[f];
    double scaled;
    if (hi == lo) {
      scaled = 0.5;  // constant training column
    } else {
      scaled = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    }
    out.values[pos++] = scaled;
  }
  out.values[pos++] = row.sex == Sex::male ? 1.0 : 0.0;
  out.values[pos++] = row.smoking == Smoking::former ? 1.0 : 0.0;
  out.values[pos++] = row.smoking == Smoking::current ? 1.0 : 0.0;
  for (std::size_t g = 0; g < kNumIcdGroups; ++g)
    out.values[pos++] = row.icd_flags[g] ? 1.0 : 0.0;
  return out;
}

}  // namespace retfuse::features
