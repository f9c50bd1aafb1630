#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "retfuse/records.hpp"

namespace retfuse::cohort {

// Per-rule audit trail for one candidate encounter. An encounter yields a
// StrokeEvent iff every flag passes.
struct CohortRuleTrace {
  std::string encounter_id;
  std::string patient_id;
  bool adult = false;
  bool inpatient = false;
  bool has_admission_discharge = false;
  bool stroke_icd = false;
  bool ct_or_cta = false;
  bool subtype_ok = false;
  bool confirmed = false;
  std::optional<StrokeSubtype> subtype;

  bool passed() const {
    return adult && inpatient && has_admission_discharge && stroke_icd && ct_or_cta &&
           subtype_ok && confirmed;
  }
};

// True iff the code starts with I60/I61/I62/I63 or G459.
bool is_target_stroke_code(const std::string& code);

// Precedence when codes from several classes co-occur: ICH > IS > TIA.
// Throws DataError when no target code is present.
StrokeSubtype classify_subtype(const std::vector<std::string>& diagnosis_codes);

// TIA: anti-platelet order; IS: r-TPA or anti-platelet order;
// ICH: hospital stay strictly longer than 12 days.
bool confirm_stroke(StrokeSubtype subtype, const std::vector<DrugOrder>& drug_orders,
                    double length_of_stay_days);

std::pair<std::vector<StrokeEvent>, std::vector<CohortRuleTrace>> filter_stroke_encounters(
    const std::vector<PatientRecord>& patients, const std::vector<Encounter>& encounters);

// Keeps adult-at-acquisition macular ART studies that carry an infrared
// reflectance image.
std::vector<ScanStudy> filter_scan_studies(const std::vector<PatientRecord>& patients,
                                           std::vector<ScanStudy> studies);

}  // namespace retfuse::cohort
