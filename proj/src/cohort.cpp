#include "retfuse/cohort.hpp"

#include <algorithm>
#include <map>

#include "retfuse/errors.hpp"

namespace retfuse::cohort {

namespace {

bool has_prefix(const std::string& code, const char* prefix) {
  return code.rfind(prefix, 0) == 0;
}

bool any_ich(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (has_prefix(c, "I60") || has_prefix(c, "I61") || has_prefix(c, "I62")) return true;
  return false;
}

bool any_is(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (has_prefix(c, "I63")) return true;
  return false;
}

bool any_tia(const std::vector<std::string>& codes) {
  for (const auto& c : codes)
    if (has_prefix(c, "G459")) return true;
  return false;
}

}  // namespace

bool is_target_stroke_code(const std::string& code) {
  return has_prefix(code, "I60") || has_prefix(code, "I61") || has_prefix(code, "I62") ||
         has_prefix(code, "I63") || has_prefix(code, "G459");
}

StrokeSubtype classify_subtype(const std::vector<std::string>& diagnosis_codes) {
  if (any_ich(diagnosis_codes)) return StrokeSubtype::ich;
  if (any_is(diagnosis_codes)) return StrokeSubtype::is;
  if (any_tia(diagnosis_codes)) return StrokeSubtype::tia;
  throw DataError("classify_subtype: no target stroke code present");
}

bool confirm_stroke(StrokeSubtype subtype, const std::vector<DrugOrder>& drug_orders,
                    double length_of_stay_days) {
  const bool antiplatelet =
      std::find(drug_orders.begin(), drug_orders.end(), DrugOrder::antiplatelet) !=
      drug_orders.end();
  const bool rtpa =
      std::find(drug_orders.begin(), drug_orders.end(), DrugOrder::rtpa) != drug_orders.end();
  switch (subtype) {
    case StrokeSubtype::tia:
      return antiplatelet;
    case StrokeSubtype::is:
      return rtpa || antiplatelet;
    default:
      return length_of_stay_days > 12.0;
  }
}

std::pair<std::vector<StrokeEvent>, std::vector<CohortRuleTrace>> filter_stroke_encounters(
    const std::vector<PatientRecord>& patients, const std::vector<Encounter>& encounters) {
  std::map<std::string, const PatientRecord*> by_id;
  for (const auto& p : patients) by_id[p.patient_id] = &p;

  std::vector<StrokeEvent> events;
  std::vector<CohortRuleTrace> traces;
  traces.reserve(encounters.size());

  for (const auto& enc : encounters) {
    CohortRuleTrace trace;
    trace.encounter_id = enc.encounter_id;
    trace.patient_id = enc.patient_id;

    const auto it = by_id.find(enc.patient_id);
    const PatientRecord* patient = it == by_id.end() ? nullptr : it->second;

    trace.has_admission_discharge = enc.admission_time && enc.discharge_time;
    trace.inpatient = enc.type == EncounterType::inpatient;
    // A record without a birth date is skipped via the flag, not a crash.
    trace.adult = patient && patient->birth_date && enc.admission_time &&
                  age_years(*patient->birth_date, *enc.admission_time) >= 18.0;
    trace.stroke_icd = std::any_of(enc.diagnosis_codes.begin(), enc.diagnosis_codes.end(),
                                   is_target_stroke_code);
    trace.ct_or_cta = std::any_of(enc.procedures.begin(), enc.procedures.end(), [](Procedure p) {
      return p == Procedure::ct || p == Procedure::ct_angiography;
    });
    if (trace.stroke_icd) {
      trace.subtype = classify_subtype(enc.diagnosis_codes);
      trace.subtype_ok = true;
      if (trace.has_admission_discharge) {
        const double los = *enc.discharge_time - *enc.admission_time;
        trace.confirmed = confirm_stroke(*trace.subtype, enc.drug_orders, los);
      }
    }

    if (trace.passed())
      events.push_back(StrokeEvent{enc.patient_id, enc.encounter_id, *enc.admission_time,
                                   *trace.subtype});
    traces.push_back(std::move(trace));
  }
  return {std::move(events), std::move(traces)};
}

std::vector<ScanStudy> filter_scan_studies(const std::vector<PatientRecord>& patients,
                                           std::vector<ScanStudy> studies) {
  std::map<std::string, const PatientRecord*> by_id;
  for (const auto& p : patients) by_id[p.patient_id] = &p;

  std::erase_if(studies, [&](const ScanStudy& study) {
    const auto it = by_id.find(study.patient_id);
    if (it == by_id.end() || !it->second->birth_date) return true;
    if (age_years(*it->second->birth_date, study.acquisition_time) < 18.0) return true;
    if (study.anatomy != Anatomy::macula) return true;
    if (study.scan_mode != ScanMode::art) return true;
    if (!study.infrared) return true;
    return false;
  });
  return studies;
}

}  // namespace retfuse::cohort
