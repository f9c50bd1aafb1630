#include <map>
#include <set>

#include "doctest.h"
#include "retfuse/cohort.hpp"
#include "retfuse/errors.hpp"
#include "retfuse/rng.hpp"

using namespace retfuse;
using namespace retfuse::cohort;

namespace {

PatientRecord adult(const std::string& id, double age = 60.0) {
  PatientRecord p;
  p.patient_id = id;
  p.birth_date = -age * kDaysPerYear;
  return p;
}

Encounter confirmed_is(const std::string& pid, const std::string& eid, Day t) {
  Encounter e;
  e.encounter_id = eid;
  e.patient_id = pid;
  e.type = EncounterType::inpatient;
  e.admission_time = t;
  e.discharge_time = t + 5.0;
  e.diagnosis_codes = {"I63.5"};
  e.drug_orders = {DrugOrder::rtpa};
  e.procedures = {Procedure::ct};
  return e;
}

// Independent re-implementation of the full rule chain, structured
// differently from the production code on purpose.
bool oracle_passes(const PatientRecord* p, const Encounter& e) {
  if (!p || !p->birth_date || !e.admission_time) return false;
  if ((*e.admission_time - *p->birth_date) / 365.25 < 18.0) return false;
  if (e.type != EncounterType::inpatient) return false;
  if (!e.admission_time || !e.discharge_time) return false;

  bool ich = false, is = false, tia = false;
  for (const auto& c : e.diagnosis_codes) {
    if (c.substr(0, 3) == "I60" || c.substr(0, 3) == "I61" || c.substr(0, 3) == "I62") ich = true;
    if (c.substr(0, 3) == "I63") is = true;
    if (c.size() >= 4 && c.substr(0, 4) == "G459") tia = true;
  }
  if (!ich && !is && !tia) return false;

  bool has_ct = false;
  for (auto pr : e.procedures)
    if (pr == Procedure::ct || pr == Procedure::ct_angiography) has_ct = true;
  if (!has_ct) return false;

  bool anti = false, rtpa = false;
  for (auto d : e.drug_orders) {
    if (d == DrugOrder::antiplatelet) anti = true;
    if (d == DrugOrder::rtpa) rtpa = true;
  }
  if (ich) return *e.discharge_time - *e.admission_time > 12.0;
  if (is) return rtpa || anti;
  return anti;
}

}  // namespace

TEST_CASE("seventeen-year-old fails the adult flag") {
  // Age at *admission* is what counts: born 17 years before the encounter.
  PatientRecord p;
  p.patient_id = "P1";
  p.birth_date = 1000.0 - 17.0 * kDaysPerYear;
  auto e = confirmed_is("P1", "E1", 1000.0);
  const auto [events, traces] = filter_stroke_encounters({p}, {e});
  CHECK(events.empty());
  REQUIRE(traces.size() == 1);
  CHECK(!traces[0].adult);
  CHECK(traces[0].stroke_icd);
  CHECK(traces[0].confirmed);
}

TEST_CASE("inpatient adult with I63, CT and r-TPA yields an IS event") {
  auto p = adult("P1");
  auto e = confirmed_is("P1", "E1", 1000.0);
  const auto [events, traces] = filter_stroke_encounters({p}, {e});
  REQUIRE(events.size() == 1);
  CHECK(events[0].subtype == StrokeSubtype::is);
  CHECK(events[0].stroke_time == 1000.0);
  CHECK(events[0].encounter_id == "E1");
}

TEST_CASE("missing birth date is skipped via the trace, not a crash") {
  PatientRecord p;
  p.patient_id = "P1";
  auto e = confirmed_is("P1", "E1", 1000.0);
  const auto [events, traces] = filter_stroke_encounters({p}, {e});
  CHECK(events.empty());
  REQUIRE(traces.size() == 1);
  CHECK(!traces[0].adult);
}

TEST_CASE("subtype classification and precedence") {
  CHECK(classify_subtype({"I61.0"}) == StrokeSubtype::ich);
  CHECK(classify_subtype({"G459"}) == StrokeSubtype::tia);
  CHECK(classify_subtype({"I63.5", "G459"}) == StrokeSubtype::is);
  CHECK(classify_subtype({"I63.5", "I60.1", "G459"}) == StrokeSubtype::ich);
  CHECK(classify_subtype({"E11.9", "I62.9"}) == StrokeSubtype::ich);
  CHECK_THROWS_AS(classify_subtype({"E11.9"}), DataError);
  // Near-miss codes that must not match.
  CHECK(!is_target_stroke_code("I64"));
  CHECK(!is_target_stroke_code("G458"));
  CHECK(is_target_stroke_code("G459"));
  CHECK(is_target_stroke_code("I63"));
}

TEST_CASE("confirmation rules per subtype") {
  CHECK(!confirm_stroke(StrokeSubtype::ich, {}, 11.5));
  CHECK(!confirm_stroke(StrokeSubtype::ich, {}, 12.0));
  CHECK(confirm_stroke(StrokeSubtype::ich, {}, 12.5));
  CHECK(confirm_stroke(StrokeSubtype::tia, {DrugOrder::antiplatelet}, 1.0));
  CHECK(!confirm_stroke(StrokeSubtype::tia, {DrugOrder::rtpa}, 1.0));
  CHECK(confirm_stroke(StrokeSubtype::is, {DrugOrder::rtpa}, 20.0));
  CHECK(confirm_stroke(StrokeSubtype::is, {DrugOrder::antiplatelet}, 20.0));
  CHECK(!confirm_stroke(StrokeSubtype::is, {DrugOrder::other}, 20.0));
}

TEST_CASE("brute-force oracle over 1000 random encounters") {
  Rng rng(4040);
  std::vector<PatientRecord> patients;
  for (int i = 0; i < 60; ++i) {
    PatientRecord p;
    p.patient_id = make_id("P", static_cast<std::size_t>(i));
    if (rng.bernoulli(0.95))
      p.birth_date = -rng.uniform(10.0, 90.0) * kDaysPerYear;
    p.sex = rng.bernoulli(0.5) ? Sex::male : Sex::female;
    patients.push_back(p);
  }

  const char* code_pool[] = {"I60.1", "I61.0", "I62.9", "I63.5", "I63",   "G459",
                             "G458",  "I64",   "E11.9", "I10",   "H25.1", "Z00.0"};
  std::vector<Encounter> encounters;
  for (int i = 0; i < 1000; ++i) {
    Encounter e;
    e.encounter_id = make_id("E", static_cast<std::size_t>(i));
    e.patient_id = patients[rng.below(patients.size())].patient_id;
    const double type_draw = rng.uniform();
    e.type = type_draw < 0.6   ? EncounterType::inpatient
             : type_draw < 0.9 ? EncounterType::outpatient
                               : EncounterType::other;
    if (rng.bernoulli(0.95)) e.admission_time = rng.uniform(0.0, 3000.0);
    if (e.admission_time && rng.bernoulli(0.9))
      e.discharge_time = *e.admission_time + rng.uniform(0.0, 25.0);
    const int n_codes = static_cast<int>(rng.below(4));
    for (int c = 0; c < n_codes; ++c)
      e.diagnosis_codes.push_back(code_pool[rng.below(std::size(code_pool))]);
    if (rng.bernoulli(0.5)) e.procedures.push_back(Procedure::ct);
    if (rng.bernoulli(0.2)) e.procedures.push_back(Procedure::ct_angiography);
    if (rng.bernoulli(0.3)) e.procedures.push_back(Procedure::other);
    if (rng.bernoulli(0.4)) e.drug_orders.push_back(DrugOrder::antiplatelet);
    if (rng.bernoulli(0.2)) e.drug_orders.push_back(DrugOrder::rtpa);
    if (rng.bernoulli(0.3)) e.drug_orders.push_back(DrugOrder::other);
    encounters.push_back(std::move(e));
  }

  const auto [events, traces] = filter_stroke_encounters(patients, encounters);
  REQUIRE(traces.size() == encounters.size());

  std::set<std::string> got;
  for (const auto& ev : events) got.insert(ev.encounter_id);

  std::map<std::string, const PatientRecord*> by_id;
  for (const auto& p : patients) by_id[p.patient_id] = &p;
  std::set<std::string> expected;
  for (const auto& e : encounters)
    if (oracle_passes(by_id.count(e.patient_id) ? by_id.at(e.patient_id) : nullptr, e))
      expected.insert(e.encounter_id);

  CHECK(got == expected);

  // Trace soundness: event set equals all-flags-pass set.
  std::set<std::string> from_traces;
  for (const auto& t : traces)
    if (t.passed()) from_traces.insert(t.encounter_id);
  CHECK(from_traces == got);
}

TEST_CASE("rule monotonicity for list removals") {
  Rng rng(4141);
  auto p = adult("P1");
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    Encounter e = confirmed_is("P1", "E1", 500.0);
    e.diagnosis_codes.clear();
    const char* pool[] = {"I60.1", "I63.5", "G459", "E11.9"};
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) e.diagnosis_codes.push_back(pool[rng.below(4)]);
    if (rng.bernoulli(0.3)) e.drug_orders.push_back(DrugOrder::antiplatelet);
    if (!rng.bernoulli(0.7)) e.procedures.clear();

    const bool before = filter_stroke_encounters({p}, {e}).first.size() == 1;

    // Drop one drug order or procedure: a pass may only become a fail.
    Encounter less = e;
    if (!less.drug_orders.empty()) less.drug_orders.pop_back();
    const bool after_drug = filter_stroke_encounters({p}, {less}).first.size() == 1;
    if (!before) CHECK(!after_drug);

    Encounter fewer_procs = e;
    if (!fewer_procs.procedures.empty()) fewer_procs.procedures.pop_back();
    const bool after_proc = filter_stroke_encounters({p}, {fewer_procs}).first.size() == 1;
    if (!before) CHECK(!after_proc);

    // Dropping a diagnosis code is only monotone while the classified
    // subtype stays the same (precedence can downgrade ICH to IS/TIA and
    // switch the confirmation rule).
    if (e.diagnosis_codes.size() > 1) {
      Encounter fewer_codes = e;
      fewer_codes.diagnosis_codes.pop_back();
      bool same_class = false;
      try {
        same_class = classify_subtype(fewer_codes.diagnosis_codes) ==
                     classify_subtype(e.diagnosis_codes);
      } catch (const DataError&) {
        same_class = false;
      }
      if (same_class && !before) {
        CHECK(filter_stroke_encounters({p}, {fewer_codes}).first.empty());
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("scan-study filter keeps only eligible studies and is idempotent") {
  auto p = adult("P1");
  PatientRecord minor_p;
  minor_p.patient_id = "P2";
  minor_p.birth_date = -10.0 * kDaysPerYear;

  auto study = [&](const std::string& id, const std::string& pid, Anatomy a, ScanMode m,
                   bool ir) {
    ScanStudy s;
    s.study_id = id;
    s.patient_id = pid;
    s.acquisition_time = 1000.0;
    s.anatomy = a;
    s.scan_mode = m;
    s.n_slices = 25;
    s.oct_volume.emplace_back(8, 8, Modality::oct);
    if (ir) s.infrared = ImageGrid(8, 8, Modality::infrared);
    return s;
  };

  std::vector<ScanStudy> studies;
  studies.push_back(study("S1", "P1", Anatomy::macula, ScanMode::art, true));       // keep
  studies.push_back(study("S2", "P1", Anatomy::peripapillary, ScanMode::art, true));  // drop
  studies.push_back(study("S3", "P1", Anatomy::macula, ScanMode::other, true));       // drop
  studies.push_back(study("S4", "P1", Anatomy::macula, ScanMode::art, false));        // drop
  studies.push_back(study("S5", "P2", Anatomy::macula, ScanMode::art, true));         // minor

  auto kept = filter_scan_studies({p, minor_p}, studies);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].study_id == "S1");

  auto again = filter_scan_studies({p, minor_p}, kept);
  CHECK(again.size() == kept.size());
}
