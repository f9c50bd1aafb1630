#include "retfuse/records.hpp"

#include <cstdio>

#include "retfuse/errors.hpp"

namespace retfuse {

const char* to_string(Sex v) { return v == Sex::male ? "male" : "female"; }

const char* to_string(Smoking v) {
  switch (v) {
    case Smoking::never: return "never";
    case Smoking::former: return "former";
    default: return "current";
  }
}

const char* to_string(EncounterType v) {
  switch (v) {
    case EncounterType::inpatient: return "inpatient";
    case EncounterType::outpatient: return "outpatient";
    default: return "other";
  }
}

const char* to_string(DrugOrder v) {
  switch (v) {
    case DrugOrder::antiplatelet: return "antiplatelet";
    case DrugOrder::rtpa: return "rtpa";
    default: return "other";
  }
}

const char* to_string(Procedure v) {
  switch (v) {
    case Procedure::ct: return "ct";
    case Procedure::ct_angiography: return "ct_angiography";
    default: return "other";
  }
}

const char* to_string(Eye v) { return v == Eye::left ? "left" : "right"; }

const char* to_string(Anatomy v) {
  switch (v) {
    case Anatomy::macula: return "macula";
    case Anatomy::peripapillary: return "peripapillary";
    default: return "anterior";
  }
}

const char* to_string(ScanMode v) { return v == ScanMode::art ? "art" : "other"; }

const char* to_string(Modality v) { return v == Modality::oct ? "oct" : "infrared"; }

const char* to_string(StrokeSubtype v) {
  switch (v) {
    case StrokeSubtype::tia: return "TIA";
    case StrokeSubtype::is: return "IS";
    default: return "ICH";
  }
}

namespace {
[[noreturn]] void bad_enum(const char* kind, const std::string& s) {
  throw DataError(std::string("unknown ") + kind + " value: " + s);
}
}  // namespace

Sex sex_from_string(const std::string& s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  bad_enum("sex", s);
}

Smoking smoking_from_string(const std::string& s) {
  if (s == "never") return Smoking::never;
  if (s == "former") return Smoking::former;
  if (s == "current") return Smoking::current;
  bad_enum("smoking", s);
}

EncounterType encounter_type_from_string(const std::string& s) {
  if (s == "inpatient") return EncounterType::inpatient;
  if (s == "outpatient") return EncounterType::outpatient;
  if (s == "other") return EncounterType::other;
  bad_enum("encounter_type", s);
}

DrugOrder drug_order_from_string(const std::string& s) {
  if (s == "antiplatelet") return DrugOrder::antiplatelet;
  if (s == "rtpa") return DrugOrder::rtpa;
  if (s == "other") return DrugOrder::other;
  bad_enum("drug_order", s);
}

Procedure procedure_from_string(const std::string& s) {
  if (s == "ct") return Procedure::ct;
  if (s == "ct_angiography") return Procedure::ct_angiography;
  if (s == "other") return Procedure::other;
  bad_enum("procedure", s);
}

Eye eye_from_string(const std::string& s) {
  if (s == "left") return Eye::left;
  if (s == "right") return Eye::right;
  bad_enum("eye", s);
}

Anatomy anatomy_from_string(const std::string& s) {
  if (s == "macula") return Anatomy::macula;
  if (s == "peripapillary") return Anatomy::peripapillary;
  if (s == "anterior") return Anatomy::anterior;
  bad_enum("anatomy", s);
}

ScanMode scan_mode_from_string(const std::string& s) {
  if (s == "art") return ScanMode::art;
  if (s == "other") return ScanMode::other;
  bad_enum("scan_mode", s);
}

Modality modality_from_string(const std::string& s) {
  if (s == "oct") return Modality::oct;
  if (s == "infrared") return Modality::infrared;
  bad_enum("modality", s);
}

StrokeSubtype subtype_from_string(const std::string& s) {
  if (s == "TIA") return StrokeSubtype::tia;
  if (s == "IS") return StrokeSubtype::is;
  if (s == "ICH") return StrokeSubtype::ich;
  bad_enum("stroke_subtype", s);
}

std::string make_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, n);
  return buf;
}

}  // namespace retfuse
